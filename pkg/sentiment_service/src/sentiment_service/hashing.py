"""Stable headline hashing — the cross-component contract.

Must stay bit-identical to the consumer pipeline's implementation
(documented in its docs/data_formats.md):

    title_hash = lowercase hex of the first 8 bytes (64 bits) of
                 SHA-256(UTF-8 bytes of the whitespace-trimmed title)
"""

import hashlib


def title_hash(title: str) -> str:
    """Return the 16-character hex hash of a headline title."""
    return hashlib.sha256(title.strip().encode("utf-8")).hexdigest()[:16]
