"""Stable headline hashing shared with the sentiment sidecar.

The sentiment fixture CSV identifies headlines by ``title_hash`` instead of
raw text. Both this package and the sidecar service must produce identical
hashes, so the algorithm is fixed bit-exactly (see docs/data_formats.md):

    title_hash = lowercase hex of the first 8 bytes (64 bits) of
                 SHA-256(UTF-8 bytes of the whitespace-trimmed title)

Trimming means stripping leading/trailing whitespace only; interior
whitespace and letter case are preserved.
"""

import hashlib


def title_hash(title: str) -> str:
    """Return the 16-character hex hash of a headline title."""
    return hashlib.sha256(title.strip().encode("utf-8")).hexdigest()[:16]
