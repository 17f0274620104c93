"""Golden tests pinning the cross-component title hash.

The sidecar sentiment service implements the same algorithm against the
same 10 title/hash pairs; any drift on either side breaks these.
"""

import hashlib

from marketmood.hashing import title_hash

GOLDEN = [
    ("Company profits soared beyond expectations", "4f743e3cfc439d30"),
    ("Microsoft beats estimates", "8340d119cb4699cd"),
    ("Analysts downgrade the stock amid slowing demand", "97da35f81a62cef4"),
    ("Quarterly revenue fell short of guidance", "9bd6951cf74cf457"),
    ("Board approves record share buyback", "751382579db4ecd1"),
    ("  Leading spaces and trailing spaces  ", "ebb8407f24f5cdfa"),
    ("Unicode check: naïve café résumé", "acdd4236889d3a09"),
    ("Symbols & punctuation: profit-taking, X.Y.Z!", "e9ec9aa566201c76"),
    ("MiXeD CaSe Is PrEsErVeD", "dcf392b7f819e8d7"),
    ("tab\tand interior  spacing preserved", "32eb29fbf508ead4"),
]


def test_golden_hashes():
    for title, expected in GOLDEN:
        assert title_hash(title) == expected


def test_matches_documented_algorithm():
    # lowercase hex of the first 8 bytes of SHA-256 of the trimmed title
    for title, _ in GOLDEN:
        reference = hashlib.sha256(title.strip().encode("utf-8")).digest()[:8].hex()
        assert title_hash(title) == reference


def test_trimming_only_strips_edges():
    assert title_hash("  padded  ") == title_hash("padded")
    assert title_hash("interior  spaces") != title_hash("interior spaces")
    assert title_hash("Case") != title_hash("case")


def test_output_shape():
    for title, _ in GOLDEN:
        h = title_hash(title)
        assert len(h) == 16
        assert h == h.lower()
        int(h, 16)  # valid hex
