"""Batch file scorer: news CSV in, sentiment fixture CSV out.

The fixture CSV (``date,ticker,title_hash,positive,negative,neutral``) is
the contract the consumer pipeline reads; ``title_hash`` uses the shared
64-bit hash. Scores depend only on (text, model), so output is invariant
to the batch-size setting, and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import os
import re

from .backends import ModelRegistry
from .hashing import title_hash

log = logging.getLogger("sentiment_service")

NEWS_COLUMNS = ("date", "ticker", "title")
FIXTURE_HEADER = "date,ticker,title_hash,positive,negative,neutral"
TICKER_PATTERN = re.compile(r"^[A-Z.\-]{1,10}$")


class SchemaError(Exception):
    pass


class MissingColumn(SchemaError):
    def __init__(self, name, path):
        super().__init__(f"required column {name!r} not found in {path}")
        self.name = name


class FileUnreadable(SchemaError):
    pass


class EmptyDataset(SchemaError):
    pass


def _parse_date(raw: str) -> dt.date:
    text = raw.strip()
    try:
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        return dt.datetime.fromisoformat(text).date()


def read_news_rows(path) -> list[tuple[dt.date, str, str]]:
    """Valid (date, ticker, title) rows, in file order; bad rows are skipped."""
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    rows = []
    skipped = 0
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in NEWS_COLUMNS:
            if col not in header:
                raise MissingColumn(col, path)
        for row in reader:
            try:
                date = _parse_date(row["date"] or "")
            except ValueError:
                skipped += 1
                continue
            title = (row["title"] or "").strip()
            ticker = (row["ticker"] or "").strip().upper()
            if not title or not TICKER_PATTERN.match(ticker):
                skipped += 1
                continue
            rows.append((date, ticker, title))
    if not rows:
        raise EmptyDataset(f"no valid news rows in {path}")
    if skipped:
        log.warning("skipped %d invalid rows in %s", skipped, path)
    return rows


def score_file(
    in_path,
    out_path,
    model: str = "finbert",
    batch_size: int = 64,
    registry: ModelRegistry | None = None,
) -> int:
    """Score every valid row of a news CSV into the fixture CSV; returns the
    row count written."""
    rows = read_news_rows(in_path)
    scorer = (registry or ModelRegistry()).get(model)

    lines = [FIXTURE_HEADER]
    for start in range(0, len(rows), batch_size):
        chunk = rows[start : start + batch_size]
        scored = scorer.score([title for _, _, title in chunk])
        for (date, ticker, title), s in zip(chunk, scored):
            lines.append(
                f"{date.isoformat()},{ticker},{title_hash(title)},"
                f"{s.positive!r},{s.negative!r},{s.neutral!r}"
            )

    tmp = f"{out_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, out_path)
    return len(rows)
