"""Sentiment scores, per-day aggregation, returns, and the numerical sentiment index.

The numerical sentiment index (NSI) is a ternary label derived from the
fractional price return against a threshold ``s``:

    nsi = +1 if return >  s
    nsi = -1 if return < -s
    nsi =  0 otherwise (the boundary |return| = s maps to 0)

Scores arrive either from the sentiment sidecar's fixture CSV
(``date,ticker,title_hash,positive,negative,neutral``) or any mapping with
the same keying; see docs/data_formats.md.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

from .errors import (
    EmptyDataset,
    FileUnreadable,
    MissingColumn,
    MissingScore,
    NonPositiveOpen,
    NonPositiveThreshold,
)
from .hashing import title_hash
from .market_data import JoinedSeries, NewsItem, parse_date

TRIPLE_SUM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SentimentTriple:
    """Class probabilities for one text; must sum to 1 within 1e-3."""

    positive: float
    negative: float
    neutral: float

    def __post_init__(self):
        for name, value in (("positive", self.positive), ("negative", self.negative), ("neutral", self.neutral)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} probability {value!r} outside [0, 1]")
        total = self.positive + self.negative + self.neutral
        if abs(total - 1.0) > TRIPLE_SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 +/- {TRIPLE_SUM_TOLERANCE}")


NEUTRAL_TRIPLE = SentimentTriple(positive=0.0, negative=0.0, neutral=1.0)


@dataclass(frozen=True)
class SentimentConfig:
    threshold_s: float = 0.01
    horizon_k: int = 1

    def __post_init__(self):
        if self.threshold_s <= 0:
            raise NonPositiveThreshold(f"threshold_s must be > 0, got {self.threshold_s}")
        if self.horizon_k < 1:
            raise ValueError(f"horizon_k must be >= 1, got {self.horizon_k}")


@dataclass(frozen=True)
class DailyRecord:
    """Joined per-ticker-per-day feature row."""

    date: dt.date
    ticker: str
    open: float
    close: float
    volume: float
    return_frac: float
    nsi: int
    sentiment_score: float
    headline_count: int
    unscored_count: int = 0
    k_fallback: bool = False  # k-day-ahead close unavailable; k=1 used instead


def scalar_score(triple: SentimentTriple) -> float:
    """Collapse a probability triple to P(positive) - P(negative) in [-1, 1]."""
    return triple.positive - triple.negative


def compute_return(open_t: float, close_tk: float) -> float:
    """Fractional return (close_tk - open_t) / open_t."""
    if open_t <= 0:
        raise NonPositiveOpen(f"open price must be > 0, got {open_t}")
    return (close_tk - open_t) / open_t


def nsi_label(return_frac: float, s: float) -> int:
    if s <= 0:
        raise NonPositiveThreshold(f"threshold must be > 0, got {s}")
    if return_frac > s:
        return 1
    if return_frac < -s:
        return -1
    return 0


def aggregate_day(scores) -> float:
    """Unweighted mean of scalar scores; 0.0 for a day with no headlines."""
    scores = list(scores)
    if not scores:
        return 0.0
    return sum(scores) / len(scores)


def score_key(item: NewsItem) -> tuple[dt.date, str]:
    """Lookup key for a headline in a score map: (original date, title hash)."""
    return (item.date, title_hash(item.title))


def build_daily_records(
    series: JoinedSeries,
    scores,
    cfg: SentimentConfig = SentimentConfig(),
    strict: bool = False,
) -> list[DailyRecord]:
    """Emit one DailyRecord per trading date in the joined series.

    ``scores`` maps ``(news date, title_hash)`` -> SentimentTriple. Headlines
    without a score raise MissingScore in strict mode; otherwise they count
    as neutral and are tallied in the record's ``unscored_count``.

    The return of the record at index t uses the close at index
    t + horizon_k - 1 (horizon_k=1 is the same-day close). Records in the
    final horizon_k - 1 days, where that close is unavailable, fall back to
    k=1 and are flagged ``k_fallback``.
    """
    bars = [bar for bar, _ in series.rows]
    records: list[DailyRecord] = []
    for i, (bar, items) in enumerate(series.rows):
        target_idx = i + cfg.horizon_k - 1
        fallback = target_idx >= len(bars)
        close_tk = bar.close if fallback else bars[target_idx].close
        ret = compute_return(bar.open, close_tk)

        day_scores = []
        unscored = 0
        for item in items:
            triple = scores.get(score_key(item))
            if triple is None:
                if strict:
                    raise MissingScore(item.title)
                triple = NEUTRAL_TRIPLE
                unscored += 1
            day_scores.append(scalar_score(triple))

        records.append(
            DailyRecord(
                date=bar.date,
                ticker=series.ticker,
                open=bar.open,
                close=bar.close,
                volume=bar.volume,
                return_frac=ret,
                nsi=nsi_label(ret, cfg.threshold_s),
                sentiment_score=aggregate_day(day_scores),
                headline_count=len(items),
                unscored_count=unscored,
                k_fallback=fallback,
            )
        )
    return records


# --- fixture CSV (the cross-component contract) ---------------------------

FIXTURE_COLUMNS = ("date", "ticker", "title_hash", "positive", "negative", "neutral")


def fixture_to_csv(entries) -> str:
    """Serialize score rows; entries yield (date, ticker, title_hash, triple)."""
    lines = [",".join(FIXTURE_COLUMNS)]
    for date, ticker, thash, triple in entries:
        lines.append(
            f"{date.isoformat()},{ticker},{thash},"
            f"{triple.positive!r},{triple.negative!r},{triple.neutral!r}"
        )
    return "\n".join(lines) + "\n"


def load_sentiment_fixture(path, ticker: str | None = None) -> dict:
    """Read a sentiment fixture CSV into a ``(date, title_hash) -> triple`` map.

    Rows for other tickers are skipped when ``ticker`` is given. Later rows
    win on duplicate keys (scores are deterministic per text, so duplicates
    should agree anyway).
    """
    if ticker is not None:
        ticker = ticker.strip().upper()
    scores: dict[tuple[dt.date, str], SentimentTriple] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(path, str(exc)) from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in FIXTURE_COLUMNS:
            if col not in header:
                raise MissingColumn(col, path)
        for row in reader:
            if ticker is not None and row["ticker"].strip().upper() != ticker:
                continue
            date = parse_date(row["date"])
            triple = SentimentTriple(
                positive=float(row["positive"]),
                negative=float(row["negative"]),
                neutral=float(row["neutral"]),
            )
            scores[(date, row["title_hash"].strip())] = triple
    return scores


# --- daily-record CSV (the prepared-stage artifact) ------------------------

RECORD_COLUMNS = (
    "date",
    "ticker",
    "open",
    "close",
    "volume",
    "return_frac",
    "nsi",
    "sentiment_score",
    "headline_count",
    "unscored_count",
    "k_fallback",
)


def records_to_csv(records: list[DailyRecord]) -> str:
    lines = [",".join(RECORD_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                (
                    r.date.isoformat(),
                    r.ticker,
                    repr(r.open),
                    repr(r.close),
                    repr(r.volume),
                    repr(r.return_frac),
                    str(r.nsi),
                    repr(r.sentiment_score),
                    str(r.headline_count),
                    str(r.unscored_count),
                    "1" if r.k_fallback else "0",
                )
            )
        )
    return "\n".join(lines) + "\n"


def records_from_csv(path) -> list[DailyRecord]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FileUnreadable(path, str(exc)) from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in RECORD_COLUMNS:
            if col not in header:
                raise MissingColumn(col, path)
        records = [
            DailyRecord(
                date=parse_date(row["date"]),
                ticker=row["ticker"],
                open=float(row["open"]),
                close=float(row["close"]),
                volume=float(row["volume"]),
                return_frac=float(row["return_frac"]),
                nsi=int(row["nsi"]),
                sentiment_score=float(row["sentiment_score"]),
                headline_count=int(row["headline_count"]),
                unscored_count=int(row["unscored_count"]),
                k_fallback=row["k_fallback"] == "1",
            )
            for row in reader
        ]
    if not records:
        raise EmptyDataset(f"no rows in {path}")
    return records
