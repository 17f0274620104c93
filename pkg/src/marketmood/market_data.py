"""Ingest, validate, deduplicate, and join news headlines with daily price bars.

Input files are CSVs with a header row. The news schema is configurable
(column mapping) to absorb differently-named source exports; the price
schema is fixed to ``date,open,high,low,close,volume`` (extra columns are
ignored, header case-insensitive).

All loaders count dropped rows; the ``*_with_stats`` variants return the
counters so callers can persist a drop summary.
"""

from __future__ import annotations

import csv
import datetime as dt
import re
from bisect import bisect_left
from dataclasses import asdict, dataclass

from .errors import EmptyDataset, FileUnreadable, MissingColumn, NoOverlap

TICKER_PATTERN = re.compile(r"^[A-Z.\-]{1,10}$")

#: logical -> actual column names for news CSVs
DEFAULT_NEWS_SCHEMA = {"date": "date", "ticker": "ticker", "title": "title"}

PRICE_COLUMNS = ("date", "open", "high", "low", "close", "volume")

#: orphan news older than this many calendar days before the next trading
#: day is considered stale and dropped
DEFAULT_ATTACH_HORIZON_DAYS = 5


@dataclass(frozen=True)
class NewsItem:
    date: dt.date
    ticker: str
    title: str


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    ticker: str
    open: float
    high: float
    low: float
    close: float
    volume: float


@dataclass(frozen=True)
class JoinedSeries:
    """One row per trading date: the price bar plus that day's attached news."""

    ticker: str
    rows: tuple  # tuple of (PriceBar, tuple[NewsItem, ...]), date-ascending

    @property
    def dates(self):
        return [bar.date for bar, _ in self.rows]


@dataclass
class IngestStats:
    rows_read: int = 0
    rows_kept: int = 0
    dropped_bad_date: int = 0
    dropped_empty_title: int = 0
    dropped_bad_ticker: int = 0
    dropped_duplicate: int = 0
    dropped_bad_number: int = 0
    dropped_ohlc_violation: int = 0
    dropped_duplicate_date: int = 0
    dropped_unattached_news: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def parse_date(raw: str) -> dt.date:
    """Parse an ISO-8601 date, tolerating a trailing time part.

    Raises ValueError for anything else; callers drop such rows.
    """
    text = raw.strip()
    if not text:
        raise ValueError("empty date")
    try:
        return dt.date.fromisoformat(text[:10])
    except ValueError:
        return dt.datetime.fromisoformat(text).date()


def _open_csv(path):
    try:
        return open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise FileUnreadable(path, str(exc)) from exc


def load_news_with_stats(path, schema: dict | None = None) -> tuple[list[NewsItem], IngestStats]:
    """Load and clean a news CSV.

    Rows with unparseable dates, empty titles, or malformed tickers are
    dropped and counted; exact duplicates (same date, ticker, title) are
    removed keeping the first occurrence.
    """
    schema = dict(DEFAULT_NEWS_SCHEMA, **(schema or {}))
    stats = IngestStats()
    items: list[NewsItem] = []
    seen: set[tuple] = set()

    with _open_csv(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for logical in ("date", "ticker", "title"):
            if schema[logical] not in header:
                raise MissingColumn(schema[logical], path)
        for row in reader:
            stats.rows_read += 1
            try:
                date = parse_date(row[schema["date"]] or "")
            except ValueError:
                stats.dropped_bad_date += 1
                continue
            title = (row[schema["title"]] or "").strip()
            if not title:
                stats.dropped_empty_title += 1
                continue
            ticker = (row[schema["ticker"]] or "").strip().upper()
            if not TICKER_PATTERN.match(ticker):
                stats.dropped_bad_ticker += 1
                continue
            key = (date, ticker, title)
            if key in seen:
                stats.dropped_duplicate += 1
                continue
            seen.add(key)
            items.append(NewsItem(date=date, ticker=ticker, title=title))

    if not items:
        raise EmptyDataset(f"no valid news rows in {path}")
    stats.rows_kept = len(items)
    return items, stats


def load_news(path, schema: dict | None = None) -> list[NewsItem]:
    items, _ = load_news_with_stats(path, schema)
    return items


def load_prices_with_stats(path, ticker: str) -> tuple[list[PriceBar], IngestStats]:
    """Load daily OHLCV bars, enforcing price sanity.

    Rows violating ``low <= min(open, close) <= max(open, close) <= high``,
    non-positive prices, or negative volume are dropped and counted, as are
    rows repeating an already-seen date. Output is date-ascending.
    """
    ticker = ticker.strip().upper()
    stats = IngestStats()
    bars: list[PriceBar] = []
    seen_dates: set[dt.date] = set()

    with _open_csv(path) as fh:
        reader = csv.DictReader(fh)
        header = {name.strip().lower(): name for name in (reader.fieldnames or [])}
        for col in PRICE_COLUMNS:
            if col not in header:
                raise MissingColumn(col, path)
        for row in reader:
            stats.rows_read += 1
            try:
                date = parse_date(row[header["date"]] or "")
            except ValueError:
                stats.dropped_bad_date += 1
                continue
            try:
                o, h, l, c, v = (
                    float(row[header[col]]) for col in ("open", "high", "low", "close", "volume")
                )
            except (TypeError, ValueError):
                stats.dropped_bad_number += 1
                continue
            if min(o, h, l, c) <= 0 or v < 0 or l > min(o, c) or h < max(o, c):
                stats.dropped_ohlc_violation += 1
                continue
            if date in seen_dates:
                stats.dropped_duplicate_date += 1
                continue
            seen_dates.add(date)
            bars.append(PriceBar(date=date, ticker=ticker, open=o, high=h, low=l, close=c, volume=v))

    if not bars:
        raise EmptyDataset(f"no valid price rows in {path}")
    bars.sort(key=lambda b: b.date)
    stats.rows_kept = len(bars)
    return bars, stats


def load_prices(path, ticker: str) -> list[PriceBar]:
    bars, _ = load_prices_with_stats(path, ticker)
    return bars


def join_with_stats(
    news: list[NewsItem],
    prices: list[PriceBar],
    ticker: str,
    attach_horizon_days: int = DEFAULT_ATTACH_HORIZON_DAYS,
) -> tuple[JoinedSeries, IngestStats]:
    """Attach news to trading days for one ticker.

    News dated on a trading day attaches to that day; news dated on a
    non-trading day rolls forward to the next trading day (it can only
    influence the next session). News with no trading day within
    ``attach_horizon_days`` calendar days is dropped and counted.
    """
    ticker = ticker.strip().upper()
    items = [n for n in news if n.ticker == ticker]
    bars = sorted((b for b in prices if b.ticker == ticker), key=lambda b: b.date)
    if not items or not bars:
        raise EmptyDataset(f"no news or no prices for ticker {ticker}")

    trading_dates = [b.date for b in bars]
    news_min = min(n.date for n in items)
    news_max = max(n.date for n in items)
    horizon = dt.timedelta(days=attach_horizon_days)
    if news_max + horizon < trading_dates[0] or news_min > trading_dates[-1]:
        raise NoOverlap(
            f"news range [{news_min}..{news_max}] does not overlap "
            f"trading range [{trading_dates[0]}..{trading_dates[-1]}]"
        )

    stats = IngestStats(rows_read=len(items))
    attached: dict[dt.date, list[NewsItem]] = {d: [] for d in trading_dates}
    for item in items:
        pos = bisect_left(trading_dates, item.date)
        if pos == len(trading_dates) or trading_dates[pos] - item.date > horizon:
            stats.dropped_unattached_news += 1
            continue
        attached[trading_dates[pos]].append(item)
        stats.rows_kept += 1

    rows = tuple((bar, tuple(attached[bar.date])) for bar in bars)
    return JoinedSeries(ticker=ticker, rows=rows), stats


def join(
    news: list[NewsItem],
    prices: list[PriceBar],
    ticker: str,
    attach_horizon_days: int = DEFAULT_ATTACH_HORIZON_DAYS,
) -> JoinedSeries:
    series, _ = join_with_stats(news, prices, ticker, attach_horizon_days)
    return series


def news_to_csv(items: list[NewsItem]) -> str:
    """Serialize cleaned news back to the canonical schema (titles quoted)."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("date", "ticker", "title"))
    for item in items:
        writer.writerow((item.date.isoformat(), item.ticker, item.title))
    return buf.getvalue()


def prices_to_csv(bars: list[PriceBar]) -> str:
    lines = ["date,open,high,low,close,volume"]
    for b in bars:
        lines.append(
            f"{b.date.isoformat()},{b.open!r},{b.high!r},{b.low!r},{b.close!r},{b.volume!r}"
        )
    return "\n".join(lines) + "\n"
