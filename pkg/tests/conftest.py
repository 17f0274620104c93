import datetime as dt
from pathlib import Path

import numpy as np
import pytest

from marketmood.market_data import NewsItem, PriceBar
from marketmood.sentiment import DailyRecord

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_ACCEPTANCE_RESULTS.items()):
        label = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"[{label}] {name}")


def make_trading_days(n, start=dt.date(2020, 1, 2)):
    days = []
    day = start
    while len(days) < n:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def make_bars(n, ticker="TEST", start=dt.date(2020, 1, 2), seed=0):
    rng = np.random.default_rng(seed)
    days = make_trading_days(n, start)
    bars = []
    price = 50.0
    for day in days:
        close = price * (1.0 + 0.01 * rng.standard_normal())
        high = max(price, close) * 1.01
        low = min(price, close) * 0.99
        bars.append(
            PriceBar(
                date=day,
                ticker=ticker,
                open=price,
                high=high,
                low=low,
                close=close,
                volume=float(rng.integers(1000, 9999)),
            )
        )
        price = close
    return bars


def make_records(n, ticker="TEST", seed=0, sentiment=None):
    """Synthetic daily records with a smooth close series."""
    rng = np.random.default_rng(seed)
    days = make_trading_days(n)
    records = []
    close = 100.0
    for i, day in enumerate(days):
        opn = close * (1.0 + 0.001 * rng.standard_normal())
        close = opn * (1.0 + 0.01 * rng.standard_normal())
        score = float(sentiment[i]) if sentiment is not None else float(rng.uniform(-1, 1))
        ret = (close - opn) / opn
        records.append(
            DailyRecord(
                date=day,
                ticker=ticker,
                open=opn,
                close=close,
                volume=float(rng.integers(1000, 9999)),
                return_frac=ret,
                nsi=(1 if ret > 0.01 else -1 if ret < -0.01 else 0),
                sentiment_score=score,
                headline_count=1,
            )
        )
    return records


def windows_from_series(series, lookback, split_tags=None, features=None):
    """Wrap a (n,) or (n, F) series into a WindowSet; target is column 0."""
    from marketmood import features as ft

    values = np.asarray(series, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n, n_feat = values.shape
    count = n - lookback
    inputs = np.empty((count, lookback, n_feat))
    targets = np.empty(count)
    for i in range(count):
        inputs[i] = values[i : i + lookback]
        targets[i] = values[i + lookback, 0]
    days = make_trading_days(count)
    if split_tags is None:
        tags = tuple([ft.TRAIN] * count)
    else:
        tags = tuple(split_tags)
    return ft.WindowSet(
        lookback=lookback,
        features=tuple(features) if features else tuple(f"f{j}" for j in range(n_feat)),
        target_name=(features[0] if features else "f0"),
        ticker="SYN",
        inputs=inputs,
        targets=targets,
        target_dates=tuple(days),
        splits=tags,
        crosses_boundary=np.zeros(count, dtype=bool),
    )


@pytest.fixture
def news_csv(tmp_path):
    def write(rows, header="date,ticker,title"):
        path = tmp_path / "news.csv"
        path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))
        return path

    return write


@pytest.fixture
def price_csv(tmp_path):
    def write(rows, header="date,open,high,low,close,volume"):
        path = tmp_path / "prices.csv"
        path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))
        return path

    return write
