#!/usr/bin/env python3
"""Regenerate the bundled 200-trading-day demo dataset under fixtures/.

Fully deterministic (fixed seed). The price path carries a seeded dependence
on a latent daily mood signal, headlines are generated from that signal, and
the sentiment fixture holds noisy class probabilities around it, so the
pipeline has something real to learn at demo scale.
"""

import datetime as dt
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from marketmood.hashing import title_hash  # noqa: E402

SEED = 7
TICKER = "MSFT"
N_DAYS = 200
START = dt.date(2019, 1, 2)

POSITIVE_TEMPLATES = (
    "{t} beats quarterly estimates",
    "{t} announces record revenue",
    "Analysts upgrade {t} on strong cloud growth",
    "{t} raises full-year guidance",
    "{t} wins major enterprise contract",
)
NEGATIVE_TEMPLATES = (
    "{t} misses on earnings",
    "{t} faces regulatory probe",
    "Analysts downgrade {t} amid slowing demand",
    "{t} cuts outlook for next quarter",
    "{t} hit by service outage",
)
NEUTRAL_TEMPLATES = (
    "{t} schedules annual shareholder meeting",
    "{t} to present at industry conference",
    "{t} announces board changes",
    "{t} files routine quarterly statement",
)


def trading_days(start, count):
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def main():
    rng = np.random.default_rng(SEED)
    out = Path(__file__).resolve().parent.parent / "fixtures"
    out.mkdir(exist_ok=True)

    days = trading_days(START, N_DAYS)
    mood = np.zeros(N_DAYS)
    for i in range(1, N_DAYS):
        mood[i] = 0.7 * mood[i - 1] + 0.5 * rng.standard_normal()
    mood = np.tanh(mood)

    open_price = 100.0
    price_rows = []
    day_news = []
    for i, day in enumerate(days):
        intraday = 0.015 * mood[i] + 0.006 * rng.standard_normal()
        close = open_price * (1.0 + intraday)
        spread = abs(rng.normal(0, 0.004))
        high = max(open_price, close) * (1.0 + spread)
        low = min(open_price, close) * (1.0 - spread)
        volume = float(rng.integers(1_000_000, 5_000_000))
        price_rows.append((day, open_price, high, low, close, volume))
        open_price = close * (1.0 + 0.002 * rng.standard_normal())

        n_items = int(rng.integers(0, 4))
        titles = []
        for _ in range(n_items):
            tone = mood[i] + 0.4 * rng.standard_normal()
            if tone > 0.25:
                pool = POSITIVE_TEMPLATES
            elif tone < -0.25:
                pool = NEGATIVE_TEMPLATES
            else:
                pool = NEUTRAL_TEMPLATES
            template = pool[int(rng.integers(0, len(pool)))]
            titles.append((template.format(t="Microsoft") + f" (note {i}-{len(titles)})", tone))
        day_news.append((day, titles))

    # a few weekend-dated headlines exercise the forward-roll join rule
    weekend_news = []
    for i in (20, 75, 130):
        saturday = days[i] + dt.timedelta(days=(5 - days[i].weekday()))
        weekend_news.append((saturday, f"Microsoft weekend wrap-up (week {i})", mood[i]))

    news_lines = ["date,ticker,title"]
    fixture_lines = ["date,ticker,title_hash,positive,negative,neutral"]

    def emit(day, title, tone):
        news_lines.append(f'{day.isoformat()},{TICKER},"{title}"')
        pos = float(np.clip(0.34 + 0.3 * tone + 0.05 * rng.standard_normal(), 0.01, 0.97))
        neg = float(np.clip(0.34 - 0.3 * tone + 0.05 * rng.standard_normal(), 0.01, 0.98 - pos))
        neu = 1.0 - pos - neg
        fixture_lines.append(
            f"{day.isoformat()},{TICKER},{title_hash(title)},{pos:.6f},{neg:.6f},{neu:.6f}"
        )

    for day, titles in day_news:
        for title, tone in titles:
            emit(day, title, tone)
    for day, title, tone in weekend_news:
        emit(day, title, tone)

    price_lines = ["date,open,high,low,close,volume"]
    for day, o, h, l, c, v in price_rows:
        price_lines.append(f"{day.isoformat()},{o:.6f},{h:.6f},{l:.6f},{c:.6f},{v:.0f}")

    (out / "news_200d.csv").write_text("\n".join(news_lines) + "\n")
    (out / "prices_200d.csv").write_text("\n".join(price_lines) + "\n")
    (out / "sentiment_200d.csv").write_text("\n".join(fixture_lines) + "\n")

    (out / "run_fixture.toml").write_text(
        f"""# Demo configuration for the bundled 200-day fixture.
# Run from the repository root:  marketmood full-run --config fixtures/run_fixture.toml
ticker = "{TICKER}"
seed = 42
output_dir = "out"

[data]
news_csv = "fixtures/news_200d.csv"
price_csv = "fixtures/prices_200d.csv"

[sentiment]
fixture_csv = "fixtures/sentiment_200d.csv"

[features]
lookback = 30

[lstm]
layer1_units = 48
layer2_units = 48
dense_units = 16
epochs = 4

[arima]
p = 5
d = 1
q = 0
"""
    )
    print(f"wrote fixtures for {N_DAYS} trading days to {out}")


if __name__ == "__main__":
    main()
