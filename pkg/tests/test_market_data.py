import datetime as dt

import numpy as np
import pytest

from marketmood import market_data as md
from marketmood.errors import EmptyDataset, FileUnreadable, MissingColumn, NoOverlap

from conftest import make_bars


class TestLoadNews:
    def test_exact_duplicates_removed(self, news_csv):
        path = news_csv(
            [
                "2019-01-02,MSFT,Microsoft beats estimates",
                "2019-01-02,MSFT,Microsoft beats estimates",
            ]
        )
        items = md.load_news(path)
        assert len(items) == 1
        assert items[0].title == "Microsoft beats estimates"

    def test_bad_date_dropped_and_counted(self, news_csv):
        path = news_csv(
            [
                "not-a-date,MSFT,Something happened",
                "2019-01-02,MSFT,Valid row",
            ]
        )
        items, stats = md.load_news_with_stats(path)
        assert len(items) == 1
        assert stats.dropped_bad_date == 1

    def test_empty_title_dropped(self, news_csv):
        path = news_csv(["2019-01-02,MSFT,   ", "2019-01-03,MSFT,Fine"])
        items, stats = md.load_news_with_stats(path)
        assert [n.title for n in items] == ["Fine"]
        assert stats.dropped_empty_title == 1

    def test_bad_ticker_dropped(self, news_csv):
        path = news_csv(["2019-01-02,NOT A TICKER!!,Fine", "2019-01-03,MSFT,Fine"])
        items, stats = md.load_news_with_stats(path)
        assert len(items) == 1
        assert stats.dropped_bad_ticker == 1

    def test_ticker_uppercased(self, news_csv):
        path = news_csv(["2019-01-02,msft,Lowercase source"])
        assert md.load_news(path)[0].ticker == "MSFT"

    def test_column_mapping(self, news_csv):
        path = news_csv(
            ["2019-01-02,MSFT,Mapped row"], header="published,stock,headline"
        )
        items = md.load_news(path, {"date": "published", "ticker": "stock", "title": "headline"})
        assert items[0].title == "Mapped row"

    def test_missing_column(self, news_csv):
        path = news_csv(["2019-01-02,MSFT"], header="date,ticker")
        with pytest.raises(MissingColumn):
            md.load_news(path)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(FileUnreadable):
            md.load_news(tmp_path / "nope.csv")

    def test_zero_valid_rows(self, news_csv):
        path = news_csv(["bad-date,MSFT,title"])
        with pytest.raises(EmptyDataset):
            md.load_news(path)

    def test_idempotent(self, news_csv):
        path = news_csv(
            ["2019-01-02,MSFT,A", "2019-01-03,AAPL,B", "2019-01-04,MSFT,C"]
        )
        assert md.load_news(path) == md.load_news(path)

    def test_datetime_date_column_accepted(self, news_csv):
        path = news_csv(["2019-01-02 16:30:00,MSFT,With a time part"])
        assert md.load_news(path)[0].date == dt.date(2019, 1, 2)


class TestLoadPrices:
    def test_sorted_ascending(self, price_csv):
        path = price_csv(
            [
                "2019-01-03,10,11,9,10.5,100",
                "2019-01-02,10,11,9,10.5,100",
            ]
        )
        bars = md.load_prices(path, "MSFT")
        assert [b.date.isoformat() for b in bars] == ["2019-01-02", "2019-01-03"]

    def test_ohlc_violation_dropped(self, price_csv):
        # low above open breaks the sanity invariant
        path = price_csv(
            [
                "2019-01-02,10,11,10.5,10.6,100",
                "2019-01-03,10,11,9,10.5,100",
            ]
        )
        bars, stats = md.load_prices_with_stats(path, "MSFT")
        assert len(bars) == 1
        assert stats.dropped_ohlc_violation == 1

    def test_nonpositive_price_dropped(self, price_csv):
        path = price_csv(["2019-01-02,0,11,0,10.5,100", "2019-01-03,10,11,9,10.5,100"])
        bars, stats = md.load_prices_with_stats(path, "MSFT")
        assert len(bars) == 1
        assert stats.dropped_ohlc_violation == 1

    def test_duplicate_date_dropped(self, price_csv):
        path = price_csv(["2019-01-02,10,11,9,10.5,100", "2019-01-02,10,11,9,10.4,100"])
        bars, stats = md.load_prices_with_stats(path, "MSFT")
        assert len(bars) == 1
        assert stats.dropped_duplicate_date == 1

    def test_missing_column(self, price_csv):
        path = price_csv(["2019-01-02,10,11,9,10.5"], header="date,open,high,low,close")
        with pytest.raises(MissingColumn):
            md.load_prices(path, "MSFT")

    def test_extra_columns_and_case_ignored(self, price_csv):
        path = price_csv(
            ["2019-01-02,10,11,9,10.5,10.4,100"],
            header="Date,Open,High,Low,Close,Adj Close,Volume",
        )
        bars = md.load_prices(path, "MSFT")
        assert bars[0].close == 10.5

    def test_idempotent(self, price_csv):
        path = price_csv(["2019-01-02,10,11,9,10.5,100"])
        assert md.load_prices(path, "MSFT") == md.load_prices(path, "MSFT")


class TestJoin:
    def _news(self, *dates):
        return [
            md.NewsItem(date=dt.date.fromisoformat(d), ticker="TEST", title=f"headline {i}")
            for i, d in enumerate(dates)
        ]

    def test_weekend_news_rolls_forward(self):
        bars = [b for b in make_bars(5, start=dt.date(2019, 1, 4))]
        # trading days: Jan 4 (Fri), 7, 8, 9, 10 — Saturday Jan 5 rolls to Monday Jan 7
        series = md.join(self._news("2019-01-05"), bars, "TEST")
        by_date = {bar.date: items for bar, items in series.rows}
        assert len(by_date[dt.date(2019, 1, 7)]) == 1
        assert sum(len(v) for v in by_date.values()) == 1

    def test_uncovered_dates_have_empty_news(self):
        bars = make_bars(3)
        news = self._news(bars[1].date.isoformat())
        series = md.join(news, bars, "TEST")
        counts = [len(items) for _, items in series.rows]
        assert counts == [0, 1, 0]

    def test_disjoint_ranges_raise(self):
        bars = make_bars(3, start=dt.date(2019, 1, 2))
        with pytest.raises(NoOverlap):
            md.join(self._news("2010-05-01"), bars, "TEST")

    def test_stale_news_dropped(self):
        bars = make_bars(4, start=dt.date(2019, 2, 1))
        news = self._news("2019-01-02", "2019-02-03")
        series, stats = md.join_with_stats(news, bars, "TEST")
        assert stats.dropped_unattached_news == 1
        assert stats.rows_kept == 1

    def test_join_dates_equal_price_dates(self):
        rng = np.random.default_rng(3)
        bars = make_bars(40)
        all_days = [bars[i].date for i in rng.integers(0, 40, size=15)]
        news = [
            md.NewsItem(date=d, ticker="TEST", title=f"t{i}") for i, d in enumerate(all_days)
        ]
        series = md.join(news, bars, "TEST")
        assert series.dates == [b.date for b in bars]

    def test_every_item_attached_once_and_forward(self):
        bars = make_bars(30)
        news = []
        day = bars[0].date
        i = 0
        while day <= bars[-1].date:
            news.append(md.NewsItem(date=day, ticker="TEST", title=f"n{i}"))
            day += dt.timedelta(days=1)
            i += 1
        series = md.join(news, bars, "TEST")
        seen = {}
        for bar, items in series.rows:
            for item in items:
                assert item.title not in seen
                seen[item.title] = bar.date
                assert bar.date >= item.date
        dropped = len(news) - len(seen)
        assert dropped >= 0  # trailing weekend items may fall off the end

    def test_empty_inputs_for_ticker(self):
        bars = make_bars(3)
        with pytest.raises(EmptyDataset):
            md.join(self._news("2020-01-02"), [], "TEST")
        with pytest.raises(EmptyDataset):
            md.join([md.NewsItem(dt.date(2020, 1, 2), "OTHER", "x")], bars, "TEST")


class TestCsvRoundTrip:
    def test_news_round_trip(self, tmp_path):
        items = [
            md.NewsItem(dt.date(2019, 1, 2), "MSFT", 'Quote "inside", and a comma'),
            md.NewsItem(dt.date(2019, 1, 3), "MSFT", "Plain title"),
        ]
        path = tmp_path / "round.csv"
        path.write_text(md.news_to_csv(items))
        assert md.load_news(path) == items

    def test_prices_round_trip(self, tmp_path):
        bars = make_bars(5)
        path = tmp_path / "round.csv"
        path.write_text(md.prices_to_csv(bars))
        assert md.load_prices(path, "TEST") == bars
