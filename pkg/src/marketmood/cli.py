"""Command-line entry point wiring the pipeline stages.

Stages write their artifacts under a fixed output-directory layout::

    out/
      raw/        cleaned news + price CSVs, ingest drop summary
      scored/     sentiment fixture CSV
      prepared/   daily records, scaler params, window cache, rolling stats
      models/     LSTM checkpoint + history, ARIMA fit JSON
      reports/    per-model runs, predictions CSVs, comparison report

Each stage consumes only the previous stage's files, so runs are resumable
stage by stage. Configuration comes from a TOML file; command-line flags
win over file values, and MARKETMOOD_SENTIMENT_URL overrides the sentiment
service URL between the two.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import urllib.request
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import arima, evaluation, lstm, market_data, sentiment
from . import features as feats
from .atomic import write_text
from .errors import MarketMoodError, UsageError
from .hashing import title_hash

log = logging.getLogger("marketmood")

STAGES = ("ingest", "score", "prepare", "train-lstm", "fit-arima", "evaluate", "compare")
ENV_SERVICE_URL = "MARKETMOOD_SENTIMENT_URL"
SERVICE_BATCH = 256


@dataclass
class RunConfig:
    ticker: str = ""
    seed: int = 0
    output_dir: str = "out"
    deterministic: bool = False
    # data
    news_csv: str = ""
    price_csv: str = ""
    news_columns: dict = field(default_factory=dict)
    attach_horizon_days: int = market_data.DEFAULT_ATTACH_HORIZON_DAYS
    # sentiment
    fixture_csv: str = ""
    service_url: str = ""
    service_model: str = "finbert"
    threshold_s: float = 0.01
    horizon_k: int = 1
    strict_scores: bool = False
    # features
    lookback: int = feats.DEFAULT_LOOKBACK
    use_sentiment: bool = True
    use_nsi: bool = False
    use_volume: bool = False
    train_frac: float = feats.DEFAULT_TRAIN_FRAC
    val_frac: float = feats.DEFAULT_VAL_FRAC
    # lstm
    layer1_units: int = 100
    layer2_units: int = 100
    dense_units: int = 25
    dense_activation: str = "identity"
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    patience: int = 10
    # arima
    arima_p: int = 5
    arima_d: int = 1
    arima_q: int = 0
    rolling_window: int = 30

    @property
    def feature_names(self) -> tuple:
        names = ["close"]
        if self.use_sentiment:
            names.append("sentiment_score")
        if self.use_nsi:
            names.append("nsi")
        if self.use_volume:
            names.append("volume")
        return tuple(names)

    @property
    def lstm_run_name(self) -> str:
        return "lstm+sentiment" if self.use_sentiment else "lstm"

    def digest(self) -> str:
        payload = {k: v for k, v in self.__dict__.items()}
        raw = json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
        return hashlib.sha256(raw).hexdigest()[:16]


_SECTION_KEYS = {
    "data": {
        "news_csv": "news_csv",
        "price_csv": "price_csv",
        "news_columns": "news_columns",
        "attach_horizon_days": "attach_horizon_days",
    },
    "sentiment": {
        "fixture_csv": "fixture_csv",
        "service_url": "service_url",
        "model": "service_model",
        "threshold_s": "threshold_s",
        "horizon_k": "horizon_k",
        "strict": "strict_scores",
    },
    "features": {
        "lookback": "lookback",
        "use_sentiment": "use_sentiment",
        "use_nsi": "use_nsi",
        "use_volume": "use_volume",
        "train_frac": "train_frac",
        "val_frac": "val_frac",
    },
    "lstm": {
        "layer1_units": "layer1_units",
        "layer2_units": "layer2_units",
        "dense_units": "dense_units",
        "dense_activation": "dense_activation",
        "epochs": "epochs",
        "batch_size": "batch_size",
        "learning_rate": "learning_rate",
        "patience": "patience",
    },
    "arima": {
        "p": "arima_p",
        "d": "arima_d",
        "q": "arima_q",
        "rolling_window": "rolling_window",
    },
}


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad TOML in {path}: {exc}") from exc

    cfg = RunConfig()
    for key in ("ticker", "seed", "output_dir", "deterministic"):
        if key in data:
            setattr(cfg, key, data[key])
    for section, mapping in _SECTION_KEYS.items():
        block = data.get(section, {})
        for toml_key, attr in mapping.items():
            if toml_key in block:
                setattr(cfg, attr, block[toml_key])
    unknown = set(data) - {"ticker", "seed", "output_dir", "deterministic", *_SECTION_KEYS}
    if unknown:
        raise UsageError(f"unknown config sections/keys: {sorted(unknown)}")
    return cfg


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    env_url = os.environ.get(ENV_SERVICE_URL)
    if env_url is not None:
        cfg.service_url = env_url
    overrides = {
        "ticker": args.ticker,
        "output_dir": args.out,
        "seed": args.seed,
        "news_csv": getattr(args, "news_csv", None),
        "price_csv": getattr(args, "price_csv", None),
        "fixture_csv": getattr(args, "sentiment_fixture", None),
        "service_url": getattr(args, "sentiment_url", None),
        "lookback": getattr(args, "lookback", None),
        "epochs": getattr(args, "epochs", None),
    }
    for attr, value in overrides.items():
        if value is not None:
            setattr(cfg, attr, value)
    if args.deterministic:
        cfg.deterministic = True
    if not cfg.ticker:
        raise UsageError("a ticker is required (flag --ticker or config key 'ticker')")
    cfg.ticker = cfg.ticker.strip().upper()
    if cfg.fixture_csv and cfg.service_url:
        raise UsageError(
            "configure exactly one sentiment source: fixture_csv and service_url are both set"
        )
    return cfg


# --- output layout ----------------------------------------------------------


class Layout:
    def __init__(self, cfg: RunConfig):
        self.root = Path(cfg.output_dir)
        self.ticker = cfg.ticker

    def dir(self, name: str) -> Path:
        path = self.root / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def news_clean(self):
        return self.dir("raw") / f"news_clean_{self.ticker}.csv"

    def prices_clean(self):
        return self.dir("raw") / f"prices_{self.ticker}.csv"

    def ingest_summary(self):
        return self.dir("raw") / f"ingest_summary_{self.ticker}.json"

    def fixture(self):
        return self.dir("scored") / f"sentiment_{self.ticker}.csv"

    def records(self):
        return self.dir("prepared") / f"records_{self.ticker}.csv"

    def scaler(self):
        return self.dir("prepared") / f"scaler_{self.ticker}.json"

    def windows(self):
        return self.dir("prepared") / f"windows_{self.ticker}.mmwc"

    def rolling(self):
        return self.dir("reports") / f"rolling_{self.ticker}.csv"

    def lstm_ckpt(self):
        return self.dir("models") / f"lstm_{self.ticker}.ckpt"

    def lstm_history(self):
        return self.dir("models") / f"lstm_history_{self.ticker}.csv"

    def arima_fit(self):
        return self.dir("models") / f"arima_{self.ticker}.json"

    def run_json(self, name: str):
        return self.dir("reports") / f"run_{name}_{self.ticker}.json"

    def predictions(self, name: str):
        return self.dir("reports") / f"predictions_{name}_{self.ticker}.csv"

    def report_json(self):
        return self.dir("reports") / f"report_{self.ticker}.json"

    def report_text(self):
        return self.dir("reports") / f"report_{self.ticker}.txt"


# --- stages -------------------------------------------------------------------


def stage_ingest(cfg: RunConfig) -> None:
    if not cfg.news_csv or not cfg.price_csv:
        raise UsageError("ingest needs data.news_csv and data.price_csv")
    lay = Layout(cfg)
    news, news_stats = market_data.load_news_with_stats(cfg.news_csv, cfg.news_columns or None)
    prices, price_stats = market_data.load_prices_with_stats(cfg.price_csv, cfg.ticker)
    _, join_stats = market_data.join_with_stats(news, prices, cfg.ticker, cfg.attach_horizon_days)

    ticker_news = [n for n in news if n.ticker == cfg.ticker]
    write_text(lay.news_clean(), market_data.news_to_csv(ticker_news))
    write_text(lay.prices_clean(), market_data.prices_to_csv(prices))
    summary = {
        "ticker": cfg.ticker,
        "news": news_stats.as_dict(),
        "prices": price_stats.as_dict(),
        "join": join_stats.as_dict(),
    }
    write_text(lay.ingest_summary(), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("ingest: %d news rows, %d price bars", len(ticker_news), len(prices))


def _score_via_service(cfg: RunConfig, items):
    url = cfg.service_url.rstrip("/") + "/v1/score"
    triples = []
    for start in range(0, len(items), SERVICE_BATCH):
        batch = items[start : start + SERVICE_BATCH]
        payload = json.dumps(
            {"texts": [n.title for n in batch], "model": cfg.service_model}
        ).encode("utf-8")
        req = urllib.request.Request(
            url, data=payload, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req) as resp:
                scored = json.loads(resp.read().decode("utf-8"))
        except OSError as exc:
            raise MarketMoodError(f"sentiment service unreachable at {url}: {exc}") from exc
        if len(scored) != len(batch):
            raise MarketMoodError(
                f"sentiment service returned {len(scored)} scores for {len(batch)} texts"
            )
        for entry in scored:
            triples.append(
                sentiment.SentimentTriple(
                    positive=float(entry["positive"]),
                    negative=float(entry["negative"]),
                    neutral=float(entry["neutral"]),
                )
            )
    return triples


def stage_score(cfg: RunConfig) -> None:
    lay = Layout(cfg)
    items = market_data.load_news(lay.news_clean())
    if cfg.fixture_csv:
        scores = sentiment.load_sentiment_fixture(cfg.fixture_csv, cfg.ticker)
        entries = [
            (date, cfg.ticker, thash, triple) for (date, thash), triple in sorted(
                scores.items(), key=lambda kv: (kv[0][0], kv[0][1])
            )
        ]
        source = f"fixture:{cfg.fixture_csv}"
    elif cfg.service_url:
        triples = _score_via_service(cfg, items)
        entries = [
            (n.date, n.ticker, title_hash(n.title), t) for n, t in zip(items, triples)
        ]
        source = f"service:{cfg.service_url}"
    else:
        entries = [
            (n.date, n.ticker, title_hash(n.title), sentiment.NEUTRAL_TRIPLE) for n in items
        ]
        source = "neutral"
    write_text(lay.fixture(), sentiment.fixture_to_csv(entries))
    log.info("score: %d rows from %s", len(entries), source)


def stage_prepare(cfg: RunConfig) -> None:
    lay = Layout(cfg)
    items = market_data.load_news(lay.news_clean())
    bars = market_data.load_prices(lay.prices_clean(), cfg.ticker)
    series = market_data.join(items, bars, cfg.ticker, cfg.attach_horizon_days)
    scores = sentiment.load_sentiment_fixture(lay.fixture(), cfg.ticker)
    records = sentiment.build_daily_records(
        series,
        scores,
        sentiment.SentimentConfig(threshold_s=cfg.threshold_s, horizon_k=cfg.horizon_k),
        strict=cfg.strict_scores,
    )
    write_text(lay.records(), sentiment.records_to_csv(records))

    tags = feats.chronological_split([r.date for r in records], cfg.train_frac, cfg.val_frac)
    train_records = [r for r, t in zip(records, tags) if t == feats.TRAIN]
    scalable = tuple(n for n in cfg.feature_names if n in feats.SCALABLE_FEATURES)
    scaler = feats.fit_scaler(train_records, scalable)
    windows = feats.make_windows(
        records, cfg.lookback, cfg.feature_names, "close", tags, scaler, cfg.ticker
    )
    write_text(lay.scaler(), scaler.to_json() + "\n")
    feats.write_window_cache(windows, lay.windows())

    closes = [r.close for r in records]
    means, stds = arima.rolling_stats(closes, cfg.rolling_window)
    dates = [r.date for r in records][cfg.rolling_window - 1 :]
    write_text(lay.rolling(), evaluation.rolling_stats_csv(dates, means, stds))
    log.info(
        "prepare: %d records -> %d windows (%s)",
        len(records),
        len(windows),
        "/".join(f"{tag}={len(windows.indices(tag))}" for tag in (feats.TRAIN, feats.VAL, feats.TEST)),
    )


def stage_train_lstm(cfg: RunConfig) -> None:
    lay = Layout(cfg)
    windows = feats.read_window_cache(lay.windows())
    arch = lstm.LstmArchitecture(
        input_dim=len(windows.features),
        layer1_units=cfg.layer1_units,
        layer2_units=cfg.layer2_units,
        dense_units=cfg.dense_units,
        dense_activation=cfg.dense_activation,
    )
    model = lstm.init_model(arch, cfg.seed)
    train_cfg = lstm.TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        patience=cfg.patience,
    )
    model, history = lstm.train(model, windows, train_cfg)
    lstm.save_checkpoint(model, lay.lstm_ckpt())
    write_text(lay.lstm_history(), lstm.history_to_csv(history))
    if history:
        log.info(
            "train-lstm: %d epochs, final train MSE %.6g", len(history), history[-1].train_mse
        )


def _scaled_close_and_tags(cfg: RunConfig, lay: Layout):
    records = sentiment.records_from_csv(lay.records())
    scaler = feats.ScalerParams.from_json(lay.scaler().read_text())
    tags = feats.chronological_split([r.date for r in records], cfg.train_frac, cfg.val_frac)
    scaled_close = feats.transform_column([r.close for r in records], scaler, "close")
    return records, scaler, tags, scaled_close


def stage_fit_arima(cfg: RunConfig) -> None:
    lay = Layout(cfg)
    records, _, tags, scaled_close = _scaled_close_and_tags(cfg, lay)
    spec = arima.ArimaSpec(p=cfg.arima_p, d=cfg.arima_d, q=cfg.arima_q)
    n_train = tags.count(feats.TRAIN)
    n_val = tags.count(feats.VAL)
    fit_val = arima.fit(scaled_close[:n_train], spec)
    fit_test = arima.fit(scaled_close[: n_train + n_val], spec)
    payload = {
        "ticker": cfg.ticker,
        "val_fit": arima.fit_to_dict(fit_val),
        "test_fit": arima.fit_to_dict(fit_test),
    }
    write_text(lay.arima_fit(), json.dumps(payload, indent=2, sort_keys=True) + "\n")
    log.info(
        "fit-arima: spec (%d,%d,%d), resid var %.6g",
        spec.p,
        spec.d,
        spec.q,
        fit_test.resid_variance,
    )


def _evaluate_lstm(cfg: RunConfig, lay: Layout) -> evaluation.EvaluatedRun:
    windows = feats.read_window_cache(lay.windows())
    scaler = feats.ScalerParams.from_json(lay.scaler().read_text())
    model = lstm.load_checkpoint(lay.lstm_ckpt())

    def block(split):
        inputs, targets, dates = windows.subset(split)
        preds = lstm.forward_batch(model, inputs, need_cache=False) if len(targets) else np.empty(0)
        return dates, preds, targets

    train_inputs, train_targets, _ = windows.subset(feats.TRAIN)
    train_mse = lstm.dataset_mse(model, train_inputs, train_targets) if len(train_targets) else None
    val_dates, val_pred, val_actual = block(feats.VAL)
    test_dates, test_pred, test_actual = block(feats.TEST)
    return evaluation.EvaluatedRun(
        name=cfg.lstm_run_name,
        ticker=cfg.ticker,
        train_mse=train_mse,
        val_dates=val_dates,
        val_pred_scaled=val_pred,
        val_actual_scaled=val_actual,
        test_dates=test_dates,
        test_pred_scaled=test_pred,
        test_actual_scaled=test_actual,
        test_pred_price=feats.inverse_transform_column(test_pred, scaler, "close"),
        test_actual_price=feats.inverse_transform_column(test_actual, scaler, "close"),
    )


def _evaluate_arima(cfg: RunConfig, lay: Layout) -> evaluation.EvaluatedRun:
    windows = feats.read_window_cache(lay.windows())
    scaler = feats.ScalerParams.from_json(lay.scaler().read_text())
    with open(lay.arima_fit(), "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    fit_val = arima.fit_from_dict(payload["val_fit"])
    fit_test = arima.fit_from_dict(payload["test_fit"])

    val_inputs, val_actual, val_dates = windows.subset(feats.VAL)
    test_inputs, test_actual, test_dates = windows.subset(feats.TEST)
    del val_inputs, test_inputs
    records, _, tags, scaled_close = _scaled_close_and_tags(cfg, lay)
    n_train, n_val, n_test = (tags.count(t) for t in (feats.TRAIN, feats.VAL, feats.TEST))

    # the window targets must be exactly the val/test blocks of the record
    # dates, otherwise arima's forecast horizon would not line up
    dates = [r.date for r in records]
    if list(val_dates) != dates[n_train : n_train + n_val] or list(test_dates) != dates[n_train + n_val :]:
        raise MarketMoodError(
            "window target dates do not cover the val/test blocks; "
            "lookback larger than the train block?"
        )
    val_pred = arima.forecast(fit_val, n_val) if n_val else np.empty(0)
    test_pred = arima.forecast(fit_test, n_test)
    return evaluation.EvaluatedRun(
        name="arima",
        ticker=cfg.ticker,
        train_mse=None,
        val_dates=val_dates,
        val_pred_scaled=val_pred,
        val_actual_scaled=val_actual,
        test_dates=test_dates,
        test_pred_scaled=test_pred,
        test_actual_scaled=test_actual,
        test_pred_price=feats.inverse_transform_column(test_pred, scaler, "close"),
        test_actual_price=feats.inverse_transform_column(test_actual, scaler, "close"),
    )


def stage_evaluate(cfg: RunConfig, which: str = "all") -> None:
    lay = Layout(cfg)
    runs = []
    if which in ("lstm", "all") and lay.lstm_ckpt().exists():
        runs.append(_evaluate_lstm(cfg, lay))
    if which in ("arima", "all") and lay.arima_fit().exists():
        runs.append(_evaluate_arima(cfg, lay))
    if not runs:
        raise UsageError(f"no trained models found under {lay.dir('models')} for '{which}'")
    for run in runs:
        write_text(lay.run_json(run.name), json.dumps(run.to_dict(), indent=2, sort_keys=True) + "\n")
        write_text(lay.predictions(run.name), evaluation.predictions_csv(run))
        log.info("evaluate: %s val MSE %.6g", run.name, run.val_mse)


def stage_compare(cfg: RunConfig) -> None:
    lay = Layout(cfg)
    run_files = sorted(lay.dir("reports").glob(f"run_*_{cfg.ticker}.json"))
    if not run_files:
        raise UsageError("no evaluated runs found; run 'evaluate' first")
    runs = []
    for path in run_files:
        with open(path, "r", encoding="utf-8") as fh:
            runs.append(evaluation.EvaluatedRun.from_dict(json.load(fh)))
    metadata = {"config_digest": cfg.digest()}
    if not cfg.deterministic:
        metadata["generated_at"] = datetime.now(timezone.utc).isoformat()
    report = evaluation.compare(runs, metadata)
    write_text(lay.report_json(), report.to_json())
    write_text(lay.report_text(), report.to_text())
    sys.stdout.write(report.to_text())


def stage_full_run(cfg: RunConfig) -> None:
    stage_ingest(cfg)
    stage_score(cfg)
    stage_prepare(cfg)
    stage_train_lstm(cfg)
    stage_fit_arima(cfg)
    stage_evaluate(cfg)
    stage_compare(cfg)


# --- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketmood",
        description="News-sentiment conditioned close-price forecasting pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--ticker", help="ticker symbol (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument(
            "--deterministic",
            action="store_true",
            help="exclude timestamps from reports for byte-identical reruns",
        )
        return p

    p = add("ingest", "load, validate, and clean news + price CSVs")
    p.add_argument("--news-csv", dest="news_csv")
    p.add_argument("--price-csv", dest="price_csv")

    p = add("score", "produce the sentiment fixture CSV")
    p.add_argument("--sentiment-fixture", dest="sentiment_fixture")
    p.add_argument("--sentiment-url", dest="sentiment_url")

    p = add("prepare", "daily records, scaler, windows, rolling stats")
    p.add_argument("--lookback", type=int)

    p = add("train-lstm", "train the LSTM on prepared windows")
    p.add_argument("--epochs", type=int)

    add("fit-arima", "fit the ARIMA baseline on the scaled close series")

    p = add("evaluate", "score trained models on val/test windows")
    p.add_argument("--model", choices=("lstm", "arima", "all"), default="all")

    add("compare", "merge evaluated runs into the comparison report")

    p = add("full-run", "run every stage in order")
    p.add_argument("--news-csv", dest="news_csv")
    p.add_argument("--price-csv", dest="price_csv")
    p.add_argument("--sentiment-fixture", dest="sentiment_fixture")
    p.add_argument("--sentiment-url", dest="sentiment_url")
    p.add_argument("--lookback", type=int)
    p.add_argument("--epochs", type=int)
    return parser


def run_subcommand(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2

    handlers = {
        "ingest": stage_ingest,
        "score": stage_score,
        "prepare": stage_prepare,
        "train-lstm": stage_train_lstm,
        "fit-arima": stage_fit_arima,
        "compare": stage_compare,
        "full-run": stage_full_run,
    }
    try:
        cfg = resolve_config(args)
        if args.command == "evaluate":
            stage_evaluate(cfg, args.model)
        else:
            handlers[args.command](cfg)
    except UsageError as exc:
        _error_line(args.command, exc)
        return 2
    except MarketMoodError as exc:
        _error_line(args.command, exc)
        return 1
    return 0


def _error_line(stage: str, exc: Exception) -> None:
    line = json.dumps(
        {"stage": stage, "error": type(exc).__name__, "message": str(exc)}, sort_keys=True
    )
    sys.stderr.write(line + "\n")


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
