"""Metrics, per-model evaluated runs, and the cross-model comparison report.

Comparison losses are reported on the scaled target (magnitudes comparable
across tickers) and on price units (human-readable); both appear in every
report row. Runs may only be compared when they were evaluated on identical
test windows, enforced by a digest over (ticker, target dates, scaled
targets).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyInput, LengthMismatch, MismatchedTestSets, NonFiniteValue


class Metrics(NamedTuple):
    mse: float
    mae: float
    rmse: float


def metrics(pred, actual) -> Metrics:
    """MSE, MAE, RMSE with the exact identity RMSE = sqrt(MSE)."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if pred.size != actual.size:
        raise LengthMismatch(f"{pred.size} predictions vs {actual.size} actuals")
    if pred.size == 0:
        raise EmptyInput("metrics over zero points are undefined")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(actual))):
        raise NonFiniteValue("predictions and actuals must be finite")
    diff = pred - actual
    mse = float(diff @ diff) / pred.size
    mae = float(np.abs(diff).mean())
    return Metrics(mse=mse, mae=mae, rmse=float(np.sqrt(mse)))


def test_set_digest(ticker: str, dates, scaled_targets) -> str:
    """Stable hash identifying the exact test windows a run was scored on."""
    h = hashlib.sha256()
    h.update(ticker.encode("utf-8"))
    for date, value in zip(dates, scaled_targets):
        h.update(b"|")
        h.update(date.isoformat().encode("ascii"))
        h.update(b":")
        h.update(float(value).hex().encode("ascii"))
    return h.hexdigest()


@dataclass
class EvaluatedRun:
    """One model's predictions over the shared val/test windows."""

    name: str
    ticker: str
    train_mse: float | None
    val_dates: list
    val_pred_scaled: np.ndarray
    val_actual_scaled: np.ndarray
    test_dates: list
    test_pred_scaled: np.ndarray
    test_actual_scaled: np.ndarray
    test_pred_price: np.ndarray
    test_actual_price: np.ndarray

    @property
    def val_mse(self) -> float:
        return metrics(self.val_pred_scaled, self.val_actual_scaled).mse

    @property
    def test_digest(self) -> str:
        return test_set_digest(self.ticker, self.test_dates, self.test_actual_scaled)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ticker": self.ticker,
            "train_mse": self.train_mse,
            "val_dates": [d.isoformat() for d in self.val_dates],
            "val_pred_scaled": [float(v) for v in self.val_pred_scaled],
            "val_actual_scaled": [float(v) for v in self.val_actual_scaled],
            "test_dates": [d.isoformat() for d in self.test_dates],
            "test_pred_scaled": [float(v) for v in self.test_pred_scaled],
            "test_actual_scaled": [float(v) for v in self.test_actual_scaled],
            "test_pred_price": [float(v) for v in self.test_pred_price],
            "test_actual_price": [float(v) for v in self.test_actual_price],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluatedRun":
        import datetime as dt

        return cls(
            name=data["name"],
            ticker=data["ticker"],
            train_mse=data["train_mse"],
            val_dates=[dt.date.fromisoformat(d) for d in data["val_dates"]],
            val_pred_scaled=np.asarray(data["val_pred_scaled"], dtype=np.float64),
            val_actual_scaled=np.asarray(data["val_actual_scaled"], dtype=np.float64),
            test_dates=[dt.date.fromisoformat(d) for d in data["test_dates"]],
            test_pred_scaled=np.asarray(data["test_pred_scaled"], dtype=np.float64),
            test_actual_scaled=np.asarray(data["test_actual_scaled"], dtype=np.float64),
            test_pred_price=np.asarray(data["test_pred_price"], dtype=np.float64),
            test_actual_price=np.asarray(data["test_actual_price"], dtype=np.float64),
        )


@dataclass(frozen=True)
class ReportRow:
    model: str
    train_mse: float | None
    val_mse: float
    test_mse: float
    test_mae: float
    test_rmse: float
    price_mse: float
    price_mae: float
    price_rmse: float


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "rows": [
                {
                    "model": r.model,
                    "train_mse": r.train_mse,
                    "val_mse": r.val_mse,
                    "test_mse": r.test_mse,
                    "test_mae": r.test_mae,
                    "test_rmse": r.test_rmse,
                    "price_mse": r.price_mse,
                    "price_mae": r.price_mae,
                    "price_rmse": r.price_rmse,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        headers = ("model", "train_mse", "val_mse", "test_mse", "test_mae", "test_rmse", "price_rmse")
        table = [headers]
        for r in self.rows:
            table.append(
                (
                    r.model,
                    "n/a" if r.train_mse is None else f"{r.train_mse:.6g}",
                    f"{r.val_mse:.6g}",
                    f"{r.test_mse:.6g}",
                    f"{r.test_mae:.6g}",
                    f"{r.test_rmse:.6g}",
                    f"{r.price_rmse:.6g}",
                )
            )
        widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
        lines = []
        for idx, row in enumerate(table):
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
            if idx == 0:
                lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
        return "\n".join(lines) + "\n"


def compare(runs, metadata: dict | None = None) -> EvalReport:
    """Build the comparison report; rows sorted by val MSE, ties by name."""
    runs = list(runs)
    if not runs:
        raise EmptyInput("no runs to compare")
    digests = {run.test_digest for run in runs}
    if len(digests) > 1:
        raise MismatchedTestSets(
            f"runs were evaluated on different test windows: {sorted(digests)}"
        )
    rows = []
    for run in runs:
        scaled = metrics(run.test_pred_scaled, run.test_actual_scaled)
        price = metrics(run.test_pred_price, run.test_actual_price)
        assert scaled.mae <= scaled.rmse + 1e-15  # power-mean inequality
        rows.append(
            ReportRow(
                model=run.name,
                train_mse=run.train_mse,
                val_mse=run.val_mse,
                test_mse=scaled.mse,
                test_mae=scaled.mae,
                test_rmse=scaled.rmse,
                price_mse=price.mse,
                price_mae=price.mae,
                price_rmse=price.rmse,
            )
        )
    rows.sort(key=lambda r: (r.val_mse, r.model))
    meta = dict(metadata or {})
    meta.setdefault("ticker", runs[0].ticker)
    meta.setdefault("test_digest", runs[0].test_digest)
    meta.setdefault(
        "test_range",
        [runs[0].test_dates[0].isoformat(), runs[0].test_dates[-1].isoformat()]
        if runs[0].test_dates
        else [],
    )
    return EvalReport(rows=tuple(rows), metadata=meta)


def predictions_csv(run: EvaluatedRun) -> str:
    """Test-range predictions in price units, 12 significant digits."""
    lines = ["date,actual_close,predicted_close"]
    order = np.argsort(np.array([d.toordinal() for d in run.test_dates]))
    for i in order:
        lines.append(
            f"{run.test_dates[i].isoformat()},"
            f"{run.test_actual_price[i]:.12g},{run.test_pred_price[i]:.12g}"
        )
    return "\n".join(lines) + "\n"


def rolling_stats_csv(dates, means, stds) -> str:
    """Plot-ready rolling statistics; dates are the right edge of each window."""
    if not (len(dates) == len(means) == len(stds)):
        raise LengthMismatch("dates, means, stds must align")
    lines = ["date,rolling_mean,rolling_std"]
    for date, mean, std in zip(dates, means, stds):
        lines.append(f"{date.isoformat()},{mean:.12g},{std:.12g}")
    return "\n".join(lines) + "\n"
