"""Feature scaling, supervised lookback windows, and chronological splitting.

Scaling is min-max on training rows only; transformed values outside the
training range intentionally fall outside [0, 1] (no clipping, so the
inverse transform stays exact for reporting in price units).

A window covers L consecutive trading days and predicts the target feature
on the following day. A window belongs to the split of its *target* date;
windows whose span crosses a split boundary are additionally flagged.
"""

from __future__ import annotations

import datetime as dt
import json
import struct
from dataclasses import dataclass

import numpy as np

from .atomic import write_bytes
from .errors import DegenerateFeature, SeriesTooShort, TooFewRows
from .sentiment import DailyRecord

TRAIN, VAL, TEST = "train", "val", "test"
_SPLIT_CODE = {TRAIN: 0, VAL: 1, TEST: 2}
_SPLIT_NAME = {v: k for k, v in _SPLIT_CODE.items()}

#: record fields that are prices/counts and therefore min-max scaled;
#: sentiment_score and nsi are already bounded and pass through unscaled
SCALABLE_FEATURES = ("open", "close", "volume")

DEFAULT_LOOKBACK = 60
DEFAULT_TRAIN_FRAC = 0.9
DEFAULT_VAL_FRAC = 0.09


@dataclass(frozen=True)
class ScalerParams:
    features: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def column(self, name: str) -> int:
        return self.features.index(name)

    def to_json(self) -> str:
        return json.dumps(
            {
                "features": list(self.features),
                "mins": [float(v) for v in self.mins],
                "maxs": [float(v) for v in self.maxs],
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        data = json.loads(text)
        return cls(
            features=tuple(data["features"]),
            mins=np.asarray(data["mins"], dtype=np.float64),
            maxs=np.asarray(data["maxs"], dtype=np.float64),
        )


def feature_matrix(records: list[DailyRecord], features) -> np.ndarray:
    """Extract named DailyRecord fields as an (n, F) float matrix."""
    features = tuple(features)
    out = np.empty((len(records), len(features)), dtype=np.float64)
    for j, name in enumerate(features):
        out[:, j] = [float(getattr(r, name)) for r in records]
    return out


def fit_scaler(rows, features) -> ScalerParams:
    """Fit per-feature min/max from training rows only.

    ``rows`` is an (n, F) array-like, or a list of DailyRecord from which the
    named features are extracted. Constant features are rejected.
    """
    features = tuple(features)
    if isinstance(rows, (list, tuple)) and rows and isinstance(rows[0], DailyRecord):
        values = feature_matrix(rows, features)
    else:
        values = np.asarray(rows, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
    if values.shape[0] < 2:
        raise TooFewRows(f"need >= 2 training rows to fit a scaler, got {values.shape[0]}")
    if values.shape[1] != len(features):
        raise ValueError(f"{values.shape[1]} columns but {len(features)} feature names")
    mins = values.min(axis=0)
    maxs = values.max(axis=0)
    for j, name in enumerate(features):
        if maxs[j] == mins[j]:
            raise DegenerateFeature(name)
    return ScalerParams(features=features, mins=mins, maxs=maxs)


def transform(x, params: ScalerParams) -> np.ndarray:
    """(x - min) / (max - min) per feature; out-of-range values are NOT clipped."""
    x = np.asarray(x, dtype=np.float64)
    return (x - params.mins) / (params.maxs - params.mins)


def inverse_transform(y, params: ScalerParams) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y * (params.maxs - params.mins) + params.mins


def transform_column(x, params: ScalerParams, name: str) -> np.ndarray:
    j = params.column(name)
    x = np.asarray(x, dtype=np.float64)
    return (x - params.mins[j]) / (params.maxs[j] - params.mins[j])


def inverse_transform_column(y, params: ScalerParams, name: str) -> np.ndarray:
    j = params.column(name)
    y = np.asarray(y, dtype=np.float64)
    return y * (params.maxs[j] - params.mins[j]) + params.mins[j]


def chronological_split(
    dates,
    train_frac: float = DEFAULT_TRAIN_FRAC,
    val_frac: float = DEFAULT_VAL_FRAC,
) -> list[str]:
    """Tag each date train/val/test by position, never randomly.

    The first floor(n * (train_frac - val_frac)) dates are train, the next
    floor(n * val_frac) are val, the remainder test. The default 0.9/0.09
    keeps 90% of days before the test block with 10% of that block held out
    for validation.
    """
    if not 0 < train_frac < 1:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    if not 0 <= val_frac < train_frac:
        raise ValueError(f"val_frac must be in [0, train_frac), got {val_frac}")
    dates = list(dates)
    n = len(dates)
    for a, b in zip(dates, dates[1:]):
        if b <= a:
            raise ValueError(f"dates must be strictly increasing ({a} before {b})")
    n_train = int(n * (train_frac - val_frac))
    n_val = int(n * val_frac)
    n_test = n - n_train - n_val
    if n_train == 0 or n_test == 0 or (val_frac > 0 and n_val == 0):
        raise TooFewRows(
            f"split of {n} dates with train_frac={train_frac}, val_frac={val_frac} "
            f"leaves an empty block (train={n_train}, val={n_val}, test={n_test})"
        )
    return [TRAIN] * n_train + [VAL] * n_val + [TEST] * n_test


@dataclass(frozen=True)
class WindowSet:
    """Supervised lookback windows over one ticker's daily records.

    ``inputs[i]`` holds timesteps [i, i+L-1] of the feature matrix and
    ``targets[i]`` the target feature at i+L, so every input strictly
    predates its target.
    """

    lookback: int
    features: tuple
    target_name: str
    ticker: str
    inputs: np.ndarray  # (N, L, F)
    targets: np.ndarray  # (N,)
    target_dates: tuple  # (N,) of datetime.date
    splits: tuple  # (N,) of "train" | "val" | "test"
    crosses_boundary: np.ndarray  # (N,) bool: window spans a split boundary

    def __len__(self):
        return len(self.targets)

    def indices(self, split: str) -> np.ndarray:
        return np.array([i for i, s in enumerate(self.splits) if s == split], dtype=np.intp)

    def subset(self, split: str):
        idx = self.indices(split)
        return self.inputs[idx], self.targets[idx], [self.target_dates[i] for i in idx]


def make_windows(
    records: list[DailyRecord],
    lookback: int,
    features,
    target: str,
    split_tags=None,
    scaler: ScalerParams | None = None,
    ticker: str | None = None,
) -> WindowSet:
    """Build n - L windows over the records.

    The feature matrix applies ``scaler`` to any feature present in it
    (price-unit channels); other features pass through raw. A window's split
    tag is its target date's tag; windows whose first input is tagged
    differently from their target cross a boundary and are flagged (they
    stay in the later, target-side split).
    """
    features = tuple(features)
    n = len(records)
    if n <= lookback:
        raise SeriesTooShort(f"need more than lookback={lookback} records, got {n}")
    if lookback < 1:
        raise ValueError(f"lookback must be >= 1, got {lookback}")
    if split_tags is not None and len(split_tags) != n:
        raise ValueError("split_tags length must match records")

    matrix = feature_matrix(records, features)
    if scaler is not None:
        for j, name in enumerate(features):
            if name in scaler.features:
                matrix[:, j] = transform_column(matrix[:, j], scaler, name)
    target_col = feature_matrix(records, (target,))[:, 0]
    if scaler is not None and target in scaler.features:
        target_col = transform_column(target_col, scaler, target)

    count = n - lookback
    inputs = np.empty((count, lookback, len(features)), dtype=np.float64)
    targets = np.empty(count, dtype=np.float64)
    dates = []
    tags = []
    crosses = np.zeros(count, dtype=bool)
    for i in range(count):
        inputs[i] = matrix[i : i + lookback]
        targets[i] = target_col[i + lookback]
        dates.append(records[i + lookback].date)
        if split_tags is None:
            tags.append(TRAIN)
        else:
            tags.append(split_tags[i + lookback])
            crosses[i] = split_tags[i] != split_tags[i + lookback]

    return WindowSet(
        lookback=lookback,
        features=features,
        target_name=target,
        ticker=(ticker or records[0].ticker),
        inputs=inputs,
        targets=targets,
        target_dates=tuple(dates),
        splits=tuple(tags),
        crosses_boundary=crosses,
    )


# --- binary cache ----------------------------------------------------------
#
# Little-endian throughout; see docs/data_formats.md for the byte layout.

_CACHE_MAGIC = b"MMWC"
_CACHE_VERSION = 1


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _unpack_str(buf: memoryview, off: int) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", buf, off)
    off += 2
    return bytes(buf[off : off + n]).decode("utf-8"), off + n


def write_window_cache(windows: WindowSet, path) -> None:
    parts = [
        _CACHE_MAGIC,
        struct.pack("<I", _CACHE_VERSION),
        struct.pack("<III", windows.lookback, len(windows.features), 0),
        struct.pack("<Q", len(windows)),
        _pack_str(windows.ticker),
        _pack_str(windows.target_name),
    ]
    for name in windows.features:
        parts.append(_pack_str(name))
    dates = np.array([d.toordinal() for d in windows.target_dates], dtype="<i8")
    splits = np.array([_SPLIT_CODE[s] for s in windows.splits], dtype=np.uint8)
    parts.append(dates.tobytes())
    parts.append(splits.tobytes())
    parts.append(windows.crosses_boundary.astype(np.uint8).tobytes())
    parts.append(windows.targets.astype("<f8").tobytes())
    parts.append(np.ascontiguousarray(windows.inputs, dtype="<f8").tobytes())
    write_bytes(path, b"".join(parts))


def read_window_cache(path) -> WindowSet:
    with open(path, "rb") as fh:
        buf = memoryview(fh.read())
    if bytes(buf[:4]) != _CACHE_MAGIC:
        raise ValueError(f"{path} is not a window cache (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != _CACHE_VERSION:
        raise ValueError(f"unsupported window cache version {version}")
    lookback, n_features, _ = struct.unpack_from("<III", buf, 8)
    (count,) = struct.unpack_from("<Q", buf, 20)
    off = 28
    ticker, off = _unpack_str(buf, off)
    target_name, off = _unpack_str(buf, off)
    features = []
    for _ in range(n_features):
        name, off = _unpack_str(buf, off)
        features.append(name)

    dates = np.frombuffer(buf, dtype="<i8", count=count, offset=off)
    off += 8 * count
    splits = np.frombuffer(buf, dtype=np.uint8, count=count, offset=off)
    off += count
    crosses = np.frombuffer(buf, dtype=np.uint8, count=count, offset=off)
    off += count
    targets = np.frombuffer(buf, dtype="<f8", count=count, offset=off)
    off += 8 * count
    inputs = np.frombuffer(buf, dtype="<f8", count=count * lookback * n_features, offset=off)

    return WindowSet(
        lookback=lookback,
        features=tuple(features),
        target_name=target_name,
        ticker=ticker,
        inputs=inputs.reshape(count, lookback, n_features).copy(),
        targets=targets.copy(),
        target_dates=tuple(dt.date.fromordinal(int(o)) for o in dates),
        splits=tuple(_SPLIT_NAME[int(c)] for c in splits),
        crosses_boundary=crosses.astype(bool),
    )
