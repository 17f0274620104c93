"""From-scratch stacked LSTM regressor: forward, BPTT, Adam, training loop.

Architecture: LSTM(layer1_units, returns the full hidden sequence) ->
LSTM(layer2_units, returns only the last hidden state) -> dense(dense_units)
-> dense(1). The first dense layer uses an identity activation by default
(linear readout), switchable to ReLU.

Cell equations are the standard formulation with gates ordered
input, forget, candidate, output (i, f, g, o) along the stacked 4H axis:

    z = W x_t + U h_{t-1} + b
    i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

Everything runs in float64 numpy. The internal forward/backward are batched
over windows; the public single-window ``forward``/``backward`` wrap a batch
of one, so the gradient check validates the same code path training uses.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .atomic import write_bytes
from .errors import (
    DimensionMismatch,
    EmptyBatch,
    EmptyTrainSplit,
    LengthMismatch,
    NonFiniteGradient,
    StaleCache,
)
from .features import TRAIN, VAL, ScalerParams, WindowSet, inverse_transform_column

ACTIVATIONS = ("identity", "relu")

PARAM_ORDER = (
    "lstm1.W",
    "lstm1.U",
    "lstm1.b",
    "lstm2.W",
    "lstm2.U",
    "lstm2.b",
    "dense1.W",
    "dense1.b",
    "dense2.W",
    "dense2.b",
)


@dataclass(frozen=True)
class LstmArchitecture:
    input_dim: int
    layer1_units: int = 100
    layer2_units: int = 100
    dense_units: int = 25
    output_dim: int = 1
    dense_activation: str = "identity"

    def __post_init__(self):
        for name in ("input_dim", "layer1_units", "layer2_units", "dense_units"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.output_dim != 1:
            raise ValueError("output_dim is fixed to 1")
        if self.dense_activation not in ACTIVATIONS:
            raise ValueError(f"dense_activation must be one of {ACTIVATIONS}")

    def param_shapes(self) -> dict:
        f, h1, h2, d = self.input_dim, self.layer1_units, self.layer2_units, self.dense_units
        return {
            "lstm1.W": (4 * h1, f),
            "lstm1.U": (4 * h1, h1),
            "lstm1.b": (4 * h1,),
            "lstm2.W": (4 * h2, h1),
            "lstm2.U": (4 * h2, h2),
            "lstm2.b": (4 * h2,),
            "dense1.W": (d, h2),
            "dense1.b": (d,),
            "dense2.W": (1, d),
            "dense2.b": (1,),
        }


class LstmModel:
    """Trainable parameters plus architecture; mutated in place by adam_step."""

    def __init__(self, arch: LstmArchitecture, params: dict):
        shapes = arch.param_shapes()
        for key, shape in shapes.items():
            if key not in params or params[key].shape != shape:
                raise ValueError(f"parameter {key} missing or misshaped (want {shape})")
            if not np.all(np.isfinite(params[key])):
                raise ValueError(f"parameter {key} contains non-finite values")
        self.arch = arch
        self.params = params
        self.version = 0  # bumped on every update; caches record it

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal_gates(rng, units):
    # One orthogonal H x H block per gate, stacked to (4H, H).
    blocks = []
    for _ in range(4):
        a = rng.standard_normal((units, units))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))
        blocks.append(q)
    return np.vstack(blocks)


def init_model(arch: LstmArchitecture, seed: int) -> LstmModel:
    """Deterministic initialization: Glorot-uniform input/dense weights,
    orthogonal recurrent gate blocks, forget-gate bias 1, other biases 0."""
    rng = np.random.default_rng(seed)
    f, h1, h2, d = arch.input_dim, arch.layer1_units, arch.layer2_units, arch.dense_units
    params = {
        "lstm1.W": _glorot(rng, (4 * h1, f), f, 4 * h1),
        "lstm1.U": _orthogonal_gates(rng, h1),
        "lstm1.b": np.zeros(4 * h1),
        "lstm2.W": _glorot(rng, (4 * h2, h1), h1, 4 * h2),
        "lstm2.U": _orthogonal_gates(rng, h2),
        "lstm2.b": np.zeros(4 * h2),
        "dense1.W": _glorot(rng, (d, h2), h2, d),
        "dense1.b": np.zeros(d),
        "dense2.W": _glorot(rng, (1, d), d, 1),
        "dense2.b": np.zeros(1),
    }
    params["lstm1.b"][h1 : 2 * h1] = 1.0
    params["lstm2.b"][h2 : 2 * h2] = 1.0
    return LstmModel(arch, params)


# --- cell and layer math ----------------------------------------------------


def cell_forward(x, h, c, params):
    """Single LSTM cell step on plain vectors.

    ``params`` is a mapping with "W" (4H, F), "U" (4H, H), "b" (4H,).
    Returns (h_new, c_new, cache) with the intermediates backprop needs.
    """
    W, U, b = params["W"], params["U"], params["b"]
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    hidden = U.shape[1]
    if W.shape[1] != x.shape[-1] or h.shape[-1] != hidden or c.shape[-1] != hidden:
        raise DimensionMismatch(
            f"x has {x.shape[-1]} features, h/c have {h.shape[-1]}/{c.shape[-1]} units; "
            f"params expect {W.shape[1]} features and {hidden} units"
        )
    z = W @ x + U @ h + b
    i = sigmoid(z[:hidden])
    f = sigmoid(z[hidden : 2 * hidden])
    g = np.tanh(z[2 * hidden : 3 * hidden])
    o = sigmoid(z[3 * hidden :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    cache = {"x": x, "h_prev": h, "c_prev": c, "i": i, "f": f, "g": g, "o": o, "c": c_new, "tc": tc}
    return h_new, c_new, cache


def _layer_forward(W, U, b, X):
    """Run one LSTM layer over a batch of sequences. X: (B, L, Fin) -> (B, L, H)."""
    B, L, _ = X.shape
    H = U.shape[1]
    I = np.empty((B, L, H))
    F = np.empty((B, L, H))
    G = np.empty((B, L, H))
    O = np.empty((B, L, H))
    C = np.empty((B, L, H))
    TC = np.empty((B, L, H))
    Cprev = np.empty((B, L, H))
    Hprev = np.empty((B, L, H))
    Hseq = np.empty((B, L, H))

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    Wt, Ut = W.T, U.T
    for t in range(L):
        Hprev[:, t] = h
        Cprev[:, t] = c
        z = X[:, t] @ Wt + h @ Ut + b
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        I[:, t], F[:, t], G[:, t], O[:, t] = i, f, g, o
        C[:, t], TC[:, t], Hseq[:, t] = c, tc, h
    cache = {"X": X, "I": I, "F": F, "G": G, "O": O, "C": C, "TC": TC, "Cprev": Cprev, "Hprev": Hprev}
    return Hseq, cache


def _layer_backward(W, U, cache, dHseq):
    """BPTT through one layer. dHseq: (B, L, H) grads on the layer outputs."""
    X = cache["X"]
    I, F, G, O = cache["I"], cache["F"], cache["G"], cache["O"]
    TC, Cprev, Hprev = cache["TC"], cache["Cprev"], cache["Hprev"]
    B, L, Fin = X.shape
    H = I.shape[2]

    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dX = np.empty((B, L, Fin))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(L - 1, -1, -1):
        i, f, g, o = I[:, t], F[:, t], G[:, t], O[:, t]
        tc = TC[:, t]
        dh = dHseq[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * Cprev[:, t] * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dW += dz.T @ X[:, t]
        dU += dz.T @ Hprev[:, t]
        db += dz.sum(axis=0)
        dX[:, t] = dz @ W
        dh_next = dz @ U
        dc_next = dc * f
    return dX, dW, dU, db


# --- whole-network forward/backward -----------------------------------------


def _check_batch(model: LstmModel, X):
    if X.ndim != 3:
        raise DimensionMismatch(f"expected (batch, L, F) inputs, got shape {X.shape}")
    if X.shape[2] != model.arch.input_dim:
        raise DimensionMismatch(f"window has {X.shape[2]} features, model expects {model.arch.input_dim}")
    if X.shape[1] < 1:
        raise DimensionMismatch("window must have at least one timestep")


def forward_batch(model: LstmModel, X, need_cache: bool = True):
    """Predict a batch of windows. X: (B, L, F) -> preds (B,) [, cache]."""
    X = np.asarray(X, dtype=np.float64)
    _check_batch(model, X)
    p = model.params
    H1seq, cache1 = _layer_forward(p["lstm1.W"], p["lstm1.U"], p["lstm1.b"], X)
    H2seq, cache2 = _layer_forward(p["lstm2.W"], p["lstm2.U"], p["lstm2.b"], H1seq)
    h2 = H2seq[:, -1]  # layer 2 returns only the last step
    a1 = h2 @ p["dense1.W"].T + p["dense1.b"]
    z1 = np.maximum(a1, 0.0) if model.arch.dense_activation == "relu" else a1
    out = z1 @ p["dense2.W"].T + p["dense2.b"]
    preds = out[:, 0]
    if not need_cache:
        return preds
    cache = {
        "version": model.version,
        "model_id": id(model),
        "layer1": cache1,
        "layer2": cache2,
        "h2": h2,
        "a1": a1,
        "z1": z1,
        "L": X.shape[1],
    }
    return preds, cache


def backward_batch(model: LstmModel, cache, d_preds):
    """Gradients of sum_b d_preds[b] * prediction_b w.r.t. every parameter."""
    if cache.get("model_id") != id(model) or cache.get("version") != model.version:
        raise StaleCache("cache was produced by a different model state")
    p = model.params
    d_preds = np.asarray(d_preds, dtype=np.float64)
    dout = d_preds[:, None]

    z1, a1, h2 = cache["z1"], cache["a1"], cache["h2"]
    grads = {
        "dense2.W": dout.T @ z1,
        "dense2.b": dout.sum(axis=0),
    }
    dz1 = dout @ p["dense2.W"]
    da1 = dz1 * (a1 > 0.0) if model.arch.dense_activation == "relu" else dz1
    grads["dense1.W"] = da1.T @ h2
    grads["dense1.b"] = da1.sum(axis=0)
    dh2 = da1 @ p["dense1.W"]

    B = dh2.shape[0]
    H2 = model.arch.layer2_units
    dH2seq = np.zeros((B, cache["L"], H2))
    dH2seq[:, -1] = dh2
    dH1seq, dW2, dU2, db2 = _layer_backward(p["lstm2.W"], p["lstm2.U"], cache["layer2"], dH2seq)
    grads["lstm2.W"], grads["lstm2.U"], grads["lstm2.b"] = dW2, dU2, db2
    _, dW1, dU1, db1 = _layer_backward(p["lstm1.W"], p["lstm1.U"], cache["layer1"], dH1seq)
    grads["lstm1.W"], grads["lstm1.U"], grads["lstm1.b"] = dW1, dU1, db1
    return grads


def forward(model: LstmModel, window):
    """Predict one (L, F) window; returns (scalar prediction, cache)."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise DimensionMismatch(f"expected an (L, F) window, got shape {window.shape}")
    preds, cache = forward_batch(model, window[None])
    return float(preds[0]), cache


def backward(model: LstmModel, cache, d_loss: float) -> dict:
    """Gradients of d_loss * prediction for a single-window cache."""
    return backward_batch(model, cache, np.array([float(d_loss)]))


def mse_loss(pred, target):
    """Mean squared error and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise LengthMismatch(f"{pred.shape[0]} predictions vs {target.shape[0]} targets")
    if pred.size == 0:
        raise EmptyBatch("MSE over zero elements is undefined")
    diff = pred - target
    loss = float(diff @ diff) / pred.size
    return loss, 2.0 * diff / pred.size


# --- optimization ------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    patience: int = 10
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs >= 0, batch_size >= 1, patience >= 1 required")


class AdamState:
    def __init__(self, model: LstmModel):
        self.m = {k: np.zeros_like(v) for k, v in model.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in model.params.items()}
        self.step = 0


def adam_step(model: LstmModel, grads: dict, state: AdamState, cfg: TrainConfig):
    """One Adam update with bias correction; mutates model and state in place."""
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"gradient block {key} is not finite")
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for key, g in grads.items():
        m = state.m[key]
        v = state.v[key]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        model.params[key] -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    model.version += 1
    return model, state


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float | None


def dataset_mse(model: LstmModel, inputs, targets, batch_size: int = 256) -> float:
    """MSE of the model over a window block, streamed in inference batches."""
    total = 0.0
    n = len(targets)
    for start in range(0, n, batch_size):
        preds = forward_batch(model, inputs[start : start + batch_size], need_cache=False)
        diff = preds - targets[start : start + batch_size]
        total += float(diff @ diff)
    return total / n


def train(model: LstmModel, windows: WindowSet, cfg: TrainConfig):
    """Mini-batch Adam training with per-epoch train/val tracking.

    Shuffling is driven by cfg.seed, so identical (model, windows, config)
    runs produce identical trajectories. When a validation split exists the
    returned model carries the parameters of the best-validation epoch and
    training stops early after ``patience`` epochs without improvement;
    without one, early stopping is disabled and the final parameters win.
    """
    train_idx = windows.indices(TRAIN)
    if train_idx.size == 0:
        raise EmptyTrainSplit("no train-tagged windows")
    val_idx = windows.indices(VAL)

    history: list[EpochStats] = []
    if cfg.epochs == 0:
        return model, history

    X_train = windows.inputs[train_idx]
    y_train = windows.targets[train_idx]
    X_val = windows.inputs[val_idx] if val_idx.size else None
    y_val = windows.targets[val_idx] if val_idx.size else None

    rng = np.random.default_rng(cfg.seed)
    state = AdamState(model)
    best_val = np.inf
    best_params = None
    stall = 0

    n = len(train_idx)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            sel = order[start : start + cfg.batch_size]
            preds, cache = forward_batch(model, X_train[sel])
            _, d_preds = mse_loss(preds, y_train[sel])
            grads = backward_batch(model, cache, d_preds)
            adam_step(model, grads, state, cfg)

        train_mse = dataset_mse(model, X_train, y_train)
        val_mse = dataset_mse(model, X_val, y_val) if X_val is not None else None
        history.append(EpochStats(epoch=epoch, train_mse=train_mse, val_mse=val_mse))

        if val_mse is not None:
            if val_mse < best_val:
                best_val = val_mse
                best_params = model.copy_params()
                stall = 0
            else:
                stall += 1
                if stall >= cfg.patience:
                    break

    if best_params is not None:
        model.params = best_params
        model.version += 1
    return model, history


def predict_series(model: LstmModel, windows: WindowSet, scaler: ScalerParams):
    """Per-window predictions mapped back to price units via the target channel."""
    if windows.target_name not in scaler.features:
        raise ValueError(f"scaler has no channel for target {windows.target_name!r}")
    preds = forward_batch(model, windows.inputs, need_cache=False) if len(windows) else np.empty(0)
    prices = inverse_transform_column(preds, scaler, windows.target_name)
    return list(zip(windows.target_dates, (float(v) for v in prices)))


# --- persistence --------------------------------------------------------------

_CKPT_MAGIC = b"MMLC"
_CKPT_VERSION = 1
_ACT_CODE = {"identity": 0, "relu": 1}
_ACT_NAME = {v: k for k, v in _ACT_CODE.items()}


def save_checkpoint(model: LstmModel, path) -> None:
    """Versioned header + architecture record + parameter blocks (f64 LE),
    in PARAM_ORDER; see docs/data_formats.md."""
    arch = model.arch
    parts = [
        _CKPT_MAGIC,
        struct.pack("<I", _CKPT_VERSION),
        struct.pack(
            "<IIIII",
            arch.input_dim,
            arch.layer1_units,
            arch.layer2_units,
            arch.dense_units,
            arch.output_dim,
        ),
        struct.pack("<B", _ACT_CODE[arch.dense_activation]),
    ]
    for key in PARAM_ORDER:
        parts.append(np.ascontiguousarray(model.params[key], dtype="<f8").tobytes())
    write_bytes(path, b"".join(parts))


def load_checkpoint(path) -> LstmModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != _CKPT_MAGIC:
        raise ValueError(f"{path} is not a model checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    input_dim, h1, h2, d, out_dim = struct.unpack_from("<IIIII", buf, 8)
    (act,) = struct.unpack_from("<B", buf, 28)
    arch = LstmArchitecture(
        input_dim=input_dim,
        layer1_units=h1,
        layer2_units=h2,
        dense_units=d,
        output_dim=out_dim,
        dense_activation=_ACT_NAME[act],
    )
    off = 29
    shapes = arch.param_shapes()
    params = {}
    for key in PARAM_ORDER:
        shape = shapes[key]
        count = int(np.prod(shape))
        params[key] = np.frombuffer(buf, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
    return LstmModel(arch, params)


def history_to_csv(history) -> str:
    lines = ["epoch,train_mse,val_mse"]
    for h in history:
        val = repr(h.val_mse) if h.val_mse is not None else ""
        lines.append(f"{h.epoch},{h.train_mse!r},{val}")
    return "\n".join(lines) + "\n"
