"""ARIMA(p, d, q) baseline fit by conditional least squares.

Differencing handles the "I"; the AR/MA coefficients minimize the
conditional sum of squared one-step innovations (CSS), with pre-sample
residuals fixed at zero. The pure-AR case is solved in closed form by least
squares on lagged regressors; q > 0 starts from that solution and refines
all coefficients by coordinate descent with a golden-section line search
(derivative-free and deterministic).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import MissingAnchors, NonConvergence, SeriesTooShort, WindowTooLarge

MAX_SWEEPS = 500
REL_TOL = 1e-8
FAIL_TOL = 1e-6  # cap hit with relative change above this raises
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ArimaSpec:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("orders must be nonnegative")
        if self.p + self.q < 1 and self.d < 1:
            raise ValueError("degenerate model: need p + q >= 1 or d >= 1")


@dataclass(frozen=True)
class ArimaFit:
    spec: ArimaSpec
    intercept: float
    phi: np.ndarray  # (p,)
    theta: np.ndarray  # (q,)
    resid_variance: float
    tail_values: np.ndarray  # last p differenced observations
    tail_residuals: np.ndarray  # last q innovations
    anchors: np.ndarray  # last d observed levels
    n_obs: int
    iterations: int
    converged: bool


def difference(series, d: int) -> np.ndarray:
    """Apply first differences d times; output length n - d."""
    x = np.asarray(series, dtype=np.float64)
    if x.size <= d:
        raise SeriesTooShort(f"need more than d={d} points, got {x.size}")
    return np.diff(x, n=d) if d > 0 else x.copy()


def undifference(deltas, anchors, d: int) -> np.ndarray:
    """Invert d rounds of differencing for values following the anchor block.

    ``anchors`` supplies the d observed levels immediately before the first
    delta. undifference(difference(x, d), x[:d], d) == x[d:] exactly.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if d == 0:
        return deltas.copy()
    anchors = np.asarray(anchors, dtype=np.float64)
    if anchors.size < d:
        raise MissingAnchors(f"need the last {d} levels, got {anchors.size}")
    anchors = anchors[-d:]
    # Work in exact dyadic rationals (floats are binary fractions, and we
    # only ever add), so the nested integrations round exactly once at the
    # end; horizons are short, so the Fraction overhead is negligible.
    levels = [[Fraction(v) for v in np.diff(anchors, n=order)] for order in range(d)]
    out = [Fraction(v) for v in deltas]
    # Lift one differencing order at a time, innermost first. The last value
    # of diff(anchors, k) is the most recent observation at order k.
    for order in range(d - 1, -1, -1):
        total = levels[order][-1]
        lifted = []
        for v in out:
            total += v
            lifted.append(total)
        out = lifted
    return np.array([float(v) for v in out])


def _css_residuals(w, c, phi, theta):
    """One-step innovations, conditioning on the first p observations.

    e[t] = 0 for t < p; for t >= p:
        e[t] = w[t] - c - sum_i phi_i w[t-i] - sum_j theta_j e[t-j]
    """
    p, q = len(phi), len(theta)
    n = len(w)
    e = np.zeros(n)
    # AR part vectorizes; u[t] = w[t] - c - sum_i phi_i w[t-i]
    u = w[p:] - c
    for i in range(1, p + 1):
        u = u - phi[i - 1] * w[p - i : n - i]
    if q == 0:
        e[p:] = u
        return e
    # the MA recursion is inherently sequential; keep the loop scalar-cheap
    coeffs = tuple(float(v) for v in theta)
    hist = [0.0] * q  # hist[j-1] = e[t-j], zeros before the first usable index
    out = e[p:]
    for t in range(n - p):
        acc = u[t]
        for j in range(q):
            acc -= coeffs[j] * hist[j]
        out[t] = acc
        if q > 1:
            hist[1:] = hist[:-1]
        hist[0] = acc
    return e


def _css(w, params, p, q) -> float:
    c, phi, theta = params[0], params[1 : 1 + p], params[1 + p :]
    with np.errstate(over="ignore", invalid="ignore"):
        e = _css_residuals(w, c, phi, theta)
        tail = e[p:]
        value = float(tail @ tail)
    # explosive theta trials overflow; rank them strictly worst
    return value if np.isfinite(value) else np.inf


def _ar_least_squares(w, p):
    """Closed-form CSS solution for ARMA(p, 0): OLS on lagged regressors."""
    n = len(w)
    y = w[p:]
    cols = [np.ones(n - p)]
    for i in range(1, p + 1):
        cols.append(w[p - i : n - i])
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef[0], coef[1:]


def _golden_section(f, a, b, tol=1e-10):
    """Minimize unimodal f on [a, b]; returns the argmin."""
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    return (a + b) / 2.0


def _line_min(f, x0, f0, step=0.1):
    """Bracket a minimum along one coordinate starting at x0, then refine."""
    # expand downhill until the objective turns
    fp = f(x0 + step)
    fm = f(x0 - step)
    if f0 <= fp and f0 <= fm:
        a, b = x0 - step, x0 + step
    else:
        direction = 1.0 if fp < fm else -1.0
        prev_x = x0
        x, fx = x0 + direction * step, min(fp, fm)
        width = step
        for _ in range(200):  # CSS grows with |coef|, so this always turns
            width *= 2.0
            nxt = x + direction * width
            fn = f(nxt)
            if fn >= fx:
                break
            prev_x = x
            x, fx = nxt, fn
        a, b = min(prev_x, nxt), max(prev_x, nxt)
    xmin = _golden_section(f, a, b)
    fmin = f(xmin)
    if fmin < f0:
        return xmin, fmin
    return x0, f0  # only accept improvements: objective never increases


def fit(series, spec: ArimaSpec) -> ArimaFit:
    """Estimate (c, phi, theta) minimizing the CSS objective."""
    x = np.asarray(series, dtype=np.float64)
    w = difference(x, spec.d)
    p, q = spec.p, spec.q
    if len(w) < 10 * (p + q + 1):
        raise SeriesTooShort(
            f"need >= {10 * (p + q + 1)} points after differencing, got {len(w)}"
        )

    c, phi = _ar_least_squares(w, p)
    params = np.concatenate([[c], phi, np.zeros(q)])
    iterations = 0
    converged = True

    if q > 0:
        objective = _css(w, params, p, q)
        converged = False
        rel_change = np.inf
        for sweep in range(MAX_SWEEPS):
            iterations = sweep + 1
            sweep_start = objective
            for k in range(len(params)):
                def along(v, _k=k):
                    trial = params.copy()
                    trial[_k] = v
                    return _css(w, trial, p, q)

                params[k], objective = _line_min(along, params[k], objective)
            rel_change = abs(sweep_start - objective) / max(abs(sweep_start), 1e-300)
            if rel_change < REL_TOL:
                converged = True
                break
        if not converged and rel_change > FAIL_TOL:
            raise NonConvergence(MAX_SWEEPS, rel_change)

    c = float(params[0])
    phi = params[1 : 1 + p].copy()
    theta = params[1 + p :].copy()
    e = _css_residuals(w, c, phi, theta)
    used = max(len(w) - p, 1)
    resid_variance = float(e[p:] @ e[p:]) / used

    return ArimaFit(
        spec=spec,
        intercept=c,
        phi=phi,
        theta=theta,
        resid_variance=resid_variance,
        tail_values=w[len(w) - p :].copy() if p else np.empty(0),
        tail_residuals=e[len(e) - q :].copy() if q else np.empty(0),
        anchors=x[len(x) - spec.d :].copy() if spec.d else np.empty(0),
        n_obs=len(x),
        iterations=iterations,
        converged=converged,
    )


def forecast(fit_result: ArimaFit, steps: int) -> np.ndarray:
    """Iterated conditional-expectation forecasts (future innovations 0),
    computed on the differenced scale and then undifferenced to levels."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    spec = fit_result.spec
    w_hist = list(fit_result.tail_values)
    e_hist = list(fit_result.tail_residuals)
    preds = []
    for _ in range(steps):
        value = fit_result.intercept
        for i in range(1, spec.p + 1):
            value += fit_result.phi[i - 1] * w_hist[-i]
        for j in range(1, spec.q + 1):
            value += fit_result.theta[j - 1] * e_hist[-j]
        preds.append(value)
        w_hist.append(value)
        e_hist.append(0.0)
    return undifference(np.asarray(preds), fit_result.anchors, spec.d)


def rolling_stats(series, window: int):
    """Rolling means and population standard deviations (n - window + 1 each)."""
    x = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if window > x.size:
        raise WindowTooLarge(f"window {window} exceeds series length {x.size}")
    view = np.lib.stride_tricks.sliding_window_view(x, window)
    return view.mean(axis=1), view.std(axis=1)


def fit_to_dict(fit_result: ArimaFit) -> dict:
    return {
        "spec": {"p": fit_result.spec.p, "d": fit_result.spec.d, "q": fit_result.spec.q},
        "intercept": fit_result.intercept,
        "phi": [float(v) for v in fit_result.phi],
        "theta": [float(v) for v in fit_result.theta],
        "resid_variance": fit_result.resid_variance,
        "tail_values": [float(v) for v in fit_result.tail_values],
        "tail_residuals": [float(v) for v in fit_result.tail_residuals],
        "anchors": [float(v) for v in fit_result.anchors],
        "n_obs": fit_result.n_obs,
        "iterations": fit_result.iterations,
        "converged": fit_result.converged,
    }


def fit_from_dict(data: dict) -> ArimaFit:
    spec = ArimaSpec(**data["spec"])
    return ArimaFit(
        spec=spec,
        intercept=float(data["intercept"]),
        phi=np.asarray(data["phi"], dtype=np.float64),
        theta=np.asarray(data["theta"], dtype=np.float64),
        resid_variance=float(data["resid_variance"]),
        tail_values=np.asarray(data["tail_values"], dtype=np.float64),
        tail_residuals=np.asarray(data["tail_residuals"], dtype=np.float64),
        anchors=np.asarray(data["anchors"], dtype=np.float64),
        n_obs=int(data["n_obs"]),
        iterations=int(data["iterations"]),
        converged=bool(data["converged"]),
    )


def fit_summary_json(fit_result: ArimaFit) -> str:
    return json.dumps(fit_to_dict(fit_result), indent=2, sort_keys=True)
