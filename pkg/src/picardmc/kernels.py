"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

All kernels work on the affine drift family c0 + cx*x(t) + cy*y(t), with
an optional truncation gate that zeroes the drift once the left-point
running integral of its raw square exceeds ``m`` (pass ``inf`` to disable).
Drifts outside this family take the generic paths in ``picard``/``density``.

Backend selection: the PICARDMC_BACKEND environment variable ("numba" or
"numpy") or :func:`set_backend`; numba is the default when importable.
The two implementations are kept semantically identical and are compared
in the test suite and in benchmarks/bench_backends.py.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _gate_np(raw, dt, m):
    csq = np.cumsum(raw * raw, axis=1) * dt
    run = np.empty_like(csq)
    run[:, 0] = 0.0
    run[:, 1:] = csq[:, :-1]
    return np.where(run <= m, raw, 0.0)


def _picard_final_np(X, W, dt, c0, cx, cy, m, order):
    B, n1 = X.shape
    dW = np.diff(W, axis=1)
    y = np.zeros((B, n1))
    for _ in range(order):
        F = c0 + cx * X + cy * y
        if np.isfinite(m):
            F = _gate_np(F, dt, m)
        nxt = np.empty_like(y)
        nxt[:, 0] = 0.0
        np.cumsum(F[:, :-1] * dt + dW, axis=1, out=nxt[:, 1:])
        y = nxt
    return y


def _diff_sup_sq_np(X, W, dt, c0, cx, cy, m, n_hi):
    B, n1 = X.shape
    dW = np.diff(W, axis=1)
    prev = np.zeros((B, n1))
    out = np.empty((n_hi + 1, B))
    for n in range(n_hi + 1):
        F = c0 + cx * X + cy * prev
        if np.isfinite(m):
            F = _gate_np(F, dt, m)
        cur = np.empty_like(prev)
        cur[:, 0] = 0.0
        np.cumsum(F[:, :-1] * dt + dW, axis=1, out=cur[:, 1:])
        out[n] = np.max((cur - prev) ** 2, axis=1)
        prev = cur
    return out


def _fixed_logdens_rows_np(Xin, y, dt, c0, cx, cy, m):
    F = c0 + cx * Xin + cy * y[None, :]
    if np.isfinite(m):
        F = _gate_np(F, dt, m)
    left = F[:, :-1]
    dy = np.diff(y)
    return left @ dy - 0.5 * np.sum(left * left, axis=1) * dt


def _iterate_logdens_rows_np(Xin, y, dt, c0, cx, cy, m, order):
    J, n1 = Xin.shape
    steps = n1 - 1
    ylev = np.zeros((order, J))  # ylev[k] holds iterate k at the current knot; row 0 stays 0
    acc = np.zeros((order, J))
    out = np.zeros(J)
    dy = np.diff(y)
    for i in range(steps):
        raw = c0 + cx * Xin[:, i][None, :] + cy * ylev
        gated = np.where(acc <= m, raw, 0.0)
        acc += raw * raw * dt
        top = gated[order - 1]
        out += top * dy[i] - 0.5 * top * top * dt
        dw = dy[i] - top * dt
        if order > 1:
            ylev[1:] += gated[:-1] * dt + dw[None, :]
    return out


def _own_logdens_rows_np(X, Y, dt, c0, cx, cy, m, order):
    B, n1 = X.shape
    steps = n1 - 1
    ylev = np.zeros((order, B))
    acc = np.zeros((order, B))
    out = np.zeros(B)
    dY = np.diff(Y, axis=1)
    for i in range(steps):
        raw = c0 + cx * X[:, i][None, :] + cy * ylev
        gated = np.where(acc <= m, raw, 0.0)
        acc += raw * raw * dt
        top = gated[order - 1]
        out += top * dY[:, i] - 0.5 * top * top * dt
        dw = dY[:, i] - top * dt
        if order > 1:
            ylev[1:] += gated[:-1] * dt + dw[None, :]
    return out


def _iterate_drift_rows_np(Xin, y, dt, c0, cx, cy, m, order):
    """Gated drift of iterate level order-1 along the prefixes rebuilt from
    (message row, y); returns the (J, steps) left-point value matrix."""
    J, n1 = Xin.shape
    steps = n1 - 1
    ylev = np.zeros((order, J))
    acc = np.zeros((order, J))
    out = np.empty((J, steps))
    dy = np.diff(y)
    for i in range(steps):
        raw = c0 + cx * Xin[:, i][None, :] + cy * ylev
        gated = np.where(acc <= m, raw, 0.0)
        acc += raw * raw * dt
        top = gated[order - 1]
        out[:, i] = top
        dw = dy[i] - top * dt
        if order > 1:
            ylev[1:] += gated[:-1] * dt + dw[None, :]
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _picard_final_nb(X, W, dt, c0, cx, cy, m, order):
    B, n1 = X.shape
    steps = n1 - 1
    out = np.empty((B, n1))
    y = np.empty(n1)
    nxt = np.empty(n1)
    for b in range(B):
        for i in range(n1):
            y[i] = 0.0
        for _ in range(order):
            acc = 0.0
            nxt[0] = 0.0
            for i in range(steps):
                raw = c0 + cx * X[b, i] + cy * y[i]
                fv = raw if acc <= m else 0.0
                acc += raw * raw * dt
                nxt[i + 1] = nxt[i] + fv * dt + (W[b, i + 1] - W[b, i])
            for i in range(n1):
                y[i] = nxt[i]
        for i in range(n1):
            out[b, i] = y[i]
    return out


@njit(cache=True, nogil=True)
def _diff_sup_sq_nb(X, W, dt, c0, cx, cy, m, n_hi):
    B, n1 = X.shape
    steps = n1 - 1
    out = np.empty((n_hi + 1, B))
    prev = np.empty(n1)
    cur = np.empty(n1)
    for b in range(B):
        for i in range(n1):
            prev[i] = 0.0
        for n in range(n_hi + 1):
            acc = 0.0
            cur[0] = 0.0
            sup = 0.0
            for i in range(steps):
                raw = c0 + cx * X[b, i] + cy * prev[i]
                fv = raw if acc <= m else 0.0
                acc += raw * raw * dt
                cur[i + 1] = cur[i] + fv * dt + (W[b, i + 1] - W[b, i])
                d = (cur[i + 1] - prev[i + 1]) ** 2
                if d > sup:
                    sup = d
            out[n, b] = sup
            for i in range(n1):
                prev[i] = cur[i]
    return out


@njit(cache=True, nogil=True)
def _fixed_logdens_rows_nb(Xin, y, dt, c0, cx, cy, m):
    J, n1 = Xin.shape
    steps = n1 - 1
    out = np.empty(J)
    for j in range(J):
        acc = 0.0
        s = 0.0
        for i in range(steps):
            raw = c0 + cx * Xin[j, i] + cy * y[i]
            fv = raw if acc <= m else 0.0
            acc += raw * raw * dt
            s += fv * (y[i + 1] - y[i]) - 0.5 * fv * fv * dt
        out[j] = s
    return out


@njit(cache=True, nogil=True)
def _iterate_logdens_rows_nb(Xin, y, dt, c0, cx, cy, m, order):
    J, n1 = Xin.shape
    steps = n1 - 1
    out = np.empty(J)
    ylev = np.empty(order)
    acc = np.empty(order)
    gated = np.empty(order)
    for j in range(J):
        for k in range(order):
            ylev[k] = 0.0
            acc[k] = 0.0
        s = 0.0
        for i in range(steps):
            dy = y[i + 1] - y[i]
            for k in range(order):
                raw = c0 + cx * Xin[j, i] + cy * ylev[k]
                gated[k] = raw if acc[k] <= m else 0.0
                acc[k] += raw * raw * dt
            top = gated[order - 1]
            s += top * dy - 0.5 * top * top * dt
            dw = dy - top * dt
            for k in range(order - 1, 0, -1):
                ylev[k] = ylev[k] + gated[k - 1] * dt + dw
        out[j] = s
    return out


@njit(cache=True, nogil=True)
def _own_logdens_rows_nb(X, Y, dt, c0, cx, cy, m, order):
    B, n1 = X.shape
    steps = n1 - 1
    out = np.empty(B)
    ylev = np.empty(order)
    acc = np.empty(order)
    gated = np.empty(order)
    for b in range(B):
        for k in range(order):
            ylev[k] = 0.0
            acc[k] = 0.0
        s = 0.0
        for i in range(steps):
            dy = Y[b, i + 1] - Y[b, i]
            for k in range(order):
                raw = c0 + cx * X[b, i] + cy * ylev[k]
                gated[k] = raw if acc[k] <= m else 0.0
                acc[k] += raw * raw * dt
            top = gated[order - 1]
            s += top * dy - 0.5 * top * top * dt
            dw = dy - top * dt
            for k in range(order - 1, 0, -1):
                ylev[k] = ylev[k] + gated[k - 1] * dt + dw
        out[b] = s
    return out


# ---------------------------------------------------------------------------
# backend registry
# ---------------------------------------------------------------------------

_IMPL = {
    "numpy": {
        "picard_final": _picard_final_np,
        "diff_sup_sq": _diff_sup_sq_np,
        "fixed_logdens_rows": _fixed_logdens_rows_np,
        "iterate_logdens_rows": _iterate_logdens_rows_np,
        "own_logdens_rows": _own_logdens_rows_np,
    }
}
if HAVE_NUMBA:
    _IMPL["numba"] = {
        "picard_final": _picard_final_nb,
        "diff_sup_sq": _diff_sup_sq_nb,
        "fixed_logdens_rows": _fixed_logdens_rows_nb,
        "iterate_logdens_rows": _iterate_logdens_rows_nb,
        "own_logdens_rows": _own_logdens_rows_nb,
    }

_active = os.environ.get("PICARDMC_BACKEND", "numba" if HAVE_NUMBA else "numpy")
if _active not in _IMPL:
    raise RuntimeError(
        f"PICARDMC_BACKEND={_active!r} unavailable; choices: {sorted(_IMPL)}"
    )


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPL))


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _IMPL:
        raise ValueError(f"unknown backend {name!r}; choices: {sorted(_IMPL)}")
    _active = name


def picard_final(X, W, dt, c0, cx, cy, m, order):
    """Iterate ``order`` times from the zero path; returns the final iterate."""
    return _IMPL[_active]["picard_final"](X, W, dt, c0, cx, cy, m, order)


def diff_sup_sq(X, W, dt, c0, cx, cy, m, n_hi):
    """sup-norm**2 of successive iterate differences, orders 0..n_hi."""
    return _IMPL[_active]["diff_sup_sq"](X, W, dt, c0, cx, cy, m, n_hi)


def fixed_logdens_rows(Xin, y, dt, c0, cx, cy, m):
    """Girsanov exponent of the limit law along y, one row per message."""
    return _IMPL[_active]["fixed_logdens_rows"](Xin, y, dt, c0, cx, cy, m)


def iterate_logdens_rows(Xin, y, dt, c0, cx, cy, m, order):
    """Iterate-law Girsanov exponent along y via per-row noise inversion."""
    return _IMPL[_active]["iterate_logdens_rows"](Xin, y, dt, c0, cx, cy, m, order)


def own_logdens_rows(X, Y, dt, c0, cx, cy, m, order):
    """Iterate-law exponent of each row's own (message, path) pair."""
    return _IMPL[_active]["own_logdens_rows"](X, Y, dt, c0, cx, cy, m, order)


def iterate_drift_rows(Xin, y, dt, c0, cx, cy, m, order):
    """Left-point drift matrix of iterate level order-1 along y (numpy only;
    cold path used for noise reconstruction)."""
    return _iterate_drift_rows_np(Xin, y, dt, c0, cx, cy, m, order)
