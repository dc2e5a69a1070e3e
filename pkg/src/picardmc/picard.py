"""Picard recursion driven by a shared noise path, plus noise inversion.

The recursion is the left-point Euler form of the fixed-point map: each
iterate integrates drift and diffusion evaluated along the previous
iterate against the same Brownian increments.  Because the map is causal,
the driving noise is exactly recoverable on the grid from a message path
and an iterate of known order by a forward recursion that rebuilds the
lower iterates knot by knot; that inversion is what lets the density
module evaluate iterate laws at arbitrary paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .engine import RngStream, sample_brownian_batch
from .model import DiffusionFunctional, DriftFunctional, MessageLaw, Path, TimeGrid


class DivergenceError(RuntimeError):
    """A coefficient produced a non-finite value during the recursion."""


@dataclass(frozen=True)
class IterationBundle:
    """Coupled iterates 0..n_max plus a deep reference, all sharing one
    (message, noise) draw."""

    message: Path
    noise: Path
    iterates: tuple[Path, ...]
    reference: Path
    grid: TimeGrid


def _require_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(np.atleast_2d(arr)))
        knot = int(bad[0][-1])
        raise DivergenceError(f"non-finite {what} value at knot {knot}")


def _step_matrix(f, g, times, X, Yprev, dW):
    """One batched Euler application of the recursion."""
    F = f.matrix(times, X, Yprev)
    _require_finite(F, "drift")
    incr = F[:, :-1] * (times[1] - times[0])
    if g.is_identity:
        incr = incr + dW
    else:
        G = g.matrix(times, Yprev)
        _require_finite(G, "diffusion")
        incr = incr + G[:, :-1] * dW
    out = np.empty_like(Yprev)
    out[:, 0] = 0.0
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return out


def picard_step(
    f: DriftFunctional,
    g: DiffusionFunctional,
    x: Path,
    y_prev: Path,
    w: Path,
) -> Path:
    """Next iterate from the previous one under the shared noise."""
    if not (x.grid == y_prev.grid == w.grid):
        raise ValueError("message, state and noise paths must share one grid")
    grid = x.grid
    out = _step_matrix(
        f, g, grid.knots, x.values[None, :], y_prev.values[None, :], np.diff(w.values)[None, :]
    )
    return Path(grid, out[0])


def run_iteration(
    f: DriftFunctional,
    g: DiffusionFunctional,
    law: MessageLaw,
    n_max: int,
    rng: RngStream,
    *,
    ref_extra: int = 10,
) -> IterationBundle:
    """Draw one (message, noise) pair and produce iterates 0..n_max.

    The reference solution is the iterate at n_max + ref_extra under the
    same noise; the factorial decay of successive differences makes the
    remaining tail negligible against Monte Carlo noise at that depth,
    and reusing the noise keeps the coupling exact.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    grid = law.grid
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    x = law.sample(gen)
    w = Path(grid, sample_brownian_batch(grid, gen, 1)[0])
    iterates = [Path.zeros(grid)]
    for _ in range(n_max):
        iterates.append(picard_step(f, g, x, iterates[-1], w))
    ref = iterates[-1]
    for _ in range(ref_extra):
        ref = picard_step(f, g, x, ref, w)
    return IterationBundle(x, w, tuple(iterates), ref, grid)


# ---------------------------------------------------------------------------
# batched internals used by the estimators (identity-diffusion fast paths)
# ---------------------------------------------------------------------------


def final_iterate_batch(
    f: DriftFunctional,
    g: DiffusionFunctional,
    grid: TimeGrid,
    X: np.ndarray,
    W: np.ndarray,
    order: int,
) -> np.ndarray:
    """Iterate ``order`` applications on a batch; returns the final paths."""
    if f.affine is not None and g.is_identity:
        a = f.affine
        return kernels.picard_final(
            np.asarray(X, dtype=float), W, grid.dt, a.c0, a.cx, a.cy, a.trunc_m, order
        )
    times = grid.knots
    dW = np.diff(W, axis=1)
    Y = np.zeros_like(W)
    for _ in range(order):
        Y = _step_matrix(f, g, times, X, Y, dW)
    return Y


def diff_sup_sq_batch(
    f: DriftFunctional,
    g: DiffusionFunctional,
    grid: TimeGrid,
    X: np.ndarray,
    W: np.ndarray,
    n_hi: int,
) -> np.ndarray:
    """(n_hi+1, batch) matrix of sup-norm**2 successive differences."""
    if f.affine is not None and g.is_identity:
        a = f.affine
        return kernels.diff_sup_sq(
            np.asarray(X, dtype=float), W, grid.dt, a.c0, a.cx, a.cy, a.trunc_m, n_hi
        )
    times = grid.knots
    dW = np.diff(W, axis=1)
    prev = np.zeros_like(W)
    out = np.empty((n_hi + 1, W.shape[0]))
    for n in range(n_hi + 1):
        cur = _step_matrix(f, g, times, X, prev, dW)
        out[n] = np.max((cur - prev) ** 2, axis=1)
        prev = cur
    return out


def drift_rows_for_iterate(
    f: DriftFunctional,
    grid: TimeGrid,
    Xin: np.ndarray,
    y_values: np.ndarray,
    order: int,
) -> np.ndarray:
    """Left-point drift values of iterate level order-1 along ``y_values``
    for each message row, rebuilding lower iterates by forward recursion.

    Assumes the identity diffusion (reduce first otherwise).
    """
    if order < 1:
        raise ValueError("iterate order must be >= 1")
    if f.affine is not None:
        a = f.affine
        return kernels.iterate_drift_rows(
            np.asarray(Xin, dtype=float), y_values, grid.dt, a.c0, a.cx, a.cy, a.trunc_m, order
        )
    times = grid.knots
    dt = grid.dt
    J, n1 = np.atleast_2d(Xin).shape
    Xin = np.atleast_2d(Xin)
    steps = n1 - 1
    # Zero-padded level buffers: causality guarantees the untouched tail
    # beyond the current knot cannot influence column i of the evaluation.
    levels = np.zeros((order, J, n1))
    out = np.empty((J, steps))
    dy = np.diff(y_values)
    for i in range(steps):
        cols = np.empty((order, J))
        for k in range(order):
            cols[k] = f.matrix(times, Xin, levels[k])[:, i]
        _require_finite(cols, "drift")
        top = cols[order - 1]
        out[:, i] = top
        dw = dy[i] - top * dt
        for k in range(order - 1, 0, -1):
            levels[k][:, i + 1] = levels[k][:, i] + cols[k - 1] * dt + dw
    return out


def invert_noise(f: DriftFunctional, x: Path, y: Path, n: int) -> Path:
    """Reconstruct the driving noise for which the order-n iterate under
    message ``x`` equals ``y`` (identity diffusion assumed).

    The forward recursion recovers the noise increments knot by knot while
    rebuilding iterates 0..n-1 from the recovered prefix; on the grid this
    realizes the conditional drift of the iterate law exactly, with no
    regression step.
    """
    if n < 1:
        raise ValueError("iterate order must be >= 1")
    if x.grid != y.grid:
        raise ValueError("message and state paths must share one grid")
    if y.values[0] != 0.0:
        raise ValueError("state path must start at zero")
    grid = y.grid
    F = drift_rows_for_iterate(f, grid, x.values[None, :], y.values, n)[0]
    _require_finite(F, "drift")
    w = np.empty(grid.steps + 1)
    w[0] = 0.0
    np.cumsum(np.diff(y.values) - F * grid.dt, out=w[1:])
    return Path(grid, w)
