"""Log Radon-Nikodym derivatives along paths.

All densities here are against Wiener measure in the unit-diffusion
regime (fold a general diffusion into the drift first).  The fixed-message
exponent is the left-point Girsanov sum along the evaluated path itself,
which makes it the exact likelihood ratio of the Euler chain at any step
size.  Iterate laws are evaluated by inverting the path back to its
driving noise and reading the drift along the rebuilt previous iterate;
marginal (mixture) laws average fixed-message densities over fresh
message draws in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import kernels, picard
from .engine import RngStream
from .model import DriftFunctional, MessageLaw, Path, TimeGrid

#: Sentinel order selecting the limit law instead of a finite iterate.
LIMIT = "limit"

WIENER = "mu_W"


class DensityError(RuntimeError):
    """Density evaluation produced a non-finite exponent."""


class DegenerateMixtureError(DensityError):
    """Every inner exponent of a mixture was -inf."""


@dataclass(frozen=True)
class LogDensity:
    """Value of a log density together with the measures it relates."""

    value: float
    numerator: str
    denominator: str
    path_id: str = ""
    inner_count: int = 0

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DensityError(
                f"non-finite log density {self.value} for {self.numerator} vs "
                f"{self.denominator} (path {self.path_id or 'anon'})"
            )


def _order_ok(order):
    if order == LIMIT:
        return
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError(f"order must be a positive integer or LIMIT, got {order!r}")


def _check_rows(rows, what, path_id):
    rows = np.asarray(rows, dtype=float)
    if np.any(np.isnan(rows)) or np.any(np.isposinf(rows)):
        raise DensityError(f"non-finite {what} exponent (path {path_id or 'anon'})")
    return rows


def logmeanexp(values: np.ndarray) -> float:
    """Stabilized log of the arithmetic mean of exp(values)."""
    values = np.asarray(values, dtype=float)
    if np.all(np.isneginf(values)):
        raise DegenerateMixtureError("all inner exponents are -inf")
    return float(logsumexp(values) - math.log(values.size))


# ---------------------------------------------------------------------------
# row evaluators shared with the estimators
# ---------------------------------------------------------------------------


def fixed_rows(
    f: DriftFunctional, grid: TimeGrid, Xin: np.ndarray, y_values: np.ndarray
) -> np.ndarray:
    """Limit-law exponents along ``y_values``, one row per message."""
    if f.affine is not None:
        a = f.affine
        return kernels.fixed_logdens_rows(
            np.asarray(Xin, dtype=float), y_values, grid.dt, a.c0, a.cx, a.cy, a.trunc_m
        )
    Xin = np.atleast_2d(Xin)
    Yb = np.broadcast_to(y_values, Xin.shape)
    F = f.matrix(grid.knots, Xin, Yb)[:, :-1]
    dy = np.diff(y_values)
    return F @ dy - 0.5 * np.sum(F * F, axis=1) * grid.dt


def iterate_rows(
    f: DriftFunctional, grid: TimeGrid, Xin: np.ndarray, y_values: np.ndarray, order: int
) -> np.ndarray:
    """Order-n iterate-law exponents along ``y_values`` via noise inversion."""
    if f.affine is not None:
        a = f.affine
        return kernels.iterate_logdens_rows(
            np.asarray(Xin, dtype=float),
            y_values,
            grid.dt,
            a.c0,
            a.cx,
            a.cy,
            a.trunc_m,
            order,
        )
    F = picard.drift_rows_for_iterate(f, grid, Xin, y_values, order)
    dy = np.diff(y_values)
    return F @ dy - 0.5 * np.sum(F * F, axis=1) * grid.dt


def own_rows(
    f: DriftFunctional, grid: TimeGrid, X: np.ndarray, Y: np.ndarray, order
) -> np.ndarray:
    """Exponent of each (message, path) pair at its own path."""
    if order == LIMIT:
        F = f.matrix(grid.knots, X, Y)[:, :-1]
        return np.sum(F * np.diff(Y, axis=1), axis=1) - 0.5 * np.sum(F * F, axis=1) * grid.dt
    if f.affine is not None:
        a = f.affine
        return kernels.own_logdens_rows(
            np.asarray(X, dtype=float), Y, grid.dt, a.c0, a.cx, a.cy, a.trunc_m, order
        )
    return np.array(
        [iterate_rows(f, grid, X[b : b + 1], Y[b], order)[0] for b in range(Y.shape[0])]
    )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def _check_paths(x: Path, y: Path):
    if x.grid != y.grid:
        raise ValueError("message and state paths must share one grid")
    if y.values[0] != 0.0:
        raise ValueError("state path must start at zero")


def log_density_fixed_message(f: DriftFunctional, x: Path, y: Path) -> LogDensity:
    """Log density of the fixed-message solution law against Wiener measure,
    evaluated at ``y``: the drift is read along ``y`` itself."""
    _check_paths(x, y)
    rows = _check_rows(
        fixed_rows(f, y.grid, x.values[None, :], y.values), "fixed-message", y.pid
    )
    return LogDensity(float(rows[0]), "mu_{Y^x}", WIENER, y.pid)


def log_density_fixed_message_iterate(
    f: DriftFunctional, x: Path, y: Path, n: int
) -> LogDensity:
    """Log density of the order-n fixed-message iterate law at ``y``.

    The driving noise is reconstructed from (x, y), the previous iterate
    rebuilt from it, and the exponent uses the drift along that rebuilt
    iterate.
    """
    _check_paths(x, y)
    _order_ok(n)
    if n == LIMIT:
        raise ValueError("iterate density needs a finite order")
    rows = _check_rows(
        iterate_rows(f, y.grid, x.values[None, :], y.values, n), "iterate", y.pid
    )
    return LogDensity(float(rows[0]), f"mu_{{Y^x,({n})}}", WIENER, y.pid)


def log_mixture_density(
    f: DriftFunctional,
    y: Path,
    law: MessageLaw,
    n_inner: int,
    order,
    rng: RngStream,
) -> LogDensity:
    """Marginal (message-averaged) log density at ``y``.

    Averages exp of fixed-message exponents over ``n_inner`` fresh message
    draws in log space, stabilized against overflow.  ``order`` selects the
    limit law or a finite iterate law.
    """
    if y.values[0] != 0.0:
        raise ValueError("state path must start at zero")
    if law.grid != y.grid:
        raise ValueError("message law and path must share one grid")
    _order_ok(order)
    if n_inner < 1:
        raise ValueError("n_inner must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    Xin = law.sample_batch(gen, n_inner)
    if order == LIMIT:
        rows = fixed_rows(f, y.grid, Xin, y.values)
        num = "mu_Y"
    else:
        rows = iterate_rows(f, y.grid, Xin, y.values, order)
        num = f"mu_{{Y^({order})}}"
    rows = _check_rows(rows, "mixture", y.pid)
    return LogDensity(logmeanexp(rows), num, WIENER, y.pid, inner_count=n_inner)


def joint_log_density(f: DriftFunctional, x: Path, y: Path, order) -> LogDensity:
    """Log density of the joint (message, output) law against the product
    of the message law with Wiener measure.

    Numerically identical to the fixed-message density; only the measure
    bookkeeping differs.
    """
    _order_ok(order)
    if order == LIMIT:
        inner = log_density_fixed_message(f, x, y)
        num = "mu_{xi,Y}"
    else:
        inner = log_density_fixed_message_iterate(f, x, y, order)
        num = f"mu_{{xi,Y^({order})}}"
    return LogDensity(inner.value, num, "mu_xi*mu_W", y.pid)
