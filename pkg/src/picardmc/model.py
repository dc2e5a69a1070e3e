"""Problem objects: time grid, grid-causal functionals, message laws.

Drift and diffusion coefficients are represented as grid-causal
evaluators: a whole-matrix form ``matrix(times, X, Y)`` whose column ``i``
may only depend on columns ``<= i`` of its path arguments, plus a scalar
per-knot form used by probes and the generic solvers.  Causality is a
caller contract, checked empirically by tail-perturbation probes rather
than enforced symbolically.

Declared Lipschitz / growth / peak-power constants travel with each
functional.  Probes can only falsify a declaration, never certify it: the
underlying conditions quantify over all continuous paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import grammar


class EvaluationError(RuntimeError):
    """A functional produced a non-finite value."""


class RegularityError(ValueError):
    """Diffusion magnitude dropped below the declared invertibility bound."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_N = horizon."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be a positive real, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)


@dataclass(frozen=True)
class Path:
    """A sample path discretized on a grid: one value per knot."""

    grid: TimeGrid
    values: np.ndarray
    pid: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.steps + 1,):
            raise ValueError(
                f"path needs {self.grid.steps + 1} values, got shape {vals.shape}"
            )
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: TimeGrid, pid: str = "") -> "Path":
        return cls(grid, np.zeros(grid.steps + 1), pid)


@dataclass(frozen=True)
class AffineDrift:
    """Fast-kernel form: c0 + cx*x(t) + cy*y(t), optionally gated by a
    running quadrature budget (truncation)."""

    c0: float
    cx: float
    cy: float
    trunc_m: float = math.inf


def _running_gate(raw: np.ndarray, dt: float, budget: float) -> np.ndarray:
    """Zero out values once the left-point running integral of raw**2
    exceeds ``budget``.  The gate at knot i uses the integral over [0, t_i)."""
    csq = np.cumsum(raw * raw, axis=1) * dt
    run = np.empty_like(csq)
    run[:, 0] = 0.0
    run[:, 1:] = csq[:, :-1]
    return np.where(run <= budget, raw, 0.0)


@dataclass(frozen=True)
class DriftFunctional:
    """Grid-causal drift f(t, x, y) with declared condition constants.

    ``matrix_fn(times, X, Y)`` maps (steps+1,) knot times and two
    (batch, steps+1) path matrices to the (batch, steps+1) matrix of drift
    values; column i must only read columns <= i.  ``lipschitz`` and
    ``growth`` are the declared uniform-Lipschitz and linear-growth
    constants; ``peak_power`` is the declared cap on the path integral of
    f**2 when one is claimed.
    """

    matrix_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    lipschitz: float
    growth: float
    peak_power: Optional[float] = None
    affine: Optional[AffineDrift] = None
    label: str = ""
    value_fn: Optional[Callable[[int, np.ndarray, np.ndarray, np.ndarray], float]] = None

    def __post_init__(self):
        for name in ("lipschitz", "growth"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"declared {name} must be a finite positive real, got {v}")
        if self.peak_power is not None and not (
            math.isfinite(self.peak_power) and self.peak_power > 0
        ):
            raise ValueError(f"declared peak_power must be finite positive, got {self.peak_power}")

    def matrix(self, times: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Drift values at every knot for batches of (message, state) paths."""
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        out = np.asarray(self.matrix_fn(times, x, y), dtype=float)
        if out.shape != y.shape and out.shape != x.shape:
            out = np.broadcast_to(out, np.broadcast_shapes(x.shape, y.shape)).copy()
        return out

    def value(self, i: int, times: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
        """Scalar drift at knot i on single paths (reads entries <= i only)."""
        if self.value_fn is not None:
            return float(self.value_fn(i, times, x, y))
        return float(self.matrix(times, x[None, :], y[None, :])[0, i])


@dataclass(frozen=True)
class DiffusionFunctional:
    """Grid-causal diffusion g(t, y); ``inv_bound`` is the declared bound on
    |1/g| when the invertibility condition is claimed."""

    matrix_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz: float
    growth: float
    inv_bound: Optional[float] = None
    is_identity: bool = False
    label: str = ""

    def matrix(self, times: np.ndarray, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        out = np.asarray(self.matrix_fn(times, y), dtype=float)
        if out.shape != y.shape:
            out = np.broadcast_to(out, y.shape).copy()
        return out

    def value(self, i: int, times: np.ndarray, y: np.ndarray) -> float:
        return float(self.matrix(times, y[None, :])[0, i])


def identity_diffusion() -> DiffusionFunctional:
    return DiffusionFunctional(
        matrix_fn=lambda times, y: np.ones_like(y),
        lipschitz=1.0,
        growth=1.0,
        inv_bound=1.0,
        is_identity=True,
        label="1",
    )


def drift_from_affine(
    c0: float,
    cx: float,
    cy: float,
    *,
    lipschitz: float,
    growth: float,
    peak_power: Optional[float] = None,
    label: str = "",
) -> DriftFunctional:
    """Drift c0 + cx*x(t) + cy*y(t) with kernel fast path."""

    def matrix_fn(times, x, y):
        return c0 + cx * x + cy * y

    def value_fn(i, times, x, y):
        return c0 + cx * x[i] + cy * y[i]

    return DriftFunctional(
        matrix_fn=matrix_fn,
        lipschitz=lipschitz,
        growth=growth,
        peak_power=peak_power,
        affine=AffineDrift(c0, cx, cy),
        label=label or f"{c0}+{cx}*x(t)+{cy}*y(t)",
        value_fn=value_fn,
    )


def drift_from_expression(
    text: str,
    *,
    lipschitz: float,
    growth: float,
    peak_power: Optional[float] = None,
    label: str = "",
) -> DriftFunctional:
    """Build a drift from the expression grammar; affine expressions get
    the kernel fast path automatically."""
    expr = grammar.parse(text)
    coeffs = expr.affine()
    if coeffs is not None:
        return drift_from_affine(
            *coeffs,
            lipschitz=lipschitz,
            growth=growth,
            peak_power=peak_power,
            label=label or text,
        )
    return DriftFunctional(
        matrix_fn=expr.matrix,
        lipschitz=lipschitz,
        growth=growth,
        peak_power=peak_power,
        affine=None,
        label=label or text,
        value_fn=lambda i, times, x, y: expr.value_at(i, times, x, y),
    )


def drift_from_callable(
    matrix_fn,
    *,
    lipschitz: float,
    growth: float,
    peak_power: Optional[float] = None,
    label: str = "registered",
    value_fn=None,
) -> DriftFunctional:
    """Register an arbitrary grid-causal drift evaluator from code."""
    return DriftFunctional(
        matrix_fn=matrix_fn,
        lipschitz=lipschitz,
        growth=growth,
        peak_power=peak_power,
        affine=None,
        label=label,
        value_fn=value_fn,
    )


@dataclass(frozen=True)
class MessageLaw:
    """Sampler for the exogenous message process on a shared grid.

    ``second_moment`` is the declared value of E[ sup_t |message(t)|^2 ];
    tests compare it against the empirical sup-norm moment.
    """

    grid: TimeGrid
    label: str
    second_moment: float
    sampler: Callable[[np.random.Generator, int], np.ndarray]

    def sample_batch(self, gen: np.random.Generator, count: int) -> np.ndarray:
        """(count, steps+1) message paths; may be a broadcast view."""
        out = self.sampler(gen, count)
        if out.shape != (count, self.grid.steps + 1):
            raise ValueError(
                f"message sampler returned shape {out.shape}, "
                f"expected {(count, self.grid.steps + 1)}"
            )
        return out

    def sample(self, gen: np.random.Generator) -> Path:
        return Path(self.grid, np.array(self.sample_batch(gen, 1)[0]))


def zero_message(grid: TimeGrid) -> MessageLaw:
    def sampler(gen, count):
        return np.broadcast_to(np.zeros(1), (count, grid.steps + 1))

    return MessageLaw(grid, "zero", 0.0, sampler)


def constant_gaussian_message(grid: TimeGrid, scale: float = 1.0) -> MessageLaw:
    """Message frozen in time at a centered Gaussian level; the sup norm is
    |level|, so the declared second moment is scale**2 exactly."""

    def sampler(gen, count):
        levels = scale * gen.standard_normal(count)
        return np.broadcast_to(levels[:, None], (count, grid.steps + 1))

    return MessageLaw(grid, f"constant_gaussian({scale})", scale * scale, sampler)


def cosine_gaussian_message(grid: TimeGrid, scale: float = 1.0) -> MessageLaw:
    """Gaussian amplitude riding a half-period cosine; time-varying but with
    sup norm |amplitude|, keeping the declared moment exact."""
    profile = np.cos(np.pi * grid.knots / grid.horizon)

    def sampler(gen, count):
        amps = scale * gen.standard_normal(count)
        return amps[:, None] * profile[None, :]

    return MessageLaw(grid, f"cosine_gaussian({scale})", scale * scale, sampler)


@dataclass(frozen=True)
class ConditionReport:
    """Empirical condition-constant estimates against declarations."""

    lipschitz_hat: float
    growth_hat: float
    peak_power_hat: Optional[float]
    declared_lipschitz: float
    declared_growth: float
    declared_peak_power: Optional[float]
    trials: int
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


_REL_SLACK = 1e-9


def _check_finite(arr, what, times):
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(np.atleast_2d(arr)))
        b, i = bad[0]
        raise EvaluationError(
            f"{what} produced non-finite value at knot {i} (t={times[i]:.6g}), "
            f"sample {b}"
        )


def probe_conditions(
    f: DriftFunctional,
    g: DiffusionFunctional,
    law: MessageLaw,
    trials: int,
    rng,
) -> ConditionReport:
    """Sample path triples and take the worst observed condition ratios.

    State paths mix Brownian, scaled-Brownian and constant-level shapes to
    get some coverage of both rough and extreme inputs.  A violation is
    flagged when an observed ratio exceeds the declaration by more than a
    1e-9 relative slack.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = rng.generator() if hasattr(rng, "generator") else rng
    grid = law.grid
    times = grid.knots
    n1 = grid.steps + 1
    sqdt = math.sqrt(grid.dt)

    def state_pair(kind):
        if kind == 0:
            w = np.concatenate(
                [np.zeros((2, 1)), np.cumsum(sqdt * gen.standard_normal((2, grid.steps)), axis=1)],
                axis=1,
            )
            return w[0], w[1]
        if kind == 1:
            w = np.concatenate(
                [np.zeros((2, 1)), np.cumsum(3 * sqdt * gen.standard_normal((2, grid.steps)), axis=1)],
                axis=1,
            )
            return w[0], w[1]
        a, b = gen.uniform(-10.0, 10.0, size=2)
        return np.full(n1, a), np.full(n1, b)

    lip_hat = 0.0
    growth_hat = 0.0
    peak_hat = 0.0 if f.peak_power is not None else None
    for trial in range(trials):
        x = np.asarray(law.sample_batch(gen, 1)[0], dtype=float)
        psi, psi_t = state_pair(trial % 3)
        if np.array_equal(psi, psi_t):
            psi_t = psi_t + 1.0
        rows_psi = psi[None, :]
        rows_psi_t = psi_t[None, :]
        x_row = x[None, :]
        f_psi = f.matrix(times, x_row, rows_psi)[0]
        f_psi_t = f.matrix(times, x_row, rows_psi_t)[0]
        g_psi = g.matrix(times, rows_psi)[0]
        g_psi_t = g.matrix(times, rows_psi_t)[0]
        for arr, what in ((f_psi, "drift"), (f_psi_t, "drift"), (g_psi, "diffusion"), (g_psi_t, "diffusion")):
            _check_finite(arr, what, times)

        gap_sup = np.maximum.accumulate((psi - psi_t) ** 2)
        num_lip = (f_psi - f_psi_t) ** 2 + (g_psi - g_psi_t) ** 2
        mask = gap_sup > 1e-30
        if np.any(mask):
            lip_hat = max(lip_hat, float(np.max(num_lip[mask] / gap_sup[mask])))

        den_growth = 1.0 + np.maximum.accumulate(x**2) + np.maximum.accumulate(psi**2)
        growth_hat = max(growth_hat, float(np.max((f_psi**2 + g_psi**2) / den_growth)))

        if peak_hat is not None:
            peak_hat = max(peak_hat, float(np.sum(f_psi[:-1] ** 2) * grid.dt))

    violations = []
    if lip_hat > f.lipschitz * (1 + _REL_SLACK):
        violations.append(
            f"lipschitz: observed {lip_hat:.6g} exceeds declared {f.lipschitz:.6g}"
        )
    if growth_hat > f.growth * (1 + _REL_SLACK):
        violations.append(
            f"growth: observed {growth_hat:.6g} exceeds declared {f.growth:.6g}"
        )
    if peak_hat is not None and peak_hat > f.peak_power * (1 + _REL_SLACK):
        violations.append(
            f"peak_power: observed {peak_hat:.6g} exceeds declared {f.peak_power:.6g}"
        )
    return ConditionReport(
        lipschitz_hat=lip_hat,
        growth_hat=growth_hat,
        peak_power_hat=peak_hat,
        declared_lipschitz=f.lipschitz,
        declared_growth=f.growth,
        declared_peak_power=f.peak_power,
        trials=trials,
        violations=tuple(violations),
    )


def reduce_diffusion(
    f: DriftFunctional,
    g: DiffusionFunctional,
    *,
    lipschitz: Optional[float] = None,
    growth: Optional[float] = None,
) -> DriftFunctional:
    """Fold the diffusion into the drift: pointwise quotient f/g.

    With the identity diffusion the input drift is returned unchanged.
    Otherwise the declared invertibility bound is required, evaluation
    raises when |g| drops below its reciprocal, and the constants for the
    reduced drift should be supplied explicitly (the defaults inherit the
    originals, which is only a placeholder for probing).
    """
    if g.is_identity:
        return f
    if g.inv_bound is None:
        raise RegularityError(
            "reduce_diffusion requires a diffusion with a declared inverse bound"
        )
    floor = 1.0 / g.inv_bound

    def matrix_fn(times, x, y):
        gv = g.matrix(times, y)
        low = np.abs(gv) < floor * (1 - 1e-12)
        if np.any(low):
            b, i = np.argwhere(low)[0]
            raise RegularityError(
                f"|diffusion|={abs(gv[b, i]):.6g} below declared floor {floor:.6g} "
                f"at knot {i}"
            )
        return f.matrix(times, x, y) / gv

    def value_fn(i, times, x, y):
        gv = g.value(i, times, y)
        if abs(gv) < floor * (1 - 1e-12):
            raise RegularityError(
                f"|diffusion|={abs(gv):.6g} below declared floor {floor:.6g} at knot {i}"
            )
        return f.value(i, times, x, y) / gv

    return DriftFunctional(
        matrix_fn=matrix_fn,
        lipschitz=lipschitz if lipschitz is not None else f.lipschitz,
        growth=growth if growth is not None else f.growth,
        peak_power=None,
        affine=None,
        label=f"({f.label})/({g.label})",
        value_fn=value_fn,
    )


def truncate_drift(f: DriftFunctional, budget: float) -> DriftFunctional:
    """Gate the drift to zero once the left-point running integral of its
    square exceeds ``budget``.

    The result carries peak_power = budget.  On the grid the integral of
    the gated square can overshoot by at most one step, i.e. by
    dt * (last ungated value)**2, so the declared cap is the idealized
    budget with that slack understood.
    """
    if not (math.isfinite(budget) and budget > 0):
        raise ValueError(f"truncation budget must be finite positive, got {budget}")

    def matrix_fn(times, x, y):
        raw = f.matrix(times, x, y)
        return _running_gate(raw, times[1] - times[0], budget)

    aff = None
    if f.affine is not None and not math.isfinite(f.affine.trunc_m):
        aff = replace(f.affine, trunc_m=budget)
    return DriftFunctional(
        matrix_fn=matrix_fn,
        lipschitz=f.lipschitz,
        growth=f.growth,
        peak_power=budget,
        affine=aff,
        label=f"trunc({f.label}, {budget})",
        value_fn=None,
    )
