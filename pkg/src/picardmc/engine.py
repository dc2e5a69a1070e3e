"""Grid-level numerics: seeded streams, Brownian sampling, left-point
integrals, sup norms and mergeable moment accumulators.

Every integral here is a left-point (Ito-convention) sum; there is no
Stratonovich option.  Random draws come from counter-based Philox streams
keyed by (seed, index), so distinct indices give independent draws and a
repeated (seed, index) reproduces the identical sequence bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Path, TimeGrid


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by (seed, index).

    ``index`` may be a single non-negative integer or a tuple of them;
    tuples let estimators hand disjoint child streams to worker chunks
    without coordinating a global counter.
    """

    seed: int
    index: "int | tuple[int, ...]" = 0

    def _key(self) -> tuple[int, ...]:
        return (self.index,) if isinstance(self.index, int) else tuple(self.index)

    def child(self, *extra: int) -> "RngStream":
        return RngStream(self.seed, self._key() + extra)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self._key())
        return np.random.Generator(np.random.Philox(seq))


def sample_brownian_batch(grid: TimeGrid, gen: np.random.Generator, count: int) -> np.ndarray:
    """(count, steps+1) standard Brownian paths started at zero."""
    incr = math.sqrt(grid.dt) * gen.standard_normal((count, grid.steps))
    out = np.empty((count, grid.steps + 1))
    out[:, 0] = 0.0
    np.cumsum(incr, axis=1, out=out[:, 1:])
    return out


def sample_brownian(grid: TimeGrid, rng: RngStream) -> Path:
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return Path(grid, sample_brownian_batch(grid, gen, 1)[0])


def ito_integral(h: np.ndarray, y: Path) -> float:
    """Left-point stochastic sum of h against the increments of y.

    ``h`` holds one value per increment (length = steps); its value at
    increment i must only depend on knots <= i, which is the caller's
    contract.
    """
    h = np.asarray(h, dtype=float)
    steps = y.grid.steps
    if h.shape != (steps,):
        raise ValueError(f"integrand needs one value per increment ({steps}), got {h.shape}")
    return float(np.dot(h, np.diff(y.values)))


def quadrature(h: np.ndarray, grid: TimeGrid) -> float:
    """Left-point time integral: sum of the first ``steps`` values times dt.

    Accepts per-increment (steps) or per-knot (steps+1) input; the final
    knot never enters a left-point sum.
    """
    h = np.asarray(h, dtype=float)
    if h.shape == (grid.steps + 1,):
        h = h[:-1]
    elif h.shape != (grid.steps,):
        raise ValueError(
            f"integrand must have {grid.steps} or {grid.steps + 1} values, got {h.shape}"
        )
    return float(np.sum(h) * grid.dt)


def sup_norm(y: Path, up_to: int | None = None) -> float:
    """Max of |values| over knots 0..up_to (defaults to the whole path)."""
    last = y.grid.steps if up_to is None else up_to
    if not 0 <= last <= y.grid.steps:
        raise ValueError(f"knot index {last} outside grid with {y.grid.steps} steps")
    return float(np.max(np.abs(y.values[: last + 1])))


@dataclass
class Accumulator:
    """Running count / sum / sum-of-squares with associative merge."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, values) -> None:
        arr = np.atleast_1d(np.asarray(values, dtype=float))
        self.count += arr.size
        self.total += float(arr.sum())
        self.total_sq += float(np.dot(arr, arr))

    def merge(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(
            self.count + other.count,
            self.total + other.total,
            self.total_sq + other.total_sq,
        )

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValueError("empty accumulator has no mean")
        return self.total / self.count

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.inf
        var = max(self.total_sq / self.count - self.mean**2, 0.0)
        return math.sqrt(var / (self.count - 1))
