"""Explicit constants and bound curves for the iteration and its laws.

Everything is computed from the declared Lipschitz constant, growth
constant, horizon, message sup-norm second moment and (optionally) the
peak-power cap.  The curves evaluate in log space so that deep orders do
not overflow the factorial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class BoundSet:
    """Constants and per-order curves derived from declared inputs.

    ``moment_scale``/``moment_rate`` cap the iterate sup-norm second
    moment as scale * exp(rate * horizon); ``decay_scale``/``decay_rate``
    give the factorial envelope scale * (rate*T)^n / n! for successive
    iterate differences; ``tail_scale`` plays the same role for the gap to
    the limit.  ``decay_scale_bounded`` is the message-free replacement
    available under a peak-power cap.
    """

    lipschitz: float
    growth: float
    horizon: float
    message_moment: float
    peak_power: Optional[float]
    p_exponent: float
    moment_scale: float
    moment_rate: float
    decay_scale: float
    decay_rate: float
    tail_scale: float
    decay_scale_bounded: Optional[float]

    def _log_pow(self, k: int) -> float:
        """log of (decay_rate * horizon)^k / k!"""
        return k * math.log(self.decay_rate * self.horizon) - math.lgamma(k + 1)

    def picard_l2(self, n: int) -> float:
        """Bound on the mean squared sup-norm gap between iterates n+1 and n."""
        if n < 0:
            raise ValueError("order must be >= 0")
        return self.decay_scale * math.exp(self._log_pow(n))

    def kl_rate(self, n: int) -> float:
        """Bound on the divergence of the order-n iterate law from the limit law."""
        if n < 1:
            raise ValueError("order must be >= 1")
        front = self.decay_scale * self.lipschitz * self.horizon
        pw = math.exp(self._log_pow(n - 1))
        return math.sqrt(front) * math.sqrt(pw) + front * pw / 2.0

    def mi_rate(self, n: int, p: Optional[float] = None, multiplier: float = 1.0) -> float:
        """Shape of the information-gap decay at order n.

        The front constant of this curve is not pinned down by the theory;
        callers fit or supply ``multiplier`` and should read the curve as a
        log-scale slope, not a certified cap.
        """
        if n < 1:
            raise ValueError("order must be >= 1")
        p = self.p_exponent if p is None else p
        if p < 1:
            raise ValueError("p must be >= 1")
        a = math.exp(self._log_pow(n - 1))
        b = math.exp(self._log_pow(n))
        return multiplier * ((a + b) ** (1.0 / (2.0 * p)) + math.sqrt(a) + a)

    def moment_cap(self, p: Optional[float] = None) -> float:
        """Cap on the p-th moment of the iterate density under peak power."""
        if self.peak_power is None:
            raise ValueError("moment cap requires a declared peak power")
        p = self.p_exponent if p is None else p
        return math.exp(p * (p + 1) * self.peak_power / 2.0)

    def first_n_below(self, threshold: float, n_cap: int = 1_000_000) -> int:
        """Smallest order at which the divergence curve drops below threshold."""
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        for n in range(1, n_cap + 1):
            if self.kl_rate(n) < threshold:
                return n
        raise RuntimeError(f"curve stayed above {threshold} up to order {n_cap}")


def compute_bounds(
    lipschitz: float,
    growth: float,
    horizon: float,
    message_moment: float,
    peak_power: Optional[float] = None,
    p_exponent: float = 2.0,
) -> BoundSet:
    """Build the bound set from declared condition constants.

    Raises ValueError on nonpositive Lipschitz/growth/horizon, a negative
    message moment, a nonpositive peak power or an exponent below 1.
    """
    for name, v in (("lipschitz", lipschitz), ("growth", growth), ("horizon", horizon)):
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be a positive real, got {v}")
    if not (math.isfinite(message_moment) and message_moment >= 0):
        raise ValueError(f"message_moment must be nonnegative, got {message_moment}")
    if peak_power is not None and not (math.isfinite(peak_power) and peak_power > 0):
        raise ValueError(f"peak_power must be positive, got {peak_power}")
    if p_exponent < 1:
        raise ValueError(f"p_exponent must be >= 1, got {p_exponent}")

    moment_scale = 2.0 * growth * horizon * (horizon + 4.0) * (1.0 + message_moment)
    moment_rate = 2.0 * growth * (horizon + 4.0)
    decay_scale = 2.0 * horizon * growth * (horizon + 4.0) * (1.0 + message_moment)
    decay_rate = 2.0 * lipschitz * (horizon + 4.0)
    exponent = moment_rate * horizon
    tail_scale = moment_scale * math.exp(exponent) if exponent < 709.0 else math.inf
    bounded = None if peak_power is None else 2.0 * horizon * (peak_power + 4.0)
    return BoundSet(
        lipschitz=lipschitz,
        growth=growth,
        horizon=horizon,
        message_moment=message_moment,
        peak_power=peak_power,
        p_exponent=p_exponent,
        moment_scale=moment_scale,
        moment_rate=moment_rate,
        decay_scale=decay_scale,
        decay_rate=decay_rate,
        tail_scale=tail_scale,
        decay_scale_bounded=bounded,
    )
