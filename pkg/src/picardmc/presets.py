"""Named channel presets: drift / diffusion / message combinations with
declared condition constants and a default grid.

Declared constants are conservative by design; probes can falsify them
but the presets are chosen so they never should.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import (
    DiffusionFunctional,
    DriftFunctional,
    MessageLaw,
    TimeGrid,
    constant_gaussian_message,
    cosine_gaussian_message,
    drift_from_affine,
    identity_diffusion,
    truncate_drift,
    zero_message,
)

DEFAULT_GRID = TimeGrid(1.0, 256)


@dataclass(frozen=True)
class Channel:
    """A fully specified problem instance."""

    name: str
    drift: DriftFunctional
    diffusion: DiffusionFunctional
    law: MessageLaw


def _zero(grid: TimeGrid) -> Channel:
    f = drift_from_affine(0.0, 0.0, 0.0, lipschitz=1.0, growth=1.0, label="0")
    return Channel("zero", f, identity_diffusion(), zero_message(grid))


def _constant_drift(grid: TimeGrid, theta: float = 1.0) -> Channel:
    f = drift_from_affine(
        theta,
        0.0,
        0.0,
        lipschitz=1.0,
        growth=theta * theta + 1.0,
        peak_power=theta * theta * grid.horizon,
        label=f"{theta}",
    )
    return Channel("constant_drift", f, identity_diffusion(), zero_message(grid))


def _message_only(grid: TimeGrid, sigma: float = 1.0) -> Channel:
    f = drift_from_affine(
        0.0,
        sigma,
        0.0,
        lipschitz=1.0,
        growth=max(sigma * sigma, 1.0) + 1.0,
        label=f"{sigma}*x(t)",
    )
    return Channel("message_only", f, identity_diffusion(), constant_gaussian_message(grid))


def _linear_feedback(grid: TimeGrid, a: float = 0.5, sigma: float = 1.0) -> Channel:
    f = drift_from_affine(
        0.0,
        sigma,
        a,
        lipschitz=2.0 * max(1.0, a * a),
        growth=8.0 * max(1.0, a * a, sigma * sigma),
        label=f"{a}*y(t)+{sigma}*x(t)",
    )
    return Channel("linear_feedback", f, identity_diffusion(), constant_gaussian_message(grid))


def _bounded_truncated(grid: TimeGrid, m: float = 1.0, a: float = 0.5, sigma: float = 1.0) -> Channel:
    base = _linear_feedback(grid, a, sigma)
    return Channel("bounded_truncated", truncate_drift(base.drift, m), base.diffusion, base.law)


def _ou_drift(grid: TimeGrid, theta: float = 1.0) -> Channel:
    f = drift_from_affine(
        0.0,
        0.0,
        -theta,
        lipschitz=theta * theta,
        growth=theta * theta + 1.0,
        label=f"-{theta}*y(t)",
    )
    return Channel("ou_drift", f, identity_diffusion(), zero_message(grid))


PRESETS = {
    "zero": _zero,
    "constant_drift": _constant_drift,
    "message_only": _message_only,
    "linear_feedback": _linear_feedback,
    "bounded_truncated": _bounded_truncated,
    "ou_drift": _ou_drift,
}

MESSAGE_KINDS = {
    "zero": zero_message,
    "constant_gaussian": constant_gaussian_message,
    "cosine_gaussian": cosine_gaussian_message,
}


def build_preset(name: str, grid: TimeGrid | None = None, **params) -> Channel:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choices: {sorted(PRESETS)}")
    return PRESETS[name](grid or DEFAULT_GRID, **params)


def build_message(kind: str, grid: TimeGrid, **params) -> MessageLaw:
    if kind not in MESSAGE_KINDS:
        raise KeyError(f"unknown message kind {kind!r}; choices: {sorted(MESSAGE_KINDS)}")
    return MESSAGE_KINDS[kind](grid, **params)
