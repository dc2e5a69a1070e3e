"""Experiment configuration: JSON schema, validation and channel building.

A configuration names either a preset (with optional parameter overrides)
or an inline expression-based drift with explicit declared constants and a
message law.  The dict form round-trips losslessly through JSON, and its
canonical serialization is hashed into every output file's metadata.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .model import TimeGrid, drift_from_expression, identity_diffusion
from .presets import Channel, build_message, build_preset


class ConfigError(ValueError):
    """Invalid or missing configuration field; the message names it."""


@dataclass(frozen=True)
class ExperimentConfig:
    preset: Optional[str] = None
    preset_params: dict = field(default_factory=dict)
    drift: Optional[str] = None
    constants: Optional[dict] = None  # lipschitz / growth / peak_power
    message: Optional[dict] = None  # kind / params
    grid: dict = field(default_factory=lambda: {"horizon": 1.0, "steps": 256})
    n_outer: int = 2000
    n_inner: int = 200
    n_max: int = 4
    ref_extra: int = 10
    seed: int = 0
    workers: int = 1
    p_exponent: float = 2.0
    strict: bool = False
    json_mirror: bool = False
    out_dir: str = "results"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        if "grid" not in raw:
            raise ConfigError("grid: missing")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if (self.preset is None) == (self.drift is None):
            raise ConfigError("config: exactly one of 'preset' or 'drift' is required")
        if self.drift is not None:
            if self.constants is None:
                raise ConfigError("constants: required with an inline drift")
            for key in ("lipschitz", "growth"):
                if key not in self.constants:
                    raise ConfigError(f"constants.{key}: missing")
            if self.message is None or "kind" not in (self.message or {}):
                raise ConfigError("message.kind: required with an inline drift")
        if not isinstance(self.grid, dict):
            raise ConfigError("grid: expected an object with horizon and steps")
        for key in ("horizon", "steps"):
            if key not in self.grid:
                raise ConfigError(f"grid.{key}: missing")
        for name in ("n_outer", "n_inner", "n_max", "ref_extra", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name}: must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed: must be a nonnegative integer, got {self.seed!r}")
        if self.p_exponent < 1:
            raise ConfigError(f"p_exponent: must be >= 1, got {self.p_exponent}")

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def time_grid(self) -> TimeGrid:
        try:
            return TimeGrid(float(self.grid["horizon"]), int(self.grid["steps"]))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"grid: {exc}") from exc

    def channel(self) -> Channel:
        grid = self.time_grid()
        if self.preset is not None:
            try:
                return build_preset(self.preset, grid, **self.preset_params)
            except KeyError as exc:
                raise ConfigError(f"preset: {exc.args[0]}") from exc
            except TypeError as exc:
                raise ConfigError(f"preset_params: {exc}") from exc
        consts = dict(self.constants)
        f = drift_from_expression(
            self.drift,
            lipschitz=float(consts["lipschitz"]),
            growth=float(consts["growth"]),
            peak_power=consts.get("peak_power"),
        )
        msg = dict(self.message)
        try:
            law = build_message(msg["kind"], grid, **msg.get("params", {}))
        except KeyError as exc:
            raise ConfigError(f"message.kind: {exc.args[0]}") from exc
        return Channel("inline", f, identity_diffusion(), law)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file: line {exc.lineno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(raw)
