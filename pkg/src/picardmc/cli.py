"""Command-line front end: solve / kl / mi / bounds subcommands.

Each run writes a CSV table with a '#'-prefixed metadata block (config
hash, package and dependency versions, backend, seed) and one provenance
column group (seed, steps, n_outer, n_inner, workers) per row, so any
table is reproducible from its own header.  Identical config, seed and
workers give byte-identical output.

Exit codes: 0 success, 2 configuration error, 3 bound violation under
--strict, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__, bounds as bounds_mod, estimators, kernels
from .config import ConfigError, ExperimentConfig, load_config
from .density import LIMIT, DensityError
from .engine import RngStream
from .grammar import GrammarError
from .model import EvaluationError
from .picard import DivergenceError

_NUMERIC_ERRORS = (DivergenceError, DensityError, EvaluationError)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_table(path, metadata, header, rows, json_mirror=False):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    lines = [f"# {k}={v}" for k, v in metadata.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if json_mirror:
        payload = {
            "metadata": metadata,
            "rows": [dict(zip(header, row)) for row in rows],
        }
        with open(os.path.splitext(path)[0] + ".json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _metadata(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "config_hash": cfg.config_hash(),
        "picardmc_version": __version__,
        "numpy_version": np.__version__,
        "backend": kernels.active_backend(),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "steps": cfg.time_grid().steps,
    }


def _provenance(report):
    return [report.seed, report.steps, report.n_outer, report.n_inner, report.workers]


_PROV_HEADER = ["seed", "steps", "n_outer", "n_inner", "workers"]


def _violations(reports) -> bool:
    return any(r.bound_satisfied is False for r in reports)


def _channel_bounds(cfg: ExperimentConfig):
    ch = cfg.channel()
    return ch, bounds_mod.compute_bounds(
        ch.drift.lipschitz,
        ch.drift.growth,
        ch.law.grid.horizon,
        ch.law.second_moment,
        peak_power=ch.drift.peak_power,
        p_exponent=cfg.p_exponent,
    )


def cmd_solve(cfg: ExperimentConfig) -> int:
    ch, bset = _channel_bounds(cfg)
    rng = RngStream(cfg.seed)
    reports = estimators.picard_decay_sweep(
        ch.drift, ch.diffusion, ch.law, cfg.n_max, cfg.n_outer, rng,
        workers=cfg.workers, bounds=bset,
    )
    rows = [
        [r.order, r.estimate, r.stderr, r.bound, r.bound_satisfied] + _provenance(r)
        for r in reports
    ]
    _write_table(
        os.path.join(cfg.out_dir, "solve.csv"),
        _metadata(cfg, "solve"),
        ["n", "diff_sq_mean", "stderr", "bound", "bound_ok"] + _PROV_HEADER,
        rows,
        cfg.json_mirror,
    )
    return 3 if cfg.strict and _violations(reports) else 0


def cmd_kl(cfg: ExperimentConfig) -> int:
    ch, bset = _channel_bounds(cfg)
    rng = RngStream(cfg.seed)
    reports = estimators.convergence_sweep(
        ch.drift, ch.law, range(1, cfg.n_max + 1), cfg.n_outer, cfg.n_inner, rng,
        workers=cfg.workers, ref_extra=cfg.ref_extra,
        p_exponent=cfg.p_exponent, bounds=bset,
    )
    by_key = {(r.quantity, r.order): r for r in reports}
    rows = []
    strict_reports = []
    for n in range(1, cfg.n_max + 1):
        ivl = by_key[("kl_iterate_vs_limit", n)]
        wie = by_key[("kl_vs_wiener", n)]
        strict_reports.append(ivl)
        rows.append(
            [n, ivl.estimate, ivl.stderr, ivl.bound, ivl.bound_satisfied,
             wie.estimate, wie.stderr] + _provenance(ivl)
        )
    lim = by_key[("kl_vs_wiener", LIMIT)]
    rows.append(
        [LIMIT, None, None, None, None, lim.estimate, lim.stderr] + _provenance(lim)
    )
    _write_table(
        os.path.join(cfg.out_dir, "kl.csv"),
        _metadata(cfg, "kl"),
        ["n", "kl_vs_limit", "kl_vs_limit_stderr", "kl_vs_limit_bound", "bound_ok",
         "kl_vs_wiener", "kl_vs_wiener_stderr"] + _PROV_HEADER,
        rows,
        cfg.json_mirror,
    )
    return 3 if cfg.strict and _violations(strict_reports) else 0


def cmd_mi(cfg: ExperimentConfig) -> int:
    ch, _ = _channel_bounds(cfg)
    rng = RngStream(cfg.seed)
    reports = estimators.convergence_sweep(
        ch.drift, ch.law, range(1, cfg.n_max + 1), cfg.n_outer, cfg.n_inner, rng,
        workers=cfg.workers, ref_extra=cfg.ref_extra, p_exponent=cfg.p_exponent,
    )
    by_key = {(r.quantity, r.order): r for r in reports}
    lim = by_key[("mutual_information", LIMIT)]
    rows = []
    for n in range(1, cfg.n_max + 1):
        mi = by_key[("mutual_information", n)]
        gap = by_key[("mi_gap", n)]
        rows.append(
            [n, mi.estimate, mi.stderr, lim.estimate, gap.estimate, gap.stderr,
             gap.bound] + _provenance(mi)
        )
    rows.append(
        [LIMIT, lim.estimate, lim.stderr, lim.estimate, None, None, None]
        + _provenance(lim)
    )
    _write_table(
        os.path.join(cfg.out_dir, "mi.csv"),
        _metadata(cfg, "mi"),
        ["n", "mi", "mi_stderr", "mi_limit", "gap", "gap_stderr", "gap_shape"]
        + _PROV_HEADER,
        rows,
        cfg.json_mirror,
    )
    return 0


def cmd_bounds(cfg: ExperimentConfig) -> int:
    ch, bset = _channel_bounds(cfg)
    print(f"channel: {ch.name}  drift: {ch.drift.label}")
    print(f"lipschitz={bset.lipschitz!r} growth={bset.growth!r} "
          f"horizon={bset.horizon!r} message_moment={bset.message_moment!r}")
    print(f"moment_scale={bset.moment_scale!r}")
    print(f"moment_rate={bset.moment_rate!r}")
    print(f"decay_scale={bset.decay_scale!r}")
    print(f"decay_rate={bset.decay_rate!r}")
    print(f"tail_scale={bset.tail_scale!r}")
    if bset.decay_scale_bounded is not None:
        print(f"decay_scale_bounded={bset.decay_scale_bounded!r}")
        print(f"moment_cap(p={bset.p_exponent})={bset.moment_cap()!r}")
    rows = []
    for n in range(0, cfg.n_max + 1):
        kl = bset.kl_rate(n) if n >= 1 else None
        mi = bset.mi_rate(n, cfg.p_exponent) if n >= 1 else None
        rows.append([n, bset.picard_l2(n), kl, mi])
        print(f"n={n} picard_l2={bset.picard_l2(n)!r} kl_rate={kl!r} mi_rate={mi!r}")
    _write_table(
        os.path.join(cfg.out_dir, "bounds.csv"),
        _metadata(cfg, "bounds"),
        ["n", "picard_l2", "kl_rate", "mi_rate"],
        rows,
        cfg.json_mirror,
    )
    return 0


_COMMANDS = {"solve": cmd_solve, "kl": cmd_kl, "mi": cmd_mi, "bounds": cmd_bounds}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="picardmc",
        description="Iteration sweeps, path-space divergences and mutual "
        "information for feedback diffusions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "iterate gap statistics against the factorial envelope"),
        ("kl", "divergence sweep: iterate vs limit and vs Wiener measure"),
        ("mi", "mutual information sweep with limit estimate and gaps"),
        ("bounds", "print the constant set and bound curves"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", help="named channel preset")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, help="worker chunk count")
        p.add_argument("--n-max", type=int, dest="n_max", help="deepest iterate order")
        p.add_argument("--outer", type=int, help="outer sample count")
        p.add_argument("--inner", type=int, help="inner (mixture) sample count")
        p.add_argument("--steps", type=int, help="grid steps")
        p.add_argument("--strict", action="store_true",
                       help="exit 3 when an estimate violates its bound")
        p.add_argument("--json", action="store_true", help="also write a JSON mirror")
        p.add_argument("--out", help="output directory")
    return parser


def _apply_flags(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.preset is not None:
        updates.update(preset=args.preset, drift=None)
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.n_max is not None:
        updates["n_max"] = args.n_max
    if args.outer is not None:
        updates["n_outer"] = args.outer
    if args.inner is not None:
        updates["n_inner"] = args.inner
    if args.steps is not None:
        updates["grid"] = {**cfg.grid, "steps": args.steps}
    if args.strict:
        updates["strict"] = True
    if args.json:
        updates["json_mirror"] = True
    if args.out is not None:
        updates["out_dir"] = args.out
    return dataclasses.replace(cfg, **updates)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig(preset="zero")
        cfg = _apply_flags(cfg, args)
        cfg.validate()
        cfg.channel()  # surface channel construction problems as config errors
    except (ConfigError, GrammarError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](cfg)
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
