"""Monte Carlo estimators for divergences and mutual information along
the iteration, with standard errors and bound comparisons.

Conventions shared by every estimator here:

* outer draws are split into per-worker chunks with disjoint child
  streams, so results are deterministic given (seed, workers) and
  independent of thread scheduling;
* all divergences are in nats and negative estimates are reported as-is,
  never clamped;
* wherever two noisy quantities are subtracted (iterate vs limit mixtures,
  the two terms of mutual information, gaps across orders) the same draws
  feed both sides, and the standard error comes from the per-draw
  differences.

The unit-diffusion regime is assumed throughout (reduce first otherwise).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import density, picard
from .bounds import BoundSet, compute_bounds
from .density import LIMIT
from .engine import Accumulator, RngStream, sample_brownian_batch
from .model import DiffusionFunctional, DriftFunctional, MessageLaw, identity_diffusion

DEFAULT_LIMIT_ORDER = 12


@dataclass(frozen=True)
class EstimateReport:
    """One Monte Carlo estimate with provenance and optional bound."""

    quantity: str
    order: "int | str"
    estimate: float
    stderr: float
    n_outer: int
    n_inner: int
    seed: int
    steps: int
    workers: int
    bound: Optional[float] = None
    bound_satisfied: Optional[bool] = None


def _make_report(quantity, order, acc_or_pair, n_outer, n_inner, rng, law, workers, bound):
    if isinstance(acc_or_pair, Accumulator):
        est, se = acc_or_pair.mean, acc_or_pair.stderr
    else:
        est, se = acc_or_pair
    ok = None if bound is None else bool(est <= bound + 3.0 * se)
    return EstimateReport(
        quantity=quantity,
        order=order,
        estimate=est,
        stderr=se,
        n_outer=n_outer,
        n_inner=n_inner,
        seed=rng.seed,
        steps=law.grid.steps,
        workers=workers,
        bound=bound,
        bound_satisfied=ok,
    )


def _chunk_sizes(n_outer: int, workers: int) -> list[int]:
    if n_outer < 1:
        raise ValueError("n_outer must be >= 1")
    workers = max(1, min(workers, n_outer))
    base, extra = divmod(n_outer, workers)
    return [base + (1 if c < extra else 0) for c in range(workers)]


def _run_chunks(job, rng: RngStream, n_outer: int, workers: int):
    """Run ``job(generator, count)`` over disjoint chunk streams; results
    come back in chunk order regardless of scheduling."""
    sizes = _chunk_sizes(n_outer, workers)
    if len(sizes) == 1:
        return [job(rng.child(0).generator(), sizes[0])]
    with ThreadPoolExecutor(max_workers=len(sizes)) as pool:
        futs = [pool.submit(job, rng.child(c).generator(), sz) for c, sz in enumerate(sizes)]
        return [f.result() for f in futs]


def _default_bounds(f: DriftFunctional, law: MessageLaw, p_exponent: float) -> BoundSet:
    return compute_bounds(
        f.lipschitz,
        f.growth,
        law.grid.horizon,
        law.second_moment,
        peak_power=f.peak_power,
        p_exponent=p_exponent,
    )


def _draw_outputs(f, law, gen, count, order_eff):
    g = identity_diffusion()
    X = law.sample_batch(gen, count)
    W = sample_brownian_batch(law.grid, gen, count)
    Y = picard.final_iterate_batch(f, g, law.grid, X, W, order_eff)
    return X, Y


def _mixture_values(f, law, gen, Y, order, n_inner):
    """Per-path mixture log densities; fresh inner messages per outer path."""
    grid = law.grid
    out = np.empty(Y.shape[0])
    for p in range(Y.shape[0]):
        Xin = law.sample_batch(gen, n_inner)
        if order == LIMIT:
            rows = density.fixed_rows(f, grid, Xin, Y[p])
        else:
            rows = density.iterate_rows(f, grid, Xin, Y[p], order)
        out[p] = density.logmeanexp(rows)
    return out


def kl_vs_wiener(
    f: DriftFunctional,
    law: MessageLaw,
    order,
    n_outer: int,
    n_inner: int,
    rng: RngStream,
    *,
    workers: int = 1,
    limit_order: int = DEFAULT_LIMIT_ORDER,
) -> EstimateReport:
    """Divergence of the order-n iterate law (or the limit law) from Wiener
    measure: mean of the mixture log density at the law's own draws."""
    order_eff = limit_order if order == LIMIT else order

    def job(gen, count):
        _, Y = _draw_outputs(f, law, gen, count, order_eff)
        acc = Accumulator()
        acc.add(_mixture_values(f, law, gen, Y, order, n_inner))
        return acc

    accs = _run_chunks(job, rng, n_outer, workers)
    total = accs[0]
    for a in accs[1:]:
        total = total.merge(a)
    return _make_report(
        "kl_vs_wiener", order, total, n_outer, n_inner, rng, law, workers, None
    )


def kl_iterate_vs_limit(
    f: DriftFunctional,
    law: MessageLaw,
    n: int,
    n_outer: int,
    n_inner: int,
    rng: RngStream,
    *,
    workers: int = 1,
    bounds: Optional[BoundSet] = None,
) -> EstimateReport:
    """Divergence of the order-n iterate law from the limit law.

    At each outer draw of the iterate, the iterate-law and limit-law
    mixture densities are evaluated with the same inner message draws, and
    the estimate is the mean of their difference.
    """
    if n == LIMIT or n < 1:
        raise ValueError("kl_iterate_vs_limit needs a finite order >= 1")
    bounds = bounds or _default_bounds(f, law, 2.0)
    grid = law.grid

    def job(gen, count):
        _, Y = _draw_outputs(f, law, gen, count, n)
        acc = Accumulator()
        for p in range(count):
            Xin = law.sample_batch(gen, n_inner)
            rows_n = density.iterate_rows(f, grid, Xin, Y[p], n)
            rows_lim = density.fixed_rows(f, grid, Xin, Y[p])
            acc.add(density.logmeanexp(rows_n) - density.logmeanexp(rows_lim))
        return acc

    accs = _run_chunks(job, rng, n_outer, workers)
    total = accs[0]
    for a in accs[1:]:
        total = total.merge(a)
    return _make_report(
        "kl_iterate_vs_limit",
        n,
        total,
        n_outer,
        n_inner,
        rng,
        law,
        workers,
        bounds.kl_rate(n),
    )


def kl_joint_vs_product(
    f: DriftFunctional,
    law: MessageLaw,
    order,
    n_outer: int,
    rng: RngStream,
    *,
    workers: int = 1,
    limit_order: int = DEFAULT_LIMIT_ORDER,
) -> EstimateReport:
    """Divergence of the joint (message, output) law from the product of
    the message law with Wiener measure; no inner loop.

    Under a declared peak-power cap the attached bound is half the cap.
    """
    if n_outer < 2:
        raise ValueError("n_outer must be >= 2")
    order_eff = limit_order if order == LIMIT else order
    grid = law.grid

    def job(gen, count):
        X, Y = _draw_outputs(f, law, gen, count, order_eff)
        acc = Accumulator()
        acc.add(density.own_rows(f, grid, X, Y, order))
        return acc

    accs = _run_chunks(job, rng, n_outer, workers)
    total = accs[0]
    for a in accs[1:]:
        total = total.merge(a)
    bound = None if f.peak_power is None else f.peak_power / 2.0
    return _make_report(
        "kl_joint_vs_product", order, total, n_outer, 0, rng, law, workers, bound
    )


def mutual_information(
    f: DriftFunctional,
    law: MessageLaw,
    order,
    n_outer: int,
    n_inner: int,
    rng: RngStream,
    *,
    workers: int = 1,
    limit_order: int = DEFAULT_LIMIT_ORDER,
    p_exponent: float = 2.0,
    bounds: Optional[BoundSet] = None,
) -> EstimateReport:
    """Mutual information between message and output at the given order.

    Computed as joint-vs-product minus output-vs-Wiener on the same outer
    draws, so the estimate is exactly the difference of those two terms
    and the standard error comes from the per-draw differences.  The
    attached bound (finite order, peak power declared) is the gap-shape
    curve against the limit, recorded for downstream sweeps rather than as
    a cap on the value itself.
    """
    order_eff = limit_order if order == LIMIT else order
    grid = law.grid

    def job(gen, count):
        X, Y = _draw_outputs(f, law, gen, count, order_eff)
        joint_vals = density.own_rows(f, grid, X, Y, order)
        mix_vals = _mixture_values(f, law, gen, Y, order, n_inner)
        accs = (Accumulator(), Accumulator(), Accumulator())
        accs[0].add(joint_vals)
        accs[1].add(mix_vals)
        accs[2].add(joint_vals - mix_vals)
        return accs

    results = _run_chunks(job, rng, n_outer, workers)
    joint, wiener, diff = results[0]
    for j, w, d in results[1:]:
        joint, wiener, diff = joint.merge(j), wiener.merge(w), diff.merge(d)
    bound = None
    if order != LIMIT and f.peak_power is not None:
        bounds = bounds or _default_bounds(f, law, p_exponent)
        bound = bounds.mi_rate(order, p_exponent)
    return _make_report(
        "mutual_information",
        order,
        (joint.mean - wiener.mean, diff.stderr),
        n_outer,
        n_inner,
        rng,
        law,
        workers,
        bound,
    )


def picard_decay_sweep(
    f: DriftFunctional,
    g: DiffusionFunctional,
    law: MessageLaw,
    n_hi: int,
    n_outer: int,
    rng: RngStream,
    *,
    workers: int = 1,
    bounds: Optional[BoundSet] = None,
) -> list[EstimateReport]:
    """Mean squared sup-norm gaps between successive iterates, orders
    0..n_hi, against the factorial envelope."""
    bounds = bounds or _default_bounds(f, law, 2.0)
    grid = law.grid

    def job(gen, count):
        X = law.sample_batch(gen, count)
        W = sample_brownian_batch(grid, gen, count)
        diffs = picard.diff_sup_sq_batch(f, g, grid, X, W, n_hi)
        accs = []
        for n in range(n_hi + 1):
            acc = Accumulator()
            acc.add(diffs[n])
            accs.append(acc)
        return accs

    results = _run_chunks(job, rng, n_outer, workers)
    reports = []
    for n in range(n_hi + 1):
        total = results[0][n]
        for chunk in results[1:]:
            total = total.merge(chunk[n])
        reports.append(
            _make_report(
                "picard_diff_sq",
                n,
                total,
                n_outer,
                0,
                rng,
                law,
                workers,
                bounds.picard_l2(n),
            )
        )
    return reports


def convergence_sweep(
    f: DriftFunctional,
    law: MessageLaw,
    n_range: Sequence[int],
    n_outer: int,
    n_inner: int,
    rng: RngStream,
    *,
    workers: int = 1,
    ref_extra: int = 10,
    p_exponent: float = 2.0,
    bounds: Optional[BoundSet] = None,
) -> list[EstimateReport]:
    """All four quantities per order on shared draws, plus limit rows and
    information gaps.

    One (message, noise) batch per chunk drives every order, and the inner
    message draws at each outer path are reused across orders, so the
    per-order columns are coupled and gaps are low-variance.
    """
    n_list = sorted(set(int(n) for n in n_range))
    if not n_list or n_list[0] < 1:
        raise ValueError("n_range must be nonempty with orders >= 1")
    bounds = bounds or _default_bounds(f, law, p_exponent)
    grid = law.grid
    g = identity_diffusion()
    limit_order = n_list[-1] + ref_extra
    quantities = ("kl_iterate_vs_limit", "kl_vs_wiener", "kl_joint_vs_product",
                  "mutual_information", "picard_diff_sq", "mi_gap")

    def job(gen, count):
        X = law.sample_batch(gen, count)
        W = sample_brownian_batch(grid, gen, count)
        dW = np.diff(W, axis=1)
        times = grid.knots
        # incremental stepping, retaining the orders the sweep reports on
        kept = {}
        diffs = {}
        y = np.zeros_like(W)
        for k in range(1, limit_order + 1):
            nxt = picard._step_matrix(f, g, times, X, y, dW)
            if k - 1 in n_list:
                diffs[k - 1] = np.max((nxt - y) ** 2, axis=1)
            if k in n_list:
                kept[k] = nxt
            y = nxt
        y_lim = y

        joint = {n: density.own_rows(f, grid, X, kept[n], n) for n in n_list}
        joint[LIMIT] = density.own_rows(f, grid, X, y_lim, LIMIT)
        mix = {key: np.empty(count) for key in n_list + [LIMIT]}
        gap_vs_limit = {n: np.empty(count) for n in n_list}
        for p in range(count):
            Xin = law.sample_batch(gen, n_inner)
            for n in n_list:
                rows_n = density.iterate_rows(f, grid, Xin, kept[n][p], n)
                rows_lim = density.fixed_rows(f, grid, Xin, kept[n][p])
                mix[n][p] = density.logmeanexp(rows_n)
                gap_vs_limit[n][p] = mix[n][p] - density.logmeanexp(rows_lim)
            mix[LIMIT][p] = density.logmeanexp(
                density.fixed_rows(f, grid, Xin, y_lim[p])
            )

        out = {}
        for n in n_list:
            out[("picard_diff_sq", n)] = diffs[n]
            out[("kl_iterate_vs_limit", n)] = gap_vs_limit[n]
            out[("kl_vs_wiener", n)] = mix[n]
            out[("kl_joint_vs_product", n)] = joint[n]
            out[("mutual_information", n)] = joint[n] - mix[n]
            out[("mi_gap", n)] = (joint[n] - mix[n]) - (joint[LIMIT] - mix[LIMIT])
        out[("kl_vs_wiener", LIMIT)] = mix[LIMIT]
        out[("kl_joint_vs_product", LIMIT)] = joint[LIMIT]
        out[("mutual_information", LIMIT)] = joint[LIMIT] - mix[LIMIT]
        return out

    results = _run_chunks(job, rng, n_outer, workers)
    merged: dict[tuple, Accumulator] = {}
    for chunk in results:
        for key, vals in chunk.items():
            acc = merged.setdefault(key, Accumulator())
            acc.add(vals)

    def bound_for(quantity, n):
        if n == LIMIT:
            return None
        if quantity == "picard_diff_sq":
            return bounds.picard_l2(n)
        if quantity == "kl_iterate_vs_limit":
            return bounds.kl_rate(n)
        if quantity == "kl_joint_vs_product":
            return None if f.peak_power is None else f.peak_power / 2.0
        if quantity in ("mutual_information", "mi_gap"):
            return None if f.peak_power is None else bounds.mi_rate(n, p_exponent)
        return None

    reports = []
    orders_for = {q: list(n_list) for q in quantities}
    for q in ("kl_vs_wiener", "kl_joint_vs_product", "mutual_information"):
        orders_for[q] = list(n_list) + [LIMIT]
    for quantity in quantities:
        for n in orders_for[quantity]:
            acc = merged[(quantity, n)]
            inner = n_inner if quantity in ("kl_iterate_vs_limit", "kl_vs_wiener",
                                            "mutual_information", "mi_gap") else 0
            if quantity == "mutual_information":
                j = merged[("kl_joint_vs_product", n)]
                w = merged[("kl_vs_wiener", n)]
                pair = (j.mean - w.mean, acc.stderr)
                reports.append(
                    _make_report(quantity, n, pair, n_outer, inner, rng, law,
                                 workers, bound_for(quantity, n))
                )
            else:
                reports.append(
                    _make_report(quantity, n, acc, n_outer, inner, rng, law,
                                 workers, bound_for(quantity, n))
                )
    return reports
