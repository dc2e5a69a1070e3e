import numpy as np
import pytest

from picardmc import (
    DivergenceError,
    Path,
    RngStream,
    TimeGrid,
    constant_gaussian_message,
    drift_from_affine,
    drift_from_callable,
    drift_from_expression,
    identity_diffusion,
    invert_noise,
    picard_step,
    run_iteration,
    sample_brownian,
    sup_norm,
    zero_message,
)
from picardmc.picard import final_iterate_batch

GRID = TimeGrid(1.0, 64)
G1 = identity_diffusion()


def _const_path(grid, c):
    return Path(grid, np.full(grid.steps + 1, float(c)))


def test_step_pure_noise_returns_noise():
    f = drift_from_affine(0.0, 0.0, 0.0, lipschitz=1.0, growth=1.0)
    w = sample_brownian(GRID, RngStream(1))
    out = picard_step(f, G1, _const_path(GRID, 0.0), Path.zeros(GRID), w)
    np.testing.assert_array_equal(out.values, w.values)


def test_step_constant_message_drift():
    # recursion with constant drift c sums to c*t_i + W(t_i)
    c = 1.5
    f = drift_from_affine(0.0, 1.0, 0.0, lipschitz=1.0, growth=2.0 + c * c)
    w = sample_brownian(GRID, RngStream(2))
    out = picard_step(f, G1, _const_path(GRID, c), Path.zeros(GRID), w)
    # independent oracle: explicit Euler loop
    expect = np.zeros(GRID.steps + 1)
    for i in range(GRID.steps):
        expect[i + 1] = expect[i] + c * GRID.dt + (w.values[i + 1] - w.values[i])
    np.testing.assert_array_equal(out.values, expect)
    np.testing.assert_allclose(out.values, c * GRID.knots + w.values, rtol=0, atol=1e-12)


def test_step_state_drift_against_resummation():
    f = drift_from_affine(0.0, 0.0, 1.0, lipschitz=1.0, growth=2.0)
    w = sample_brownian(GRID, RngStream(3))
    out = picard_step(f, G1, _const_path(GRID, 0.0), w, w)
    expect = np.zeros(GRID.steps + 1)
    running = 0.0
    for i in range(1, GRID.steps + 1):
        running += w.values[i - 1] * GRID.dt
        expect[i] = running + w.values[i]
    np.testing.assert_allclose(out.values, expect, rtol=1e-12, atol=1e-14)


def test_step_raises_on_nonfinite_drift():
    def bad(times, x, y):
        out = np.zeros_like(y)
        out[:, 5] = np.inf
        return out

    f = drift_from_callable(bad, lipschitz=1.0, growth=1.0)
    w = sample_brownian(GRID, RngStream(4))
    with pytest.raises(DivergenceError, match="knot 5"):
        picard_step(f, G1, _const_path(GRID, 0.0), Path.zeros(GRID), w)


def test_run_iteration_message_only_reaches_fixed_point_in_one_step():
    f = drift_from_affine(0.0, 1.0, 0.0, lipschitz=1.0, growth=2.0)
    law = constant_gaussian_message(GRID)
    bundle = run_iteration(f, G1, law, 4, RngStream(5))
    for it in bundle.iterates[2:]:
        np.testing.assert_array_equal(it.values, bundle.iterates[1].values)
    np.testing.assert_array_equal(bundle.reference.values, bundle.iterates[1].values)


def test_run_iteration_zero_drift_gives_noise():
    f = drift_from_affine(0.0, 0.0, 0.0, lipschitz=1.0, growth=1.0)
    bundle = run_iteration(f, G1, zero_message(GRID), 3, RngStream(6))
    for it in bundle.iterates[1:]:
        np.testing.assert_array_equal(it.values, bundle.noise.values)


def test_bundle_coupling_reconstructs_iterates_from_shared_noise():
    f = drift_from_affine(0.0, 1.0, 0.5, lipschitz=2.0, growth=8.0)
    law = constant_gaussian_message(GRID)
    bundle = run_iteration(f, G1, law, 3, RngStream(7))
    y = Path.zeros(GRID)
    for n in range(1, 4):
        y = picard_step(f, G1, bundle.message, y, bundle.noise)
        np.testing.assert_array_equal(y.values, bundle.iterates[n].values)


def test_reference_is_nearly_fixed():
    f = drift_from_affine(0.0, 1.0, 0.5, lipschitz=2.0, growth=8.0)
    law = constant_gaussian_message(GRID)
    bundle = run_iteration(f, G1, law, 4, RngStream(8))
    stepped = picard_step(f, G1, bundle.message, bundle.reference, bundle.noise)
    residual = sup_norm(Path(GRID, stepped.values - bundle.reference.values))
    last_gap = sup_norm(Path(GRID, bundle.iterates[4].values - bundle.iterates[3].values))
    assert residual <= last_gap * 1e-3 + 1e-12


def test_successive_gaps_decay_factorially():
    # declared envelope: scale * (rate*T)^n / n! dominates the estimates
    from picardmc import compute_bounds, picard_decay_sweep

    f = drift_from_affine(0.0, 1.0, 0.5, lipschitz=2.0, growth=8.0)
    law = constant_gaussian_message(TimeGrid(1.0, 128))
    reports = picard_decay_sweep(f, G1, law, 5, 3000, RngStream(9), workers=2)
    for rep in reports:
        assert rep.estimate <= rep.bound + 3 * rep.stderr
    estimates = [rep.estimate for rep in reports]
    assert estimates[1] < estimates[0] and estimates[-1] < estimates[1] * 1e-2


def test_invert_noise_first_order_formula():
    f = drift_from_affine(0.2, 1.0, 0.0, lipschitz=1.0, growth=3.0)
    gen = RngStream(10).generator()
    x = Path(GRID, gen.standard_normal(GRID.steps + 1))
    y = sample_brownian(GRID, RngStream(11))
    w = invert_noise(f, x, y, 1)
    # order 1 rearranges the Euler step around the zero path
    expect = np.zeros(GRID.steps + 1)
    for i in range(1, GRID.steps + 1):
        drift_sum = sum(0.2 + x.values[j] for j in range(i)) * GRID.dt
        expect[i] = y.values[i] - drift_sum
    np.testing.assert_allclose(w.values, expect, rtol=1e-12, atol=1e-13)


def test_invert_noise_zero_drift_is_identity():
    f = drift_from_affine(0.0, 0.0, 0.0, lipschitz=1.0, growth=1.0)
    y = sample_brownian(GRID, RngStream(12))
    w = invert_noise(f, _const_path(GRID, 0.0), y, 2)
    np.testing.assert_array_equal(w.values, y.values)


@pytest.mark.parametrize(
    "f",
    [
        drift_from_affine(0.0, 1.0, 0.5, lipschitz=2.0, growth=8.0),
        drift_from_expression("x(t) + supy(t)/2", lipschitz=1.0, growth=4.0),
        drift_from_expression("t - y(t)/2", lipschitz=0.25, growth=3.0),
    ],
)
def test_invert_noise_round_trip(f):
    law = constant_gaussian_message(GRID)
    gen = RngStream(13).generator()
    x = law.sample(gen)
    w = sample_brownian(GRID, RngStream(14))
    y3 = final_iterate_batch(f, G1, GRID, x.values[None, :], w.values[None, :], 3)[0]
    w_rec = invert_noise(f, x, Path(GRID, y3), 3)
    assert sup_norm(Path(GRID, w_rec.values - w.values)) <= 1e-10
    y_re = final_iterate_batch(f, G1, GRID, x.values[None, :], w_rec.values[None, :], 3)[0]
    assert sup_norm(Path(GRID, y_re - y3)) <= 1e-10


def test_invert_noise_validates_inputs():
    f = drift_from_affine(0.0, 1.0, 0.0, lipschitz=1.0, growth=2.0)
    y = sample_brownian(GRID, RngStream(15))
    with pytest.raises(ValueError):
        invert_noise(f, _const_path(GRID, 0.0), y, 0)
    shifted = Path(GRID, y.values + 1.0)
    with pytest.raises(ValueError):
        invert_noise(f, _const_path(GRID, 0.0), shifted, 1)


def test_general_diffusion_step():
    # multiplicative noise feeds through the increment term
    from picardmc.model import DiffusionFunctional

    g = DiffusionFunctional(
        matrix_fn=lambda times, y: 1.0 + 0.25 * np.cos(y),
        lipschitz=0.0625,
        growth=2.0,
        inv_bound=4.0 / 3.0,
    )
    f = drift_from_affine(0.5, 0.0, 0.0, lipschitz=1.0, growth=2.0)
    w = sample_brownian(GRID, RngStream(16))
    out = picard_step(f, g, _const_path(GRID, 0.0), w, w)
    expect = np.zeros(GRID.steps + 1)
    for i in range(GRID.steps):
        gv = 1.0 + 0.25 * np.cos(w.values[i])
        expect[i + 1] = expect[i] + 0.5 * GRID.dt + gv * (w.values[i + 1] - w.values[i])
    np.testing.assert_allclose(out.values, expect, rtol=1e-12, atol=1e-14)
