import math

import numpy as np
import pytest

from picardmc import compute_bounds


def test_unit_constants_regression():
    b = compute_bounds(1.0, 1.0, 1.0, 1.0)
    assert b.moment_scale == 20.0
    assert b.moment_rate == 10.0
    assert b.decay_scale == 20.0
    assert b.decay_rate == 10.0
    assert b.tail_scale == 20.0 * math.exp(10.0)


def test_bounded_constants_and_moment_cap():
    b = compute_bounds(1.0, 1.0, 1.0, 1.0, peak_power=1.0, p_exponent=2.0)
    assert b.decay_scale_bounded == 10.0
    assert b.moment_cap() == math.exp(3.0)
    assert b.moment_cap(p=-1.0) == 1.0


def test_divergence_curve_first_value():
    # direct substitution at order 1: sqrt(front) + front/2 with front = 20
    b = compute_bounds(1.0, 1.0, 1.0, 1.0)
    assert b.kl_rate(1) == pytest.approx(math.sqrt(20.0) + 10.0, rel=1e-12)


def test_picard_curve_ratio_is_factorial():
    b = compute_bounds(1.3, 0.7, 2.0, 0.5)
    q = b.decay_rate * b.horizon
    for n in range(0, 12):
        assert b.picard_l2(n + 1) / b.picard_l2(n) == pytest.approx(
            q / (n + 1), rel=1e-12
        )


def test_curves_survive_deep_orders():
    b = compute_bounds(2.0, 8.0, 1.0, 1.0)
    assert b.picard_l2(500) == 0.0 or b.picard_l2(500) < 1e-300
    assert math.isfinite(b.kl_rate(300))


def test_divergence_curve_eventually_decreasing_and_crosses():
    gen = np.random.default_rng(5)
    for _ in range(20):
        k, l, t, m = 10.0 ** gen.uniform(-1, 1, size=4)
        b = compute_bounds(k, l, t, m)
        n_star = b.first_n_below(1e-2)
        assert b.kl_rate(n_star) < 1e-2
        if n_star > 1:
            assert b.kl_rate(n_star - 1) >= 1e-2
        # strictly decreasing beyond the crossing point
        assert b.kl_rate(n_star + 1) < b.kl_rate(n_star)


@pytest.mark.parametrize("field", ["lipschitz", "growth", "horizon", "message_moment"])
def test_bounds_monotone_in_each_input(field):
    base = dict(lipschitz=0.8, growth=1.2, horizon=0.9, message_moment=0.6)
    lo = compute_bounds(**base)
    hi_args = dict(base)
    hi_args[field] *= 1.5
    hi = compute_bounds(**hi_args)
    for n in (0, 1, 3, 6):
        assert hi.picard_l2(n) >= lo.picard_l2(n)
    for n in (1, 2, 4):
        assert hi.kl_rate(n) >= lo.kl_rate(n)


def test_mi_rate_shape_and_multiplier():
    b = compute_bounds(1.0, 1.0, 0.25, 1.0, peak_power=1.0, p_exponent=2.0)
    assert b.mi_rate(3, multiplier=2.5) == pytest.approx(2.5 * b.mi_rate(3), rel=1e-12)
    # sharper exponent near 1 steepens the first term
    assert b.mi_rate(8, p=1.0) <= b.mi_rate(8, p=4.0)


def test_domain_errors():
    with pytest.raises(ValueError):
        compute_bounds(-1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        compute_bounds(1.0, 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        compute_bounds(1.0, 1.0, 1.0, -0.5)
    with pytest.raises(ValueError):
        compute_bounds(1.0, 1.0, 1.0, 1.0, peak_power=0.0)
    with pytest.raises(ValueError):
        compute_bounds(1.0, 1.0, 1.0, 1.0, p_exponent=0.5)
    b = compute_bounds(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        b.kl_rate(0)
    with pytest.raises(ValueError):
        b.moment_cap()
