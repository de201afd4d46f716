import math

import numpy as np
import pytest

from fracvar.bubble import Bubble, Cutoff, TruncatedBubble, eval_U, eval_u, lq_norm, truncated_bubble
from fracvar.constants import lebesgue_power_integral


def test_bubble_pointwise_values():
    b = Bubble(eps=1.0, s=0.5, n=6)
    assert b.radial_value(0.0) == pytest.approx(1.0, abs=0.0)
    # (eps/(eps^2+r^2))^((n-2s)/2) at r=1, eps=1 -> 2^(-2.5)
    assert b.radial_value(1.0) == pytest.approx(2.0**-2.5, rel=1e-15)
    assert eval_U(b, np.zeros(6)) == pytest.approx(1.0)


def test_bubble_rescaling_identity():
    # U_eps(x) = eps^{-(n-2s)/2} U_1(x/eps)
    n, s, eps = 6, 0.5, 0.3
    b_eps = Bubble(eps=eps, s=s, n=n)
    b_one = Bubble(eps=1.0, s=s, n=n)
    alpha = (n - 2 * s) / 2.0
    rr = np.linspace(0.0, 4.0, 57)
    got = b_eps.radial_value(rr)
    want = eps**-alpha * b_one.radial_value(rr / eps)
    np.testing.assert_allclose(got, want, rtol=1e-13)


def test_bubble_requires_positive_width():
    with pytest.raises(ValueError):
        Bubble(eps=0.0, s=0.5, n=6)


def test_bubble_derivative_matches_finite_difference():
    b = Bubble(eps=0.4, s=0.5, n=6)
    rr = np.array([0.05, 0.3, 0.9, 2.5])
    h = 1e-6
    fd = (b.radial_value(rr + h) - b.radial_value(rr - h)) / (2 * h)
    np.testing.assert_allclose(b.radial_deriv(rr), fd, rtol=1e-8)


def test_cutoff_plateau_support_and_smoothness():
    c = Cutoff(eta=1.0)
    rr_in = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(c.radial_value(rr_in), 1.0, atol=0.0)
    rr_out = np.linspace(2.0, 5.0, 7)
    np.testing.assert_allclose(c.radial_value(rr_out), 0.0, atol=0.0)
    mid = c.radial_value(np.linspace(1.0, 2.0, 101))
    assert np.all(np.diff(mid) <= 1e-15)  # monotone down
    # the blend satisfies psi(t) + psi(1-t) = 1 (smooth partition)
    t = np.linspace(0.05, 0.95, 19)
    vals = c.radial_value(1.0 + t) + c.radial_value(2.0 - t)
    np.testing.assert_allclose(vals, 1.0, atol=1e-14)


def test_cutoff_derivative_matches_finite_difference():
    c = Cutoff(eta=1.0)
    rr = np.array([1.1, 1.5, 1.9])
    h = 1e-7
    fd = (c.radial_value(rr + h) - c.radial_value(rr - h)) / (2 * h)
    np.testing.assert_allclose(c.radial_deriv(rr), fd, rtol=1e-6, atol=1e-12)


def test_truncated_bubble_support_and_product_rule():
    tb = truncated_bubble(0.2, 0.5, 6, 1.0)
    assert tb.support == 2.0
    assert tb.radial_value(2.0) == 0.0 and tb.radial_value(2.5) == 0.0
    assert tb.radial_value(0.5) == pytest.approx(tb.bubble.radial_value(0.5), rel=1e-15)
    rr = np.array([0.2, 0.8, 1.3, 1.7])
    h = 1e-6
    fd = (tb.radial_value(rr + h) - tb.radial_value(rr - h)) / (2 * h)
    np.testing.assert_allclose(tb.radial_deriv(rr), fd, rtol=1e-6)
    x = np.zeros(6)
    x[0] = 0.8
    assert eval_u(tb, x) == pytest.approx(tb.radial_value(0.8))


def test_critical_norm_is_scale_invariant():
    # int U_eps^{q_s} = Kqs independent of eps
    n, s = 6, 0.5
    qs = 2.0 * n / (n - 2 * s)
    kqs = lebesgue_power_integral(n, n)
    for eps in (1.0, 0.35, 0.12):
        b = Bubble(eps=eps, s=s, n=n)
        assert lq_norm(b, qs, r_max=1e4 * eps) == pytest.approx(kqs, rel=1e-8)


def test_l2_norm_of_unit_bubble_closed_form():
    # int U_1^2 = lebesgue_power_integral(n, n-2s)
    n, s = 6, 0.5
    b = Bubble(eps=1.0, s=s, n=n)
    want = lebesgue_power_integral(n, n - 2 * s)
    assert lq_norm(b, 2.0, r_max=1e6) == pytest.approx(want, rel=1e-8)


def test_truncation_error_small_at_small_eps():
    # the cutoff removes only O(eps^n) of the critical mass
    n, s = 6, 0.5
    qs = 2.4
    kqs = lebesgue_power_integral(n, n)
    tb = truncated_bubble(0.05, s, n, 1.0)
    assert abs(lq_norm(tb, qs) - kqs) < 5.0 * 0.05**n * kqs


def test_lq_norm_input_validation():
    b = Bubble(eps=1.0, s=0.5, n=6)
    with pytest.raises(ValueError):
        lq_norm(b, 0.5)
    with pytest.raises(TypeError):
        lq_norm(lambda r: r, 2.0)


def test_subcritical_norm_scaling_exponent():
    # int u_eps^q ~ eps^{n - q(n-2s)/2} for q in (q* window): check the
    # measured slope on a crude two-point ratio
    n, s, q = 6, 0.5, 2.2
    e1, e2 = 0.1, 0.05
    v1 = lq_norm(truncated_bubble(e1, s, n, 1.0), q)
    v2 = lq_norm(truncated_bubble(e2, s, n, 1.0), q)
    slope = math.log(v1 / v2) / math.log(e1 / e2)
    assert slope == pytest.approx(n - q * (n - 2 * s) / 2.0, abs=0.05)
