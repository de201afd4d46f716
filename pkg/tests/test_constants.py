import math

import numpy as np
import pytest

from fracvar.constants import (
    SingularityError,
    angular_kernel_K,
    bubble_constants,
    kernel_H,
    lebesgue_power_integral,
    lebesgue_power_quadrature,
    sharp_constant_reference,
    sphere_surface,
)

PI3 = math.pi**3


def test_lebesgue_closed_form_values():
    # (n=6, alpha=6) -> pi^3 Gamma(3)/Gamma(6) = pi^3/60
    assert lebesgue_power_integral(6, 6.0) == pytest.approx(PI3 / 60.0, rel=1e-14)
    # (n=1, alpha=1) -> pi
    assert lebesgue_power_integral(1, 1.0) == pytest.approx(math.pi, rel=1e-14)


def test_lebesgue_divergence():
    with pytest.raises(ValueError):
        lebesgue_power_integral(4, 2.0)
    with pytest.raises(ValueError):
        lebesgue_power_integral(6, 2.9)


def test_lebesgue_matches_radial_quadrature():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = int(rng.integers(1, 9))
        alpha = n / 2.0 + 0.1 + rng.uniform(0.0, 6.0)
        a = lebesgue_power_integral(n, alpha)
        b = lebesgue_power_quadrature(n, alpha)
        assert b == pytest.approx(a, rel=1e-10)


def test_kernel_at_zero_is_sphere_measure():
    for n, s in [(6, 0.5), (5, 0.3), (3, 0.2)]:
        assert angular_kernel_K(n, s, 0.0) == pytest.approx(sphere_surface(n), rel=1e-11)


def test_kernel_inversion_identity():
    # K(1/xi) = xi^(n+2s) K(xi) at xi=2, n=6, s=0.5
    n, s, xi = 6, 0.5, 2.0
    lhs = angular_kernel_K(n, s, 1.0 / xi)
    rhs = xi ** (n + 2 * s) * angular_kernel_K(n, s, xi)
    assert lhs == pytest.approx(rhs, rel=1e-8)
    # and at a second point with different (n, s)
    n, s, xi = 5, 0.3, 3.5
    assert angular_kernel_K(n, s, 1.0 / xi) == pytest.approx(
        xi ** (n + 2 * s) * angular_kernel_K(n, s, xi), rel=1e-8
    )


def test_kernel_far_field_scaling():
    # K(tau) * tau^(n+2s) -> sigma(S^{n-1}) as tau -> infinity
    n, s = 6, 0.5
    for tau in (1e3, 1e4):
        assert angular_kernel_K(n, s, tau) * tau ** (n + 2 * s) == pytest.approx(
            sphere_surface(n), rel=1e-5
        )


def test_kernel_singularity_floor():
    with pytest.raises(SingularityError):
        angular_kernel_K(6, 0.5, 1.0 + 1e-7)
    with pytest.raises(SingularityError):
        angular_kernel_K(6, 0.5, 1.0 - 1e-8)


def test_kernel_H_positive_continuous_and_tail():
    n, s = 6, 0.5
    taus = np.linspace(1.001, 50.0, 200)
    vals = np.array([kernel_H(n, s, t) for t in taus])
    assert np.all(vals > 0.0)
    # continuity: halving the step halves the increment (no jumps); checked
    # away from tau=1 where the (tau^2-1)^{1+2s} factor is legitimately steep
    t0 = np.linspace(1.05, 50.0, 64)
    h = 0.01
    big = np.array([kernel_H(n, s, t + 2 * h) - kernel_H(n, s, t) for t in t0])
    small = np.array([kernel_H(n, s, t + h) - kernel_H(n, s, t) for t in t0])
    np.testing.assert_allclose(big, 2.0 * small, rtol=0.02)
    # H(tau) ~ tau^{2s} at infinity: ratio H(2T)/H(T) -> 2^{2s}
    ratio = kernel_H(n, s, 4000.0) / kernel_H(n, s, 2000.0)
    assert ratio == pytest.approx(2.0 ** (2 * s), rel=1e-3)


def test_bubble_constants_6_05():
    cs = bubble_constants(6, 0.5)
    assert cs.Kqs == pytest.approx(PI3 / 60.0, rel=1e-12)
    assert cs.K2s == pytest.approx(PI3 / 24.0, rel=1e-12)
    # seminorm constant of the unit bubble against the spectral closed form
    assert cs.Ks == pytest.approx(85.4568172067, rel=1e-7)
    assert cs.Ss == pytest.approx(148.137407734, rel=1e-7)
    # defining relation Ss * Kqs^(2/q_s) = Ks
    assert cs.Ss * cs.Kqs ** (2.0 / cs.q_s) == pytest.approx(cs.Ks, rel=1e-12)


def test_bubble_constants_drop_in_q():
    cs = bubble_constants(6, 0.5, q=2.2)
    # alpha = q(n-2s)/2 = 2.2 * 5 / 2
    assert cs.Kq_s == pytest.approx(lebesgue_power_integral(6, 5.5), rel=1e-13)


@pytest.mark.parametrize(
    "n,s,ks",
    [
        (5, 0.5, 120.173649197),
        (7, 0.3, 49.7700797652),
        (6, 0.3, 89.7655642927),
        (4, 0.4, 135.290404214),
        (3, 0.2, 178.230885666),
    ],
)
def test_seminorm_constant_across_regimes(n, s, ks):
    assert bubble_constants(n, s).Ks == pytest.approx(ks, rel=2e-7)


def test_sharp_constant_closed_form_agrees():
    for n, s in [(6, 0.5), (5, 0.5), (3, 0.2)]:
        assert bubble_constants(n, s).Ss == pytest.approx(sharp_constant_reference(n, s), rel=2e-7)


def test_constant_set_respects_admissibility():
    with pytest.raises(ValueError):
        bubble_constants(3, 0.9)  # K2s diverges: n - 2s <= n/2
