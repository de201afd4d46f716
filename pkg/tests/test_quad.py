import math
import warnings

import numpy as np
import pytest

from fracvar.bubble import Bubble, truncated_bubble
from fracvar.constants import bubble_constants, sphere_surface
from fracvar.problem import WeightModel
from fracvar.quad import (
    PanelSpec,
    QuadratureError,
    bilinear_radial,
    mc_reference_ks,
    radial_power_integral,
    seminorm_mc,
    seminorm_radial,
    weighted_energy,
)

N6, S6 = 6, 0.5


def test_zero_profile_is_zero():
    est = seminorm_radial(lambda r: np.zeros_like(r), None, N6, S6, 2.0)
    assert est.value == 0.0
    assert est.method == "RadialDeterministic"


def test_weight_linearity():
    tb = truncated_bubble(0.5, S6, N6, 1.0)
    w1 = WeightModel.truncated_power(n=N6, p0=1.0, kappa=0.3, k=2, eta=1.0)
    w2 = WeightModel.truncated_power(n=N6, p0=2.0, kappa=0.6, k=2, eta=1.0)
    a = seminorm_radial(tb, w1, N6, S6, tb.support).value
    b = seminorm_radial(tb, w2, N6, S6, tb.support).value
    assert b == pytest.approx(2.0 * a, rel=1e-10)


def test_refinement_error_estimate_is_small():
    tb = truncated_bubble(0.4, S6, N6, 1.0)
    est = seminorm_radial(tb, None, N6, S6, tb.support)
    assert est.abs_error < 1e-6 * est.value


def test_nonconvergence_error_on_coarse_grid():
    tb = truncated_bubble(0.2, S6, N6, 1.0)
    panels = PanelSpec(r_breaks=(0.0, 1.0, 2.0), n_r=4, n_t=6, tol=1e-12)
    with pytest.raises(QuadratureError):
        seminorm_radial(tb, None, N6, S6, tb.support, panels=panels)


def test_bubble_seminorm_vs_mc_oracle():
    # untruncated unit bubble, w = 1: deterministic vs independent MC
    det = bubble_constants(N6, S6).Ks
    mc = mc_reference_ks(N6, S6, N=2_000_000, seed=12)
    assert abs(mc.value - det) <= 3.0 * mc.abs_error
    assert abs(mc.value - det) / det < 5e-3


def test_cross_method_truncated_weighted():
    # (n=6, s=0.5, eps=0.5, TruncatedPower weight): radial vs box sampler
    tb = truncated_bubble(0.5, S6, N6, 1.0)
    w = WeightModel.truncated_power(n=N6, p0=1.0, kappa=1.0, k=2, eta=1.0)
    det = seminorm_radial(tb, w, N6, S6, tb.support)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mc = seminorm_mc(tb, w, N6, S6, N=600_000, seed=4)
    sigma = math.hypot(det.abs_error, mc.abs_error)
    assert abs(mc.value - det.value) <= 3.0 * sigma


def test_mc_zero_profile():
    est = seminorm_mc(lambda pts: np.zeros(len(pts)), None, N6, S6, box=2.0, N=10_000, seed=1)
    assert est.value == 0.0 and est.abs_error == 0.0
    assert est.method == "MonteCarlo" and est.seed == 1


def test_mc_translation_invariance():
    tb = truncated_bubble(0.8, S6, N6, 1.0)
    shift = np.zeros(N6)
    shift[0] = 0.7

    def centered(pts):
        return tb.radial_value(np.linalg.norm(pts, axis=1))

    def shifted(pts):
        return tb.radial_value(np.linalg.norm(pts - shift, axis=1))

    box = 1.5 * (tb.support + 0.7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = seminorm_mc(centered, None, N6, S6, box=box, N=400_000, seed=9)
        b = seminorm_mc(shifted, None, N6, S6, box=box, N=400_000, seed=10)
    sigma = math.hypot(a.abs_error, b.abs_error)
    assert abs(a.value - b.value) <= 3.0 * sigma


def test_mc_reproducible_per_seed():
    tb = truncated_bubble(0.8, S6, N6, 1.0)
    a = seminorm_mc(tb, None, N6, S6, N=50_000, seed=21)
    b = seminorm_mc(tb, None, N6, S6, N=50_000, seed=21)
    assert a.value == b.value and a.abs_error == b.abs_error


def test_mc_variance_warning():
    # sharply concentrated profile inside a large box: uniform sampling
    # cannot resolve the peak, so the SE must announce itself
    tb = truncated_bubble(0.2, S6, N6, 1.0)
    with pytest.warns(RuntimeWarning):
        seminorm_mc(tb, None, N6, S6, N=30_000, seed=2)


def test_bilinear_symmetry_and_cauchy_schwarz():
    u = truncated_bubble(0.5, S6, N6, 1.0)
    v = truncated_bubble(0.9, S6, N6, 1.0)
    w = WeightModel.truncated_power(n=N6, p0=1.0, kappa=0.2, k=2, eta=1.0)
    uv = bilinear_radial(u, v, w, N6, S6, 2.0)
    vu = bilinear_radial(v, u, w, N6, S6, 2.0)
    assert uv == pytest.approx(vu, rel=1e-12)
    nu = seminorm_radial(u, w, N6, S6, 2.0).value
    nv = seminorm_radial(v, w, N6, S6, 2.0).value
    assert uv**2 <= nu * nv * (1.0 + 1e-10)
    uu = bilinear_radial(u, u, w, N6, S6, 2.0)
    assert uu == pytest.approx(nu, rel=1e-9)


def test_norm_equivalence_bounds():
    tb = truncated_bubble(0.6, S6, N6, 1.0)
    w = WeightModel.truncated_power(n=N6, p0=1.3, kappa=0.8, k=2, eta=1.0)
    plain = seminorm_radial(tb, None, N6, S6, tb.support).value
    weighted = seminorm_radial(tb, w, N6, S6, tb.support).value
    assert 1.3 * plain <= weighted * (1.0 + 1e-12)
    assert weighted <= w.sup() * plain * (1.0 + 1e-12)


def test_quadratic_homogeneity():
    tb = truncated_bubble(0.5, S6, N6, 1.0)
    c = 1.73205

    def scaled(r):
        return c * tb.radial_value(r)

    base = seminorm_radial(tb, None, N6, S6, tb.support).value
    scl = seminorm_radial(scaled, None, N6, S6, tb.support).value
    assert scl == pytest.approx(c**2 * base, rel=1e-10)


def test_weighted_energy_components():
    tb = truncated_bubble(0.5, S6, N6, 1.0)
    w = WeightModel.constant(n=N6, p0=2.0)
    semi = seminorm_radial(tb, None, N6, S6, tb.support).value
    q2 = radial_power_integral(tb, 2.0, N6)
    lam = 0.7
    e = weighted_energy(tb, w, N6, S6, lam, 2.0)
    assert e == pytest.approx(2.0 * semi - lam * q2, rel=1e-8)
    # lambda = 0, w = p0: E = p0 * seminorm
    assert weighted_energy(tb, w, N6, S6, 0.0, 2.0) == pytest.approx(2.0 * semi, rel=1e-8)


def test_full_functional_zero_at_zero():
    z = lambda r: np.zeros_like(r)
    val = weighted_energy(z, None, N6, S6, 1.0, 2.0, functional=True, r_max=2.0)
    assert val == 0.0


def test_radial_power_integral_matches_closed_form():
    b = Bubble(eps=1.0, s=S6, n=N6)
    from fracvar.constants import lebesgue_power_integral

    got = radial_power_integral(b, 2.4, N6, r_max=1e4)
    assert got == pytest.approx(lebesgue_power_integral(6, 6.0), rel=1e-7)


def test_deterministic_estimate_reports_panels():
    tb = truncated_bubble(0.5, S6, N6, 1.0)
    est = seminorm_radial(tb, None, N6, S6, tb.support)
    assert est.samples_or_panels > 10
    assert est.seed is None
