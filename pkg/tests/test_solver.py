import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import quad as sp_quad
from scipy.optimize import minimize as sp_minimize

from fracvar.bubble import truncated_bubble
from fracvar.constants import bubble_constants, sphere_surface
from fracvar.problem import ProblemParams, critical_exponent, weight_from_params
from fracvar.quad import PanelSpec, seminorm_radial
from fracvar.solver import (
    MinimizeOptions,
    RadialField,
    SolverError,
    assemble,
    euler_residual,
    first_eigenvalue,
    interpolate_field,
    make_grid,
    minimize_S,
    power_gradient,
    power_integral,
    refinement_check,
)

P = ProblemParams(n=6, s=0.5, k=2, kappa=0.05, lam=21.0, q=2.0, p0=1.0, eta=1.0, R=5.0)
P_FREE = ProblemParams(n=6, s=0.5, k=2, kappa=0.0, lam=0.0, q=2.0, p0=1.0, eta=1.0, R=5.0)
QS = critical_exponent(6, 0.5)
LEVEL = bubble_constants(6, 0.5).Ss


@pytest.fixture(scope="module")
def op128():
    return assemble(P, 128)


@pytest.fixture(scope="module")
def ground(op128):
    return minimize_S(P, op128)


def test_make_grid_shape():
    g = make_grid(5.0, 128)
    assert len(g) == 129
    assert g[0] == 0.0 and g[-1] == pytest.approx(5.0)
    assert np.all(np.diff(g) > 0.0)
    assert g[2] / g[1] == pytest.approx(1.05, rel=1e-12)


def test_field_validation():
    nodes = make_grid(2.0, 8)
    with pytest.raises(ValueError):
        RadialField(nodes, np.ones(len(nodes)))  # nonzero at R
    with pytest.raises(ValueError):
        RadialField(nodes[::-1], np.zeros(len(nodes)))
    bad = np.zeros(len(nodes))
    bad[1] = math.nan
    with pytest.raises(ValueError):
        RadialField(nodes, bad)


def test_field_interpolates_and_vanishes_outside():
    nodes = make_grid(2.0, 16)
    vals = np.exp(-nodes)
    vals[-1] = 0.0
    f = RadialField(nodes, vals)
    assert f(nodes[3]) == pytest.approx(vals[3])
    mid = 0.5 * (nodes[4] + nodes[5])
    assert f(mid) == pytest.approx(0.5 * (vals[4] + vals[5]))
    assert f(2.5) == 0.0
    assert f.radial_deriv(2.5) == 0.0
    assert f.radial_deriv(mid) == pytest.approx((vals[5] - vals[4]) / (nodes[5] - nodes[4]))


def test_stiffness_symmetric(op128):
    assert np.max(np.abs(op128.A - op128.A.T)) == 0.0
    assert np.max(np.abs(op128.Mq - op128.Mq.T)) == 0.0


def test_weight_doubling_doubles_stiffness():
    double = ProblemParams(n=6, s=0.5, k=2, kappa=0.1, lam=0.0, q=2.0, p0=2.0, eta=1.0, R=5.0)
    single = ProblemParams(n=6, s=0.5, k=2, kappa=0.05, lam=0.0, q=2.0, p0=1.0, eta=1.0, R=5.0)
    a = assemble(single, 48)
    b = assemble(double, 48)
    assert np.allclose(b.A, 2.0 * a.A, rtol=1e-10, atol=0.0)
    assert np.allclose(b.Mq, a.Mq, rtol=0.0, atol=0.0)


def test_quadratic_form_matches_profile_quadrature(op128):
    fld = interpolate_field(truncated_bubble(0.5, 0.5, 6, eta=1.0), op128.nodes)
    qa = float(fld.dofs @ op128.A @ fld.dofs)
    est = seminorm_radial(
        fld, weight_from_params(P), 6, 0.5, 5.0,
        panels=PanelSpec(r_breaks=tuple(op128.nodes), estimate_error=False),
    )
    assert qa == pytest.approx(est.value, rel=0.02)
    # the two quadratures agree far more tightly than the contract requires
    assert qa == pytest.approx(est.value, rel=5e-4)


def test_mass_matrix_exact_on_linear_ramp(op128):
    vals = 1.0 - op128.nodes / 5.0
    vals[-1] = 0.0
    ramp = RadialField(op128.nodes, vals)
    exact = sphere_surface(6) * 5.0**6 * (1.0 / 6.0 - 2.0 / 7.0 + 1.0 / 8.0)
    assert float(ramp.dofs @ op128.Mq @ ramp.dofs) == pytest.approx(exact, rel=1e-13)


def test_power_integral_against_adaptive_quadrature():
    nodes = make_grid(3.0, 32)
    vals = 1.0 / (1.0 + nodes**2)
    vals[-1] = 0.0
    f = RadialField(nodes, vals)
    ref, _ = sp_quad(lambda r: np.abs(f.radial_value(r)) ** QS * r**5, 0.0, 3.0,
                     points=list(nodes[1:-1]), limit=400, epsabs=1e-13, epsrel=1e-13)
    assert power_integral(f, QS, 6) == pytest.approx(sphere_surface(6) * ref, rel=1e-8)
    assert power_integral(f, QS, 6, npts=40) == pytest.approx(sphere_surface(6) * ref, rel=1e-12)


def test_power_gradient_matches_finite_differences():
    nodes = make_grid(2.0, 24)
    vals = np.exp(-(nodes**2))
    vals[-1] = 0.0
    f = RadialField(nodes, vals)
    g = power_gradient(f, QS, 6)
    rng = np.random.default_rng(0)
    for i in rng.choice(len(nodes) - 1, size=4, replace=False):
        h = 1e-6
        up, dn = vals.copy(), vals.copy()
        up[i] += h
        dn[i] -= h
        up[-1] = dn[-1] = 0.0
        fd = (power_integral(RadialField(nodes, up), QS, 6)
              - power_integral(RadialField(nodes, dn), QS, 6)) / (2.0 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-12)


def test_assembly_probe_tolerance():
    with pytest.raises(SolverError):
        assemble(P, 32, tol=1e-16)
    op = assemble(P, 32, tol=0.1)
    assert op.meta["probe_rel_err"] < 1e-3


def test_first_eigenvalue_against_dense_solver(op128):
    lam1, field = first_eigenvalue(op128)
    oracle = sla.eigh(op128.A, op128.Mq, subset_by_index=[0, 0], eigvals_only=True)[0]
    assert lam1 > 0.0
    assert lam1 == pytest.approx(oracle, rel=1e-8)
    v = field.dofs
    assert float(v @ op128.A @ v) / float(v @ op128.Mq @ v) == pytest.approx(lam1, rel=1e-8)
    resid = np.linalg.norm(op128.A @ v - lam1 * op128.Mq @ v)
    assert resid <= 1e-8 * np.linalg.norm(op128.A @ v)


def test_eigenvalue_scales_with_weight():
    double = ProblemParams(n=6, s=0.5, k=2, kappa=0.1, lam=0.0, q=2.0, p0=2.0, eta=1.0, R=5.0)
    single = ProblemParams(n=6, s=0.5, k=2, kappa=0.05, lam=0.0, q=2.0, p0=1.0, eta=1.0, R=5.0)
    l1, _ = first_eigenvalue(assemble(single, 48))
    l2, _ = first_eigenvalue(assemble(double, 48))
    assert l2 == pytest.approx(2.0 * l1, rel=1e-8)


def test_eigenvalue_dominates_unweighted():
    lw, _ = first_eigenvalue(assemble(P, 48))
    lu, _ = first_eigenvalue(assemble(P_FREE, 48))
    assert lw >= P.p0 * lu * (1.0 - 1e-12)


def test_coercivity_below_lambda1(op128):
    lam1, _ = first_eigenvalue(op128)
    pencil = op128.A - 0.9 * lam1 * op128.Mq
    rng = np.random.default_rng(7)
    for _ in range(100):
        v = rng.standard_normal(op128.size)
        assert float(v @ pencil @ v) > 0.0


def test_ground_state_below_level(ground):
    assert ground.converged
    assert ground.status == "converged"
    assert ground.constraint_residual <= 1e-8
    assert ground.energy < 0.98 * P.p0 * LEVEL
    assert ground.below_threshold


def test_ground_state_is_stationary(ground, op128):
    assert euler_residual(P, op128, ground.field, ground.energy) <= 1e-4


def test_random_field_is_not_stationary(op128):
    rng = np.random.default_rng(3)
    vals = np.abs(rng.standard_normal(len(op128.nodes)))
    vals[-1] = 0.0
    f = RadialField(op128.nodes, vals)
    nrm = power_integral(f, QS, 6) ** (1.0 / QS)
    f = RadialField(op128.nodes, f.values / nrm)
    assert euler_residual(P, op128, f, float(f.dofs @ (op128.A - 21.0 * op128.Mq) @ f.dofs)) > 1e-2


def test_ground_state_matches_sequential_quadratic_oracle():
    op = assemble(P, 48)
    Q = op.A - P.lam * op.Mq
    u0 = interpolate_field(truncated_bubble(0.2, 0.5, 6, eta=1.0), op.nodes).dofs.copy()
    u0 /= power_integral(RadialField(op.nodes, np.append(u0, 0.0)), QS, 6) ** (1.0 / QS)
    oracle = sp_minimize(
        lambda v: float(v @ Q @ v), u0, jac=lambda v: 2.0 * (Q @ v),
        constraints=[dict(
            type="eq",
            fun=lambda v: power_integral(RadialField(op.nodes, np.append(v, 0.0)), QS, 6) - 1.0,
            jac=lambda v: power_gradient(RadialField(op.nodes, np.append(v, 0.0)), QS, 6),
        )],
        method="SLSQP", options=dict(maxiter=2000, ftol=1e-14),
    )
    assert oracle.success
    res = minimize_S(P, op)
    assert res.energy == pytest.approx(oracle.fun, rel=1e-5)


def test_minimizer_nonnegative_from_nonnegative_init(ground):
    assert ground.field.values.min() >= -1e-8


def test_energy_monotone_in_iteration_budget(op128):
    energies = [
        minimize_S(P, op128, opts=MinimizeOptions(max_iter=k)).energy for k in (5, 15, 30, 60)
    ]
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))


def test_no_minimizer_at_lambda_zero():
    op = assemble(P_FREE, 96)
    res = minimize_S(P_FREE, op, opts=MinimizeOptions(max_iter=3000))
    assert res.energy >= P_FREE.p0 * LEVEL * (1.0 - 1e-3)
    assert res.energy <= P_FREE.p0 * LEVEL * (1.0 + 1e-2)
    assert not res.below_threshold


def test_concentration_sharpens_under_refinement():
    tops = []
    for M in (64, 160):
        op = assemble(P_FREE, M)
        res = minimize_S(P_FREE, op, opts=MinimizeOptions(max_iter=4000))
        tops.append(np.abs(res.field.values).max())
    assert tops[1] > 1.2 * tops[0]


def test_indefinite_regime_detected(op128):
    lam1, _ = first_eigenvalue(op128)
    huge = ProblemParams(n=6, s=0.5, k=2, kappa=0.05, lam=50.0 * lam1, q=2.0, p0=1.0, eta=1.0, R=5.0)
    res = minimize_S(huge, assemble(huge, 64))
    assert res.status == "indefinite_regime"
    assert not res.converged


def test_minimize_requires_q2(op128):
    sub = ProblemParams(n=6, s=0.5, k=2, kappa=0.05, lam=1.0, q=2.2, p0=1.0, eta=1.0, R=5.0)
    with pytest.raises(ValueError):
        minimize_S(sub, op128)


def test_refinement_gate():
    e1, e2, rel = refinement_check(P, 96)
    assert rel < 0.02
