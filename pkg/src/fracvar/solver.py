"""Discrete minimization of the weighted Rayleigh problem on radial grids.

Fields are continuous piecewise-linear radial functions on a graded grid
0 = r_0 < ... < r_M = R, extended by zero beyond R.  The weighted Gagliardo
form of two such fields reduces, exactly like the profile quadrature in
:mod:`fracvar.quad`, to core / sliver / outer pieces; each quadrature node
of that reduction touches at most four hat coefficients, so the stiffness
matrix assembles as X^T X for a tall sparse factor X whose rows are the
square-rooted, nonnegative node contributions.  This keeps A symmetric
positive semidefinite by construction and exactly linear in the weight.

The constrained infimum

    S = inf { u^T A u - lam * u^T Mq u : ||I u||_{q_s} = 1 }

(I u the interpolant, its q_s-norm by per-interval Gauss-Legendre panels)
is computed by projected gradient descent with an A-preconditioned descent
direction, tangential projection against the constraint gradient, and
monotone Armijo backtracking; iterates are renormalized after every step,
so the constraint holds to rounding throughout.  An energy dipping below
-10 * p0 * Ss is reported as an indefinite regime (lam at or above the
first eigenvalue) rather than ground round further.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix

from ._panels import gl_rule, panel_nodes
from .bubble import truncated_bubble
from .constants import bubble_constants, kernel_batch, sphere_surface
from .problem import ProblemParams, critical_exponent, weight_from_params
from .quad import _outer_fold, _tau_breaks, _weight_fns


class SolverError(RuntimeError):
    """Assembly or factorization failed (typically quadrature under-resolution)."""


# ---------------------------------------------------------------------------
# Fields and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialField:
    """Continuous piecewise-linear radial function, zero at and beyond R.

    ``values[i]`` is the value at ``nodes[i]``; the last value must be
    exactly zero (Dirichlet exterior condition).  The object quacks like a
    radial profile (``radial_value`` / ``radial_deriv`` / ``support``), so
    the continuum quadratures accept it directly.
    """

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or len(nodes) < 3:
            raise ValueError("need matching 1-d node/value arrays with at least 3 nodes")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0.0):
            raise ValueError("nodes must increase strictly from 0")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if values[-1] != 0.0:
            raise ValueError("field must vanish at the outer node (zero exterior extension)")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @property
    def support(self) -> float:
        return float(self.nodes[-1])

    @property
    def dofs(self) -> np.ndarray:
        """Coefficients at nodes r_0 .. r_{M-1} (the outer node is pinned)."""
        return self.values[:-1]

    def radial_value(self, r):
        r = np.asarray(r, dtype=float)
        return np.interp(r, self.nodes, self.values, right=0.0)

    def radial_deriv(self, r):
        r = np.asarray(r, dtype=float)
        slopes = np.diff(self.values) / np.diff(self.nodes)
        j = np.clip(np.searchsorted(self.nodes, r, side="right") - 1, 0, len(slopes) - 1)
        return np.where((r >= self.nodes[0]) & (r < self.nodes[-1]), slopes[j], 0.0)

    def __call__(self, r):
        return self.radial_value(r)


def make_grid(R: float, M: int = 128, ratio: float = 1.05) -> np.ndarray:
    """Radial nodes 0, R*ratio^(1-M), ..., R: geometric clustering toward 0."""
    if M < 4 or R <= 0.0 or ratio <= 1.0:
        raise ValueError("need M >= 4, R > 0 and ratio > 1")
    j = np.arange(1, M + 1, dtype=float)
    return np.concatenate([[0.0], R * ratio ** (j - M)])


def interpolate_field(profile, nodes: np.ndarray) -> RadialField:
    """Sample a radial profile (or callable) at the nodes; pins the outer node to 0."""
    nodes = np.asarray(nodes, dtype=float)
    fn = profile.radial_value if hasattr(profile, "radial_value") else profile
    values = np.asarray(fn(nodes), dtype=float).copy()
    values[-1] = 0.0
    return RadialField(nodes, values)


def _hat_at(nodes: np.ndarray, pts: np.ndarray):
    """Indices and values of the two hat coefficients covering each point.

    Returns (i0, v0, i1, v1); the Dirichlet node M is mapped to index 0
    with value 0, and points at or beyond r_M evaluate to 0.
    """
    M = len(nodes) - 1
    j = np.clip(np.searchsorted(nodes, pts, side="right") - 1, 0, M - 1)
    theta = (pts - nodes[j]) / (nodes[j + 1] - nodes[j])
    inside = pts < nodes[-1]
    v0 = np.where(inside, 1.0 - theta, 0.0)
    v1 = np.where(inside & (j + 1 < M), theta, 0.0)
    i1 = np.where(j + 1 < M, j + 1, 0)
    return j, v0, i1, v1


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StiffnessOperator:
    """Dense weighted-form matrix A and mass matrix Mq on the hat basis.

    Both matrices carry the full n-dimensional normalization (the sphere
    measure and the ordered-pair doubling), so u^T A u approximates the
    seminorm of the interpolant and u^T Mq u its squared L^2 norm.
    """

    A: np.ndarray
    Mq: np.ndarray
    nodes: np.ndarray
    meta: Mapping[str, float]

    def __post_init__(self) -> None:
        for name in ("A", "Mq", "nodes"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def size(self) -> int:
        return self.A.shape[0]


def _mass_factor(nodes: np.ndarray, n: int, npts: int):
    """Rows of the exact mass quadrature: per-interval GL on phi_i phi_j r^(n-1)."""
    h = np.diff(nodes)
    xg, wg = gl_rule(npts)
    x01 = 0.5 * (xg + 1.0)
    w01 = 0.5 * wg
    r = (nodes[:-1][:, None] + h[:, None] * x01[None, :]).ravel()
    c = (h[:, None] * w01[None, :]).ravel() * sphere_surface(n) * r ** (n - 1)
    return r, c


def _sparse_gram(rows, cols, vals, nrows: int, ncols: int) -> np.ndarray:
    X = csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nrows, ncols))
    G = (X.T @ X).toarray()
    return 0.5 * (G + G.T)


def assemble(
    params: ProblemParams,
    grid,
    *,
    n_r: int = 4,
    n_t: int = 10,
    delta: float = 1e-6,
    t_floor: float = 1e-9,
    kernel_npts: int = 20,
    mass_npts: int | None = None,
    tol: float | None = None,
) -> StiffnessOperator:
    """Assemble the weighted Gagliardo stiffness and the mass matrix.

    ``grid`` is either a node array or an integer M (expanded through
    :func:`make_grid` with the problem radius).  ``tol`` triggers a second
    assembly at finer quadrature and compares a probe quadratic form; a
    relative shift above ``tol`` raises :class:`SolverError`.
    """
    nodes = make_grid(params.R, int(grid)) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    if nodes.ndim != 1 or len(nodes) < 5 or nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0.0):
        raise ValueError("grid must be increasing nodes starting at 0 with at least 4 intervals")
    M = len(nodes) - 1
    n, s = params.n, params.s
    two_s = 2.0 * s
    sig = sphere_surface(n)
    wfun, wfar = _weight_fns(weight_from_params(params))

    rn, rw = panel_nodes(nodes, n_r)
    ia0, va0, ia1, va1 = _hat_at(nodes, rn)
    nr = len(rn)

    # core rows: one per (r-node, tau-node) ordered pair
    tb = _tau_breaks(delta, t_floor)
    tn, tw = panel_nodes(tb, n_t)
    Kv = kernel_batch(n, s, tn, npts=kernel_npts)
    tau_fac = tw * tn ** (n - 1) * Kv
    inner = (rn[:, None] * tn[None, :]).ravel()
    wb = 0.5 * (wfun(rn)[:, None] + wfun(inner).reshape(nr, -1))
    sq = np.sqrt((rw * rn ** (n - 1.0 - two_s))[:, None] * tau_fac[None, :] * wb).ravel()
    ib0, vb0, ib1, vb1 = _hat_at(nodes, inner)
    nt = len(tn)
    core_rows = np.arange(nr * nt)
    rows = [core_rows, core_rows, core_rows, core_rows]
    cols = [np.repeat(ia0, nt), np.repeat(ia1, nt), ib0, ib1]
    vals = [np.repeat(va0, nt) * sq, np.repeat(va1, nt) * sq, -vb0 * sq, -vb1 * sq]
    base = nr * nt

    # sliver rows: the |tau - 1| < delta band through the Lipschitz model
    k_edge = float(kernel_batch(n, s, np.array([1.0 - delta]), npts=kernel_npts)[0])
    band = k_edge * delta ** (1.0 + two_s) * delta ** (2.0 - two_s) / (2.0 - two_s)
    sq_sl = np.sqrt(band * rw * wfun(rn) * rn ** (n + 1.0 - two_s))
    j = np.clip(np.searchsorted(nodes, rn, side="right") - 1, 0, M - 1)
    inv_h = 1.0 / (nodes[j + 1] - nodes[j])
    sl_rows = base + np.arange(nr)
    j1 = np.where(j + 1 < M, j + 1, 0)
    rows += [sl_rows, sl_rows]
    cols += [j, j1]
    vals += [-inv_h * sq_sl, np.where(j + 1 < M, inv_h, 0.0) * sq_sl]
    base += nr

    # outer rows: pairs whose far radius exceeds R, where the field vanishes
    fold = _outer_fold(rn, wfun, wfar, n, s, r_hi=nodes[-1], n_t=n_t, delta=delta, t_floor=t_floor)
    sq_out = np.sqrt(rw * rn ** (n - 1.0 - two_s) * fold)
    out_rows = base + np.arange(nr)
    rows += [out_rows, out_rows]
    cols += [ia0, ia1]
    vals += [va0 * sq_out, va1 * sq_out]
    base += nr

    A = 2.0 * sig * _sparse_gram(rows, cols, vals, base, M)

    m_npts = mass_npts if mass_npts is not None else max(8, n // 2 + 2)
    rm, cm = _mass_factor(nodes, n, m_npts)
    im0, wm0, im1, wm1 = _hat_at(nodes, rm)
    sq_m = np.sqrt(cm)
    mrows = np.arange(len(rm))
    Mq = _sparse_gram([mrows, mrows], [im0, im1], [wm0 * sq_m, wm1 * sq_m], len(rm), M)

    for name, mat in (("stiffness", A), ("mass", Mq)):
        try:
            sla.cho_factor(mat)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise SolverError(f"{name} matrix is not positive definite: quadrature under-resolved") from exc

    meta = {
        "intervals": float(M),
        "n_r": float(n_r),
        "n_t": float(n_t),
        "tau_panels": float(len(tb) - 1),
        "quadrature_rows": float(base),
        "probe_rel_err": math.nan,
    }
    op = StiffnessOperator(A=A, Mq=Mq, nodes=nodes, meta=meta)

    if tol is not None:
        fine = assemble(
            params, nodes, n_r=n_r + 2, n_t=n_t + 4, delta=delta, t_floor=t_floor,
            kernel_npts=kernel_npts, mass_npts=m_npts,
        )
        probe = interpolate_field(truncated_bubble(0.2, s, n, eta=params.eta), nodes).dofs
        qa = float(probe @ A @ probe)
        qf = float(probe @ fine.A @ probe)
        rel = abs(qa - qf) / abs(qf)
        meta["probe_rel_err"] = rel
        op = StiffnessOperator(A=A, Mq=Mq, nodes=nodes, meta=meta)
        if rel > tol:
            raise SolverError(
                f"assembly probe moved by {rel:.3e} under quadrature refinement, above tolerance {tol:.3e}"
            )
    return op


# ---------------------------------------------------------------------------
# Interpolant norms on the grid
# ---------------------------------------------------------------------------

def _interval_quad(nodes: np.ndarray, values: np.ndarray, npts: int = 12):
    h = np.diff(nodes)
    xg, wg = gl_rule(npts)
    x01 = 0.5 * (xg + 1.0)
    w01 = 0.5 * wg
    r = nodes[:-1][:, None] + h[:, None] * x01[None, :]
    u = values[:-1][:, None] * (1.0 - x01[None, :]) + values[1:][:, None] * x01[None, :]
    wq = h[:, None] * w01[None, :]
    return r, u, wq, x01


def power_integral(field: RadialField, expo: float, n: int, *, npts: int = 12) -> float:
    """\\int |u|^expo dx of the interpolant, exact per-interval panels."""
    r, u, wq, _ = _interval_quad(field.nodes, field.values, npts)
    return sphere_surface(n) * float(np.sum(wq * np.abs(u) ** expo * r ** (n - 1)))


def power_gradient(field: RadialField, expo: float, n: int, *, npts: int = 12) -> np.ndarray:
    """Gradient of \\int |u|^expo dx with respect to the hat coefficients."""
    nodes, values = field.nodes, field.values
    r, u, wq, x01 = _interval_quad(nodes, values, npts)
    dens = wq * np.abs(u) ** (expo - 2.0) * u * r ** (n - 1)
    g = np.zeros(len(nodes))
    g[:-1] += np.sum(dens * (1.0 - x01[None, :]), axis=1)
    g[1:] += np.sum(dens * x01[None, :], axis=1)
    return expo * sphere_surface(n) * g[:-1]


def _with_dofs(nodes: np.ndarray, dofs: np.ndarray) -> RadialField:
    return RadialField(nodes, np.append(dofs, 0.0))


# ---------------------------------------------------------------------------
# Constrained minimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeOptions:
    tol: float = 1e-6
    max_iter: int = 2000
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 1.3
    max_backtracks: int = 60
    margin_frac: float = 0.02
    precondition: bool = True


@dataclass(frozen=True)
class MinimizeResult:
    field: RadialField
    energy: float
    constraint_residual: float
    iterations: int
    converged: bool
    below_threshold: bool
    status: str


def _min_form_on_sphere(
    Q: np.ndarray,
    stiff: np.ndarray,
    nodes: np.ndarray,
    n: int,
    expo: float,
    u0: np.ndarray,
    opts: MinimizeOptions,
    floor_energy: float = -math.inf,
):
    """Minimize v^T Q v over the sphere (integral of |I v|^expo) = 1.

    Projected gradient with a descent direction taken as the Riemannian
    gradient in the metric of ``stiff`` (the SPD stiffness matrix): both
    the gradient and the constraint gradient are preconditioned before the
    tangential projection, so stiff high-frequency components do not leak
    back in through the projector.  Monotone Armijo backtracking on the
    renormalized iterate.  Returns (v, energy, iterations, status).
    """
    cho = sla.cho_factor(stiff) if opts.precondition else None
    u = np.asarray(u0, dtype=float).copy()
    nrm = power_integral(_with_dofs(nodes, u), expo, n) ** (1.0 / expo)
    if not (nrm > 0.0) or not math.isfinite(nrm):
        raise ValueError("initial field must be nonzero with a finite constraint norm")
    u /= nrm

    def energy(v: np.ndarray) -> float:
        return float(v @ Q @ v)

    E = energy(u)
    alpha = 1.0
    status = "max_iter"
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = 2.0 * (Q @ u)
        d_c = power_gradient(_with_dofs(nodes, u), expo, n)
        g_tan = g - (g @ d_c) / (d_c @ d_c) * d_c
        gscale = 2.0 * float(np.linalg.norm(stiff @ u))
        if float(np.linalg.norm(g_tan)) <= opts.tol * gscale:
            status = "converged"
            break
        if cho is not None:
            y = sla.cho_solve(cho, g)
            z = sla.cho_solve(cho, d_c)
            d = y - (y @ d_c) / (z @ d_c) * z
            slope = float(d @ g)
            if slope <= 0.0:
                d, slope = g_tan, float(g_tan @ g_tan)
        else:
            d, slope = g_tan, float(g_tan @ g_tan)

        accepted = False
        a = alpha
        for _ in range(opts.max_backtracks):
            trial = u - a * d
            t_nrm = power_integral(_with_dofs(nodes, trial), expo, n) ** (1.0 / expo)
            if t_nrm > 0.0 and math.isfinite(t_nrm):
                trial /= t_nrm
                E_t = energy(trial)
                if E_t <= E - opts.armijo * a * slope:
                    u, E = trial, E_t
                    alpha = a * opts.grow if a == alpha else a
                    accepted = True
                    break
            a *= opts.shrink
        if not accepted:
            status = "stalled"
            break
        if E < floor_energy:
            status = "indefinite_regime"
            break
    return u, E, it, status


def minimize_S(
    params: ProblemParams,
    op: StiffnessOperator,
    init: RadialField | None = None,
    opts: MinimizeOptions | None = None,
) -> MinimizeResult:
    """Projected-gradient minimization of u^T A u - lam u^T Mq u on the q_s sphere.

    The descent direction is the tangentially projected gradient,
    preconditioned by the stiffness factorization; Armijo backtracking on
    the renormalized iterate keeps the energy monotone across accepted
    steps.  Convergence is declared when the projected gradient drops below
    ``tol`` relative to ||2 A u||.  An energy below -10 p0 Ss stops the
    descent with status ``indefinite_regime`` (lam at or beyond the first
    eigenvalue, where the infimum is not a ground state).
    """
    if params.q != 2.0:
        raise ValueError("the constrained minimization is the q = 2 Rayleigh problem")
    opts = opts or MinimizeOptions()
    qs = critical_exponent(params.n, params.s)
    level = params.p0 * bubble_constants(params.n, params.s).Ss
    nodes = op.nodes

    if init is None:
        init = interpolate_field(truncated_bubble(0.2, params.s, params.n, eta=params.eta), nodes)
    u, E, it, status = _min_form_on_sphere(
        op.A - params.lam * op.Mq, op.A, nodes, params.n, qs, init.dofs,
        opts, floor_energy=-10.0 * level,
    )

    field = _with_dofs(nodes, u)
    resid = abs(power_integral(field, qs, params.n) ** (1.0 / qs) - 1.0)
    return MinimizeResult(
        field=field,
        energy=E,
        constraint_residual=resid,
        iterations=it,
        converged=status == "converged",
        below_threshold=E < level - opts.margin_frac * level,
        status=status,
    )


def refinement_check(
    params: ProblemParams,
    M: int = 128,
    *,
    opts: MinimizeOptions | None = None,
) -> tuple[float, float, float]:
    """Converged energies at M and 2M intervals and their relative change."""
    e = []
    for m in (M, 2 * M):
        op = assemble(params, m)
        e.append(minimize_S(params, op, opts=opts).energy)
    rel = abs(e[1] - e[0]) / abs(e[1])
    return e[0], e[1], rel


# ---------------------------------------------------------------------------
# First eigenvalue
# ---------------------------------------------------------------------------

def first_eigenvalue(op: StiffnessOperator, *, tol: float = 1e-8, max_iter: int = 200) -> tuple[float, RadialField]:
    """Smallest lam with A u = lam Mq u by inverse power iteration.

    The stiffness factorization is computed once and reused across
    iterations; a Rayleigh-quotient shift polishes the last digits if plain
    inverse iteration stalls.  The eigenfield is Mq-normalized with its
    largest coefficient positive.
    """
    A, Mq = op.A, op.Mq
    try:
        cho = sla.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise SolverError("stiffness factorization failed") from exc
    v = np.ones(op.size)
    v /= math.sqrt(v @ Mq @ v)
    lam = float(v @ A @ v)
    for _ in range(max_iter):
        v = sla.cho_solve(cho, Mq @ v)
        v /= math.sqrt(v @ Mq @ v)
        Av = A @ v
        lam = float(v @ Av)
        if np.linalg.norm(Av - lam * Mq @ v) <= tol * np.linalg.norm(Av):
            break
    else:  # pragma: no cover - tiny pencils converge long before this
        for _ in range(5):
            try:
                lu = sla.lu_factor(A - lam * Mq)
                v = sla.lu_solve(lu, Mq @ v)
            except np.linalg.LinAlgError:
                break
            v /= math.sqrt(v @ Mq @ v)
            Av = A @ v
            lam = float(v @ Av)
            if np.linalg.norm(Av - lam * Mq @ v) <= tol * np.linalg.norm(Av):
                break
    if v[np.argmax(np.abs(v))] < 0.0:
        v = -v
    return lam, _with_dofs(op.nodes, v)


def euler_residual(params: ProblemParams, op: StiffnessOperator, field: RadialField, S_value: float) -> float:
    """Relative first-order stationarity defect of a candidate minimizer.

    At a constrained minimizer the multiplier is pinned by contracting the
    stationarity equation with u itself, giving
    2 A u - 2 lam Mq u - (2 S / q_s) * grad \\int |u|^{q_s} = 0; the returned
    value is the norm of that vector relative to ||2 A u||.
    """
    qs = critical_exponent(params.n, params.s)
    u = field.dofs
    grad_c = power_gradient(field, qs, params.n)
    r = 2.0 * (op.A @ u) - 2.0 * params.lam * (op.Mq @ u) - (2.0 * S_value / qs) * grad_c
    return float(np.linalg.norm(r) / np.linalg.norm(2.0 * (op.A @ u)))
