"""Fiber maps, mountain-pass geometry, and path descent on the discrete energy.

The full (unconstrained) functional on the hat-function space is

    Phi(u) = 1/2 u^T A u - (lam/q) int |u|^q - (1/q_s) int |u|^{q_s},

with A the assembled weighted stiffness matrix and the integrals the
Gauss-Legendre power integrals of the interpolant.  The module provides:

- ``fiber_t`` / ``fiber_sweep``: the scalar problem on a ray {t v : t > 0}
  through a critical-norm-normalized profile v.  Phi(t v) is an explicit
  polynomial in t of three scalars, so the ray maximum is the positive root
  of  t X - t^{q_s - 1} - lam t^{q - 1} int |v|^q = 0.
- ``mp_geometry``: the radius/level pair (rho, beta) from the explicit
  embedding lower bound, plus a far endpoint e with Phi(e) < 0.
- ``mp_level``: max-point gradient descent over a discrete path from 0 to e
  with periodic arc-length re-equidistribution; the running maximum over
  the path is nonincreasing by construction.
- ``ps_diagnostics``: gradient norm and the critical-level identity split
  at a candidate field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt

from .asymptotics import EPS_FLOOR
from .bubble import truncated_bubble
from .constants import bubble_constants
from .problem import ProblemParams, critical_exponent, weight_from_params
from .quad import radial_power_integral, seminorm_radial
from .solver import (
    MinimizeOptions,
    RadialField,
    StiffnessOperator,
    _min_form_on_sphere,
    _with_dofs,
    first_eigenvalue,
    interpolate_field,
    power_gradient,
    power_integral,
)

__all__ = [
    "FiberResult",
    "MountainPassError",
    "PathOptions",
    "PathState",
    "PSReport",
    "fiber_t",
    "fiber_sweep",
    "level_bound",
    "mp_geometry",
    "mp_level",
    "phi_gradient",
    "phi_value",
    "ps_diagnostics",
]


class MountainPassError(RuntimeError):
    """Geometry or path construction failed (no far endpoint, bad bracket)."""


@dataclass(frozen=True)
class FiberResult:
    """Ray maximum through a normalized profile v (||v||_{q_s} = 1).

    ``eps`` is the bubble parameter when the profile came from a sweep and
    NaN for a plain grid field.  ``X_tilde`` is the weighted form of v,
    ``t_eps`` the positive root of the fiber derivative, ``Y_eps`` the
    functional value at t_eps v, and ``limit_gap`` the absolute distance
    |t_eps - (p0 Ss)^{1/(q_s-2)}| to the concentration limit of the root.
    """

    eps: float
    X_tilde: float
    t_eps: float
    Y_eps: float
    limit_gap: float


@dataclass(frozen=True)
class PathState:
    """Discrete path z_0 ... z_{m-1} with fixed endpoints z_0 = 0, z_{m-1} = e.

    ``max_point`` is the near-critical witness: the highest sample of the
    converged path pushed down the Nehari manifold until the gradient is
    small (or the step budget runs out).  The path's own maximum vertex
    keeps a gradient floor proportional to the segment spacing, so the
    polished point — not a raw vertex — is what Palais-Smale diagnostics
    should look at.
    """

    points: tuple[RadialField, ...]
    level: float
    iterations: int
    converged: bool
    trace: tuple[float, ...]
    max_point: RadialField


@dataclass(frozen=True)
class PSReport:
    """Diagnostics of Phi at a candidate field.

    ``identity_residual`` is the relative gap between the level and the
    value every critical point must have,
    lam (q-2)/(2q) int |u|^q + (s/n) int |u|^{q_s}, which collapses to
    (s/n) int |u|^{q_s} when q = 2.
    """

    grad_norm: float
    seminorm_part: float
    subcritical_mass: float
    critical_mass: float
    level: float
    identity_residual: float


@dataclass(frozen=True)
class PathOptions:
    """Controls for the path descent.

    ``step_cap_frac`` caps each vertex move (in the A-metric) by that
    fraction of the shorter adjacent segment, so the maximum vertex slides
    down the ridge instead of tunneling across it in one step; the
    periodic re-equidistribution keeps vertices spread along the path, so
    the ridge crossing always carries vertices.  ``samples_per_segment``
    interior checkpoints per segment enter the reported level, so a ridge
    crossing between vertices still counts.
    """

    max_iter: int = 3000
    tol: float = 1e-6
    window: int = 80
    reequidistribute_every: int = 25
    armijo: float = 1e-4
    shrink: float = 0.5
    grow: float = 1.3
    max_backtracks: int = 60
    eps0: float = 0.2
    step_cap_frac: float = 0.5
    samples_per_segment: int = 3


def level_bound(params: ProblemParams) -> float:
    """The strict upper bound (s/n) (p0 Ss)^{n/(2s)} for compactness of PS sequences."""
    level = params.p0 * bubble_constants(params.n, params.s).Ss
    return (params.s / params.n) * level ** (params.n / (2.0 * params.s))


def _phi_scalars(params: ProblemParams, op: StiffnessOperator, dofs: np.ndarray):
    """(u^T A u, int |u|^q, int |u|^{q_s}) for the interpolant with these dofs."""
    qs = critical_exponent(params.n, params.s)
    field = _with_dofs(op.nodes, dofs)
    quad_form = float(dofs @ op.A @ dofs)
    sub = power_integral(field, params.q, params.n)
    crit = power_integral(field, qs, params.n)
    return quad_form, sub, crit


def phi_value(params: ProblemParams, op: StiffnessOperator, field: RadialField) -> float:
    """Phi(u) = 1/2 u^T A u - (lam/q) int |u|^q - (1/q_s) int |u|^{q_s}."""
    qs = critical_exponent(params.n, params.s)
    quad_form, sub, crit = _phi_scalars(params, op, field.dofs)
    return 0.5 * quad_form - (params.lam / params.q) * sub - crit / qs


def phi_gradient(params: ProblemParams, op: StiffnessOperator, field: RadialField) -> np.ndarray:
    """Gradient of Phi with respect to the interior dof vector."""
    qs = critical_exponent(params.n, params.s)
    u = field.dofs
    g = op.A @ u
    g = g - (params.lam / params.q) * power_gradient(field, params.q, params.n)
    g = g - power_gradient(field, qs, params.n) / qs
    return g


def _fiber_root(X: float, sub_mass: float, lam: float, q: float, qs: float,
                *, bisect: bool = False) -> float | None:
    """Positive root of t X - t^{qs-1} - lam t^{q-1} sub_mass = 0, or None.

    Dividing by t, the root of h(t) = X - t^{qs-2} - lam t^{q-2} sub_mass
    is unique because both power terms increase.  For q = 2 the closed form
    t = (X - lam sub_mass)^{1/(qs-2)} exists iff X > lam sub_mass; ``bisect``
    forces the bracketing route (used to cross-check the closed form).
    """
    if lam < 0.0:
        raise ValueError("fiber roots are defined for lam >= 0")
    if X <= 0.0:
        raise ValueError("the weighted form of the profile must be positive")
    if lam == 0.0 or sub_mass == 0.0:
        return X ** (1.0 / (qs - 2.0))
    if q == 2.0:
        base = X - lam * sub_mass
        if base <= 0.0:
            return None
        if not bisect:
            return base ** (1.0 / (qs - 2.0))
    t_hi = X ** (1.0 / (qs - 2.0))

    def h(t: float) -> float:
        return X - t ** (qs - 2.0) - lam * t ** (q - 2.0) * sub_mass

    lo = 1e-12 * t_hi
    if h(lo) <= 0.0 or h(t_hi) >= 0.0:  # pragma: no cover - guarded by q=2 base check
        return None
    return float(sopt.brentq(h, lo, t_hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps))


def _fiber_from_scalars(params: ProblemParams, eps: float, X: float,
                        sub_mass: float, crit_mass: float) -> FiberResult:
    qs = critical_exponent(params.n, params.s)
    t = _fiber_root(X, sub_mass, params.lam, params.q, qs)
    if t is None:
        raise ValueError(
            "no positive fiber root: the weighted form does not dominate the "
            "lam-term (X_tilde <= lam * int v^2)"
        )
    Y = 0.5 * t * t * X - (params.lam / params.q) * t ** params.q * sub_mass \
        - t ** qs * crit_mass / qs
    limit = (params.p0 * bubble_constants(params.n, params.s).Ss) ** (1.0 / (qs - 2.0))
    return FiberResult(eps=eps, X_tilde=X, t_eps=t, Y_eps=Y, limit_gap=abs(t - limit))


def fiber_t(params: ProblemParams, v: RadialField, op: StiffnessOperator) -> FiberResult:
    """Ray maximum of Phi through a grid field v normalized in the critical norm.

    X_tilde is the discrete weighted form v^T A v; the masses are the power
    integrals of the interpolant.  Raises if v is not normalized (the ray
    algebra, and the invariant Y <= (s/n) X_tilde^{n/2s}, assume
    int |v|^{q_s} = 1) or if the q = 2 fiber has no positive root.
    """
    if not np.array_equal(v.nodes, op.nodes):
        raise ValueError("field and operator live on different grids")
    X, sub_mass, crit_mass = _phi_scalars(params, op, v.dofs)
    if abs(crit_mass - 1.0) > 1e-6:
        raise ValueError(
            f"profile must be normalized in the critical norm (int |v|^qs = {crit_mass:.6g})"
        )
    return _fiber_from_scalars(params, math.nan, X, sub_mass, crit_mass)


def fiber_sweep(params: ProblemParams, eps_grid) -> tuple[FiberResult, ...]:
    """Fiber results along the normalized truncated-bubble family.

    Continuum route: for each eps the weighted form and the power masses are
    computed by the radial quadrature of the truncated bubble itself, then
    scaled to the critical-norm-normalized profile (so crit_mass is exactly
    one by construction).  As eps -> 0, t_eps tends to
    (p0 Ss)^{1/(q_s-2)} and limit_gap shrinks.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.ndim != 1 or eps_grid.size == 0:
        raise ValueError("eps_grid must be a nonempty 1-d sequence")
    if np.any(eps_grid < EPS_FLOOR):
        raise ValueError(f"eps below {EPS_FLOOR} needs hand-tuned panels; refusing")
    n, s, eta = params.n, params.s, params.eta
    qs = critical_exponent(n, s)
    w = weight_from_params(params)
    out = []
    for eps in eps_grid:
        ub = truncated_bubble(float(eps), s, n, eta)
        form = seminorm_radial(ub, w, n, s, ub.support).value
        crit_raw = radial_power_integral(ub, qs, n)
        sub_raw = radial_power_integral(ub, params.q, n)
        nrm = crit_raw ** (1.0 / qs)
        X = form / (nrm * nrm)
        sub_mass = sub_raw / nrm ** params.q
        out.append(_fiber_from_scalars(params, float(eps), X, sub_mass, 1.0))
    return tuple(out)


def _alpha_q(params: ProblemParams, op: StiffnessOperator) -> float:
    """Discrete embedding constant: min of u^T A u over int |u|^q = 1.

    For q = 2 this is the first eigenvalue; for q > 2 it is computed by the
    same sphere-constrained descent as the ground-state problem, started
    from a moderate bubble.
    """
    if params.q == 2.0:
        lam1, _ = first_eigenvalue(op)
        return lam1
    init = interpolate_field(
        truncated_bubble(0.2, params.s, params.n, eta=params.eta), op.nodes
    )
    opts = MinimizeOptions(tol=1e-8, max_iter=4000)
    _, E, _, status = _min_form_on_sphere(
        op.A, op.A, op.nodes, params.n, params.q, init.dofs, opts
    )
    if status not in ("converged", "max_iter"):  # pragma: no cover - defensive
        raise MountainPassError(f"embedding-constant descent ended with status {status!r}")
    return E


def mp_geometry(
    params: ProblemParams, op: StiffnessOperator, *, eps0: float = 0.2
) -> tuple[float, float, RadialField]:
    """Radius/level pair (rho, beta) and a far endpoint e with Phi(e) < 0.

    The lower bound in the N_p norm t = (u^T A u)^{1/2} is

        g(t) = t^2/2 - (lam/q) alpha_q^{-q/2} t^q - (1/q_s) S_p^{-q_s/2} t^{q_s},

    with S_p = p0 Ss and alpha_q the discrete minimum of the weighted form
    over the unit q-sphere.  rho is the root of g'(t)/t (the maximizer of
    g), beta = g(rho) > 0.  The endpoint is zeta u0 for a normalized
    truncated bubble u0, doubling zeta until the functional is negative and
    the norm passes rho.

    Requires lam < lambda_1 (discrete) when q = 2, and lam >= 0 when q > 2.
    """
    n, s, lam, q = params.n, params.s, params.lam, params.q
    qs = critical_exponent(n, s)
    Sp = params.p0 * bubble_constants(n, s).Ss
    alpha = _alpha_q(params, op)
    if q == 2.0:
        if lam >= alpha:
            raise ValueError(
                f"q = 2 geometry needs lam below the first eigenvalue ({alpha:.6g})"
            )
    elif lam < 0.0:
        raise ValueError("q > 2 geometry needs lam >= 0")

    c_sub = lam * alpha ** (-q / 2.0)
    c_crit = Sp ** (-qs / 2.0)

    def g(t: float) -> float:
        return 0.5 * t * t - (c_sub / q) * t ** q - (c_crit / qs) * t ** qs

    # g'(t)/t = 1 - c_sub t^{q-2} - c_crit t^{qs-2}: decreasing from 1, so the
    # unique root is the maximizer of g.
    t_hi = c_crit ** (-1.0 / (qs - 2.0))
    if q == 2.0:
        rho = ((1.0 - c_sub) / c_crit) ** (1.0 / (qs - 2.0))
    elif lam == 0.0:
        rho = t_hi
    else:
        def dg(t: float) -> float:
            return 1.0 - c_sub * t ** (q - 2.0) - c_crit * t ** (qs - 2.0)

        rho = float(sopt.brentq(dg, 1e-12 * t_hi, t_hi, rtol=4.0 * np.finfo(float).eps))
    beta = g(rho)
    if not beta > 0.0:  # pragma: no cover - excluded by the pre-checks above
        raise MountainPassError(f"lower-bound level is not positive (beta = {beta:.6g})")

    u0 = interpolate_field(truncated_bubble(eps0, s, n, eta=params.eta), op.nodes)
    nrm = power_integral(u0, qs, n) ** (1.0 / qs)
    base = u0.values / nrm
    X0, sub0, crit0 = _phi_scalars(params, op, base[:-1])
    zeta = 1.0
    for _ in range(60):
        val = 0.5 * zeta * zeta * X0 - (lam / q) * zeta ** q * sub0 \
            - zeta ** qs * crit0 / qs
        if val < 0.0 and zeta * math.sqrt(X0) > rho:
            break
        zeta *= 2.0
    else:
        raise MountainPassError("no negative-energy endpoint within 60 doublings")
    e = RadialField(op.nodes, zeta * base)
    return rho, beta, e


def mp_level(
    params: ProblemParams,
    op: StiffnessOperator,
    m: int = 21,
    opts: PathOptions | None = None,
) -> PathState:
    """Minimize the path maximum of Phi over discrete paths from 0 to e.

    Starts from the segment z_j = j/(m-1) e through the geometry endpoint.
    Each iteration moves the interior maximum vertex one damped step along
    the stiffness-preconditioned negative gradient, capped in the A-metric
    by half the shorter adjacent segment (so the vertex slides down the
    ridge instead of jumping across it).  Every
    ``reequidistribute_every`` iterations the points are redistributed to
    uniform arc length in the A-metric, which keeps vertices on the ridge
    crossing.  The level is measured on the vertices together with fixed
    interior checkpoints on every segment — a crossing between vertices
    still counts, so the level cannot dip below the min-max value by more
    than the checkpoint sampling bias — and the reported level (and trace)
    is its running minimum, nonincreasing by construction.  Stops when the
    level has decreased by less than ``tol`` (relative) over ``window``
    iterations, or when the maximum vertex stalls right after a
    re-equidistribution.

    A fixed-m path cannot drive the crest gradient to zero (the maximum
    vertex keeps a gradient floor proportional to the segment spacing), so
    the returned ``max_point`` is the highest refined sample pushed further
    down the Nehari set by ``_polish_crest`` — that field, not a raw vertex,
    carries the near-critical certificate.
    """
    if m < 3:
        raise ValueError("a path needs at least three points")
    opts = opts or PathOptions()
    _, _, e = mp_geometry(params, op, eps0=opts.eps0)
    qs = critical_exponent(params.n, params.s)
    nodes = op.nodes
    lam, q = params.lam, params.q
    A = op.A
    cho = sla.cho_factor(A)
    thetas = (np.arange(opts.samples_per_segment) + 1.0) / (opts.samples_per_segment + 1.0)

    Z = np.outer(np.arange(m) / (m - 1.0), e.dofs)

    def phi_of(dofs: np.ndarray) -> float:
        quad_form, sub, crit = _phi_scalars(params, op, dofs)
        return 0.5 * quad_form - (lam / q) * sub - crit / qs

    def seg_max(za: np.ndarray, zb: np.ndarray) -> float:
        return max(phi_of((1.0 - th) * za + th * zb) for th in thetas)

    def a_len(delta: np.ndarray) -> float:
        return math.sqrt(max(float(delta @ A @ delta), 0.0))

    vvals = np.array([phi_of(Z[j]) for j in range(m)])
    smax = np.array([seg_max(Z[i], Z[i + 1]) for i in range(m - 1)])
    level = float(max(vvals.max(), smax.max()))
    trace = [level]
    alpha = math.inf
    converged = False
    it = 0
    last_reeq = 0
    last_j = -1

    def reequidistribute():
        nonlocal Z, vvals, smax, last_reeq
        Z = _equidistribute(Z, A)
        vvals = np.array([phi_of(Z[j2]) for j2 in range(m)])
        smax = np.array([seg_max(Z[i], Z[i + 1]) for i in range(m - 1)])
        last_reeq = it

    for it in range(1, opts.max_iter + 1):
        j = 1 + int(np.argmax(vvals[1:-1]))
        if j != last_j:
            alpha = math.inf
        last_j = j

        u = Z[j]
        field = _with_dofs(nodes, u)
        g = A @ u - (lam / q) * power_gradient(field, q, params.n) \
            - power_gradient(field, qs, params.n) / qs
        d = sla.cho_solve(cho, g)
        dlen = a_len(d)
        if dlen <= 0.0:  # pragma: no cover - exact critical point
            converged = True
            break
        d /= dlen
        slope = float(d @ g)
        if slope <= 0.0:  # pragma: no cover - A is SPD, d is A^{-1}g scaled
            d = g / a_len(g)
            slope = float(d @ g)

        cap = opts.step_cap_frac * min(a_len(u - Z[j - 1]), a_len(Z[j + 1] - u))
        if cap <= 0.0:  # pragma: no cover - coincident neighbors
            cap = opts.step_cap_frac * a_len(e.dofs) / (m - 1.0)
        accepted = False
        a = min(alpha, cap)
        a_start = a
        for _ in range(opts.max_backtracks):
            trial = u - a * d
            val = phi_of(trial)
            if val <= vvals[j] - opts.armijo * a * slope:
                Z[j] = trial
                vvals[j] = val
                smax[j - 1] = seg_max(Z[j - 1], Z[j])
                smax[j] = seg_max(Z[j], Z[j + 1])
                alpha = a * opts.grow if a == a_start else a
                accepted = True
                break
            a *= opts.shrink

        if not accepted:
            if it - last_reeq > 1:
                # Re-space the path before giving up: after many moves of
                # one vertex its neighborhood degenerates and caps the step.
                reequidistribute()
            else:
                # A freshly re-equidistributed path still cannot be lowered:
                # the maximum vertex sits at a discrete critical level.
                converged = True
                trace.append(level)
                break
        elif it % opts.reequidistribute_every == 0:
            reequidistribute()

        level = min(level, float(max(vvals.max(), smax.max())))
        trace.append(level)
        if it >= opts.window:
            drop = trace[-opts.window - 1] - trace[-1]
            if drop <= opts.tol * max(abs(trace[-1]), 1.0):
                converged = True
                break

    # Locate the highest refined sample (vertex or segment checkpoint) of the
    # final path and polish it toward a critical point along the Nehari set.
    best = Z[1 + int(np.argmax(vvals[1:-1]))].copy()
    best_val = phi_of(best)
    for i in range(m - 1):
        for th in thetas:
            cand = (1.0 - th) * Z[i] + th * Z[i + 1]
            v_cand = phi_of(cand)
            if v_cand > best_val:
                best, best_val = cand, v_cand
    max_point = _with_dofs(nodes, _polish_crest(params, op, cho, best))

    points = tuple(_with_dofs(nodes, Z[j]) for j in range(m))
    return PathState(
        points=points,
        level=level,
        iterations=it,
        converged=converged,
        trace=tuple(trace),
        max_point=max_point,
    )


def _ray_to_nehari(params: ProblemParams, op: StiffnessOperator,
                   dofs: np.ndarray) -> np.ndarray | None:
    """Rescale dofs along its ray onto the Nehari set {u : <grad Phi(u), u> = 0}.

    The ray scalars satisfy  t^2 P - lam t^q Q - t^{qs} T = 0 with
    P = u^T A u, Q = int |u|^q, T = int |u|^{qs}; dividing by t^2 leaves a
    strictly decreasing function of t, so the positive root is unique.
    Returns None when the q = 2 ray has no positive root (P <= lam Q).
    """
    qs = critical_exponent(params.n, params.s)
    lam, q = params.lam, params.q
    P, Q, T = _phi_scalars(params, op, dofs)
    if P <= 0.0 or T <= 0.0:  # pragma: no cover - zero field
        return None
    if lam == 0.0 or Q == 0.0:
        return (P / T) ** (1.0 / (qs - 2.0)) * dofs
    if q == 2.0:
        base = P - lam * Q
        if base <= 0.0:
            return None
        return (base / T) ** (1.0 / (qs - 2.0)) * dofs

    def h(t: float) -> float:
        return P - lam * t ** (q - 2.0) * Q - t ** (qs - 2.0) * T

    t_hi = (P / T) ** (1.0 / (qs - 2.0))
    lo = 1e-12 * t_hi
    if h(lo) <= 0.0 or h(t_hi) >= 0.0:  # pragma: no cover - lam < 0 only
        return None
    t = float(sopt.brentq(h, lo, t_hi, rtol=4.0 * np.finfo(float).eps))
    return t * dofs


def _polish_crest(params: ProblemParams, op: StiffnessOperator, cho,
                  dofs0: np.ndarray, *, tol: float = 1e-6,
                  max_iter: int = 200) -> np.ndarray:
    """Descend Phi along the Nehari set starting from a path crest sample.

    Projected gradient in the A-metric (the same construction as the
    sphere-constrained solver, with the Nehari constraint gradient in place
    of the norm constraint), retracting by the ray rescale after each step.
    Stops once the full gradient drops below ``tol`` relative to ||A u|| —
    the near-critical certificate — or after ``max_iter`` steps (degenerate
    regimes concentrate instead of converging and simply use the budget).
    """
    qs = critical_exponent(params.n, params.s)
    lam, q = params.lam, params.q
    nodes = op.nodes
    w = _ray_to_nehari(params, op, dofs0)
    if w is None:  # pragma: no cover - crest below the lam-term
        return dofs0
    alpha = 1.0

    def phi_of(dofs: np.ndarray) -> float:
        P, Q, T = _phi_scalars(params, op, dofs)
        return 0.5 * P - (lam / q) * Q - T / qs

    val = phi_of(w)
    for _ in range(max_iter):
        field = _with_dofs(nodes, w)
        g = op.A @ w - (lam / q) * power_gradient(field, q, params.n) \
            - power_gradient(field, qs, params.n) / qs
        if float(np.linalg.norm(g)) <= tol * float(np.linalg.norm(op.A @ w)):
            break
        n_grad = 2.0 * (op.A @ w) - lam * power_gradient(field, q, params.n) \
            - power_gradient(field, qs, params.n)
        y = sla.cho_solve(cho, g)
        z = sla.cho_solve(cho, n_grad)
        zn = float(z @ n_grad)
        if zn <= 0.0:  # pragma: no cover - constraint gradient degenerate
            d = y
        else:
            d = y - (y @ n_grad) / zn * z
        slope = float(d @ g)
        if slope <= 0.0:
            d = g - (g @ n_grad) / max(float(n_grad @ n_grad), np.finfo(float).tiny) * n_grad
            slope = float(d @ g)
            if slope <= 0.0:  # pragma: no cover - stationary on the manifold
                break
        accepted = False
        a = alpha
        for _ in range(60):
            cand = _ray_to_nehari(params, op, w - a * d)
            if cand is not None:
                v_cand = phi_of(cand)
                if v_cand <= val - 1e-4 * a * slope:
                    w, val = cand, v_cand
                    alpha = a * 1.3 if a == alpha else a
                    accepted = True
                    break
            a *= 0.5
        if not accepted:
            break
    return w


def _equidistribute(Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Resample the polyline to uniform arc length in the A-metric."""
    m = Z.shape[0]
    diffs = Z[1:] - Z[:-1]
    seg = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", diffs, A, diffs), 0.0))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0.0:  # pragma: no cover - degenerate flat path
        return Z.copy()
    targets = np.linspace(0.0, total, m)
    out = np.empty_like(Z)
    out[0], out[-1] = Z[0], Z[-1]
    for i in range(1, m - 1):
        k = int(np.searchsorted(cum, targets[i], side="right") - 1)
        k = min(k, m - 2)
        theta = (targets[i] - cum[k]) / seg[k] if seg[k] > 0.0 else 0.0
        out[i] = Z[k] + theta * diffs[k]
    return out


def ps_diagnostics(
    params: ProblemParams, op: StiffnessOperator, field: RadialField
) -> PSReport:
    """Gradient norm and critical-level identity at a candidate field.

    Contracting the Euler equation with u shows that every critical point
    satisfies  u^T A u = lam int |u|^q + int |u|^{q_s}, hence

        Phi(u) = lam (q-2)/(2q) int |u|^q + (s/n) int |u|^{q_s}.

    The relative residual of that identity is near zero exactly when the
    gradient is, which is the signature of a genuine Palais-Smale limit.
    """
    qs = critical_exponent(params.n, params.s)
    quad_form, sub, crit = _phi_scalars(params, op, field.dofs)
    level = 0.5 * quad_form - (params.lam / params.q) * sub - crit / qs
    grad = phi_gradient(params, op, field)
    predicted = params.lam * (params.q - 2.0) / (2.0 * params.q) * sub \
        + (params.s / params.n) * crit
    resid = abs(level - predicted) / max(abs(level), np.finfo(float).tiny)
    return PSReport(
        grad_norm=float(np.linalg.norm(grad)),
        seminorm_part=quad_form,
        subcritical_mass=sub,
        critical_mass=crit,
        level=level,
        identity_residual=resid,
    )
