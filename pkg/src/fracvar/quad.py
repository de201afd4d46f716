"""Weighted Gagliardo double integrals: radial reduction and Monte Carlo.

For radial u supported in [0, r_hi] the double integral

    N_p(u) = iint p(x) |u(x) - u(y)|^2 / |x - y|^(n+2s) dx dy

collapses, via x = r x', y = rho y' and the angular kernel K(tau), to

    N_p(u) = 2 sigma(S^{n-1}) * ( core + sliver + outer ),

    core   = int_0^{r_hi} r^{n-1-2s} int_0^{1-delta} wbar(r, tau r)
             |u(r) - u(tau r)|^2 K(tau) tau^{n-1} dtau dr,
    sliver = int_0^{r_hi} wbar(r, r) u'(r)^2 r^{n+1-2s} dr
             * K(1-delta) delta^{1+2s} * delta^{2-2s} / (2-2s),
    outer  = int_0^{r_hi} u(rho)^2 rho^{n-1-2s}
             int_0^{min(rho/r_hi, 1-delta)} wbar(rho/t, rho) K(t) t^{2s-1} dt drho,

where wbar is the symmetrized weight (p(r) + p(rho))/2, the sliver models the
|tau - 1| < delta band through the local Lipschitz expansion |u(r) - u(rho)|^2
~ u'(r)^2 (rho - r)^2 (the kernel there behaves like (1-tau)^(-1-2s), so the
band contributes delta^(2-2s)), and the outer fold accounts exactly for the
pairs whose larger radius exceeds r_hi, where u vanishes.  The prefactor
2 sigma(S^{n-1}) collects the ordered-pair doubling and the x'-sphere measure.

The Monte Carlo path is an independent oracle: pairs are sampled as
x ~ uniform(box), y = x + z with |z| drawn from the density proportional to
|z|^(2-n-2s) (cancelling the kernel singularity against the quadratic
difference), combined with a balance-heuristic weight over the two symmetric
generation routes, plus a zero-variance-in-|z| far piece for |z| beyond the
box diameter.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from ._panels import geometric_refine, panel_nodes
from .bubble import Bubble, TruncatedBubble
from .constants import kernel_batch, sphere_surface


class QuadratureError(RuntimeError):
    """Panel refinement failed to stabilize to the requested tolerance."""


@dataclass(frozen=True)
class PanelSpec:
    """Panel layout knobs for the deterministic path.

    ``r_breaks`` overrides the default profile-adapted radial panels.
    ``tol`` (absolute) turns the refinement estimate into a hard check.
    """

    n_r: int = 14
    n_t: int = 12
    delta: float = 1e-6
    t_floor: float = 1e-9
    kernel_npts: int = 20
    r_breaks: tuple[float, ...] | None = None
    tol: float | None = None
    estimate_error: bool = True


@dataclass(frozen=True)
class SeminormEstimate:
    value: float
    abs_error: float
    method: str  # "RadialDeterministic" | "MonteCarlo"
    samples_or_panels: int
    seed: int | None = None


# ---------------------------------------------------------------------------
# Radial profiles
# ---------------------------------------------------------------------------

class _CallableProfile:
    """Adapter giving a plain radial callable the profile interface."""

    def __init__(self, fn, support: float):
        self._fn = fn
        self.support = support

    def radial_value(self, r):
        return np.asarray(self._fn(np.asarray(r, dtype=float)), dtype=float)

    def radial_deriv(self, r):
        r = np.asarray(r, dtype=float)
        h = 1e-6 * np.maximum(r, 1.0)
        return (self._fn(r + h) - self._fn(np.maximum(r - h, 0.0))) / (h + np.minimum(r, h))


def as_profile(u, support: float):
    if hasattr(u, "radial_value") and hasattr(u, "radial_deriv"):
        return u
    if callable(u):
        return _CallableProfile(u, support)
    raise TypeError("expected a radial profile object or callable")


def default_r_breaks(profile, r_hi: float) -> np.ndarray:
    """Radial panel boundaries adapted to the profile's concentration scales."""
    pieces = []
    if isinstance(profile, TruncatedBubble):
        eps = profile.bubble.eps
        eta = profile.cutoff.eta
        pieces.append(geometric_refine(0.0, min(eta, r_hi), toward=0.0, ratio=0.5, floor=max(eps * 1e-8, 1e-14)))
        if r_hi > eta:
            pieces.append(np.linspace(eta, min(2.0 * eta, r_hi), 9))
        if r_hi > 2.0 * eta:
            pieces.append(geometric_refine(2.0 * eta, r_hi, toward=2.0 * eta, ratio=0.5, floor=0.1))
    elif isinstance(profile, Bubble):
        eps = profile.eps
        top = min(max(1.0, eps), r_hi)
        pieces.append(geometric_refine(0.0, top, toward=0.0, ratio=0.5, floor=max(eps * 1e-8, 1e-14)))
        if r_hi > top:
            pieces.append(geometric_refine(top, r_hi, toward=top, ratio=0.5, floor=0.1))
    else:
        pieces.append(geometric_refine(0.0, r_hi, toward=0.0, ratio=0.5, floor=r_hi * 1e-10))
        pieces.append(np.linspace(0.0, r_hi, 33))
    return np.unique(np.concatenate(pieces))


# ---------------------------------------------------------------------------
# Kernel helpers
# ---------------------------------------------------------------------------

def _tau_breaks(delta: float, t_floor: float) -> np.ndarray:
    """Master tau-panels on (0, 1 - delta): graded toward both endpoints."""
    lo = geometric_refine(0.0, 0.5, toward=0.0, ratio=0.5, floor=t_floor)
    hi = geometric_refine(0.5, 1.0 - delta, toward=1.0 - delta, ratio=0.5, floor=delta)
    return np.unique(np.concatenate([lo, hi]))


@lru_cache(maxsize=8)
def _kernel_interp(n: int, s: float):
    """Cached spline surrogate for K(tau) on (0, 1), ~1e-9 relative accuracy.

    Two charts: K vs log(tau) below 0.5 (K is flat toward 0), log(K) vs
    log(1 - tau) above (where K ~ (1-tau)^(-1-2s), so the chart is nearly
    linear).  The outer fold makes O(10^5) kernel queries per call, which
    would dominate the runtime if evaluated directly.
    """
    xl = np.linspace(math.log(1e-13), math.log(0.62), 1600)
    kl = kernel_batch(n, s, np.exp(xl))
    left = CubicSpline(xl, kl)
    yr = np.linspace(math.log(1e-8), math.log(0.62), 1000)
    kr = kernel_batch(n, s, 1.0 - np.exp(yr))
    right = CubicSpline(yr, np.log(kr))

    def ev(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        lo = t < 0.5
        tl = np.clip(t[lo], 1e-13, None)
        out[lo] = left(np.log(tl))
        th = np.clip(1.0 - t[~lo], 1e-8, None)
        out[~lo] = np.exp(right(np.log(th)))
        return out

    return ev


# ---------------------------------------------------------------------------
# Deterministic pair form
# ---------------------------------------------------------------------------

def _unit_weight(r):
    return np.ones_like(np.asarray(r, dtype=float))


def _weight_fns(w):
    """Return (radial evaluator, far-field limit) for a weight model or None."""
    if w is None:
        return _unit_weight, 1.0
    far = w.p0
    if getattr(w, "variant", None) == "TabulatedRadial":
        far = w.table[-1][1]
    return w.radial, far


def _rel_outer_breaks(t_floor: float) -> np.ndarray:
    lo = geometric_refine(0.0, 0.5, toward=0.0, ratio=0.5, floor=t_floor)
    hi = geometric_refine(0.5, 1.0, toward=1.0, ratio=0.5, floor=1e-7)
    breaks = np.unique(np.concatenate([lo, hi]))
    return breaks[breaks > 0.0] if breaks[0] == 0.0 else breaks


def _outer_fold(
    rn: np.ndarray,
    wfun,
    wfar: float,
    n: int,
    s: float,
    *,
    r_hi: float,
    n_t: int,
    delta: float,
    t_floor: float,
) -> np.ndarray:
    """Tail factor for pairs whose larger radius exceeds r_hi.

    For each inner radius ``rn[i]`` this is the exact t = r/rho fold of the
    kernel against the symmetrized weight over rho in (r_hi, inf), plus the
    analytic remainder below the relative floor where the far radius sits at
    the weight's far-field limit.  Contract against
    ``rw * u(rn) * v(rn) * rn**(n-1-2s)`` to recover the outer contribution.
    """
    two_s = 2.0 * s
    sig = sphere_surface(n)
    kv = _kernel_interp(n, float(s))
    rel = _rel_outer_breaks(t_floor)
    reln, relw = panel_nodes(rel, n_t)
    t_hi = np.minimum(rn / r_hi, 1.0 - delta)
    T = t_hi[:, None] * reln[None, :]
    TW = t_hi[:, None] * relw[None, :]
    with np.errstate(divide="ignore", over="ignore"):
        wbo = 0.5 * (wfun(rn[:, None] / np.maximum(T, 1e-300)) + wfun(rn)[:, None])
    fold = np.sum(wbo * kv(T) * T ** (two_s - 1.0) * TW, axis=1)
    # analytic remainder of the fold below the relative floor, where the
    # far radius rho/t is effectively at the weight's far-field limit
    t_lo = t_hi * rel[0]
    fold += 0.5 * (wfar + wfun(rn)) * sig * t_lo**two_s / two_s
    return fold


def _pair_form(
    pa,
    pb,
    wfun,
    wfar: float,
    n: int,
    s: float,
    r_breaks: np.ndarray,
    *,
    r_hi: float,
    include_outer: bool,
    n_r: int,
    n_t: int,
    delta: float,
    t_floor: float,
    kernel_npts: int,
) -> float:
    two_s = 2.0 * s
    sig = sphere_surface(n)

    rn, rw = panel_nodes(r_breaks, n_r)
    keep = rn > 0.0
    rn, rw = rn[keep], rw[keep]

    # --- core ---------------------------------------------------------
    tb = _tau_breaks(delta, t_floor)
    tn, tw = panel_nodes(tb, n_t)
    Kv = kernel_batch(n, s, tn, npts=kernel_npts)
    inner_r = rn[:, None] * tn[None, :]
    da = pa.radial_value(rn)[:, None] - pa.radial_value(inner_r)
    db = da if pb is pa else pb.radial_value(rn)[:, None] - pb.radial_value(inner_r)
    wb = 0.5 * (wfun(rn)[:, None] + wfun(inner_r))
    tau_fac = tw * tn ** (n - 1) * Kv
    r_fac = rw * rn ** (n - 1.0 - two_s)
    core = float(np.einsum("i,ij->", r_fac, wb * da * db * tau_fac[None, :]))

    # --- sliver -------------------------------------------------------
    k_edge = float(kernel_batch(n, s, np.array([1.0 - delta]), npts=kernel_npts)[0])
    band = k_edge * delta ** (1.0 + two_s) * delta ** (2.0 - two_s) / (2.0 - two_s)
    sliver = band * float(
        np.sum(rw * wfun(rn) * pa.radial_deriv(rn) * pb.radial_deriv(rn) * rn ** (n + 1.0 - two_s))
    )

    total = core + sliver

    # --- outer --------------------------------------------------------
    if include_outer:
        fold = _outer_fold(rn, wfun, wfar, n, s, r_hi=r_hi, n_t=n_t, delta=delta, t_floor=t_floor)
        ua = pa.radial_value(rn)
        ub = ua if pb is pa else pb.radial_value(rn)
        total += float(np.sum(rw * ua * ub * rn ** (n - 1.0 - two_s) * fold))

    return 2.0 * sig * total


def _halved(breaks: np.ndarray) -> np.ndarray:
    breaks = np.asarray(breaks, dtype=float)
    return np.unique(np.concatenate([breaks, 0.5 * (breaks[1:] + breaks[:-1])]))


def _run_pair_form(pa, pb, wfun, wfar, n, s, r_breaks, *, r_hi, include_outer, spec: PanelSpec):
    kwargs = dict(
        r_hi=r_hi,
        include_outer=include_outer,
        n_r=spec.n_r,
        n_t=spec.n_t,
        delta=spec.delta,
        t_floor=spec.t_floor,
        kernel_npts=spec.kernel_npts,
    )
    coarse = _pair_form(pa, pb, wfun, wfar, n, s, r_breaks, **kwargs)
    npanels = len(r_breaks) - 1
    if not spec.estimate_error:
        return coarse, math.nan, npanels
    fine = _pair_form(pa, pb, wfun, wfar, n, s, _halved(r_breaks), **kwargs)
    err = abs(fine - coarse)
    if spec.tol is not None and err > spec.tol:
        raise QuadratureError(
            f"panel halving moved the value by {err:.3e}, above the requested tolerance {spec.tol:.3e}"
        )
    return fine, err, 2 * npanels


def seminorm_radial(u, w, n: int, s: float, r_max: float, panels: PanelSpec | None = None) -> SeminormEstimate:
    """Deterministic weighted Gagliardo seminorm of a radial profile.

    ``u`` is a radial profile (or callable, treated as supported in
    [0, r_max]); ``w`` is a radial weight model or None for the unit weight.
    The estimate's ``abs_error`` is the shift observed under one panel
    halving; pass ``panels.tol`` to make stabilization failures raise.
    """
    spec = panels or PanelSpec()
    prof = as_profile(u, r_max)
    r_hi = min(r_max, prof.support) if math.isfinite(prof.support) else r_max
    breaks = np.asarray(spec.r_breaks, dtype=float) if spec.r_breaks is not None else default_r_breaks(prof, r_hi)
    breaks = breaks[breaks <= r_hi * (1.0 + 1e-15)]
    if breaks[-1] < r_hi:
        breaks = np.append(breaks, r_hi)
    wfun, wfar = _weight_fns(w)
    value, err, npanels = _run_pair_form(
        prof, prof, wfun, wfar, n, s, breaks, r_hi=r_hi, include_outer=True, spec=spec
    )
    return SeminormEstimate(value=value, abs_error=err, method="RadialDeterministic", samples_or_panels=npanels)


def bilinear_radial(u, v, w, n: int, s: float, r_max: float, panels: PanelSpec | None = None) -> float:
    """The weighted scalar product <u, v>_p of two radial profiles.

    Same decomposition as :func:`seminorm_radial` with the quadratic
    difference polarized into a product of differences; single pass.
    """
    spec = panels or PanelSpec(estimate_error=False)
    pu = as_profile(u, r_max)
    pv = as_profile(v, r_max)
    sup = max(
        pu.support if math.isfinite(pu.support) else r_max,
        pv.support if math.isfinite(pv.support) else r_max,
    )
    r_hi = min(r_max, sup)
    if spec.r_breaks is not None:
        breaks = np.asarray(spec.r_breaks, dtype=float)
    else:
        breaks = np.unique(np.concatenate([default_r_breaks(pu, r_hi), default_r_breaks(pv, r_hi)]))
    wfun, wfar = _weight_fns(w)
    value, _, _ = _run_pair_form(
        pu, pv, wfun, wfar, n, s, breaks, r_hi=r_hi, include_outer=True,
        spec=PanelSpec(
            n_r=spec.n_r, n_t=spec.n_t, delta=spec.delta, t_floor=spec.t_floor,
            kernel_npts=spec.kernel_npts, estimate_error=False,
        ),
    )
    return value


def ball_restricted_form(u, weight_fn, n: int, s: float, r_hi: float, panels: PanelSpec | None = None) -> float:
    """Pair form restricted to both points in the ball of radius r_hi.

    ``weight_fn`` is an arbitrary radial factor (e.g. r^k); it is
    symmetrized across the pair exactly like a weight model.  No outer
    fold: pairs leaving the ball are excluded by definition.
    """
    spec = panels or PanelSpec(estimate_error=False)
    prof = as_profile(u, math.inf)
    breaks = np.asarray(spec.r_breaks, dtype=float) if spec.r_breaks is not None else default_r_breaks(prof, r_hi)
    breaks = breaks[breaks <= r_hi * (1.0 + 1e-15)]
    if breaks[-1] < r_hi:
        breaks = np.append(breaks, r_hi)
    value, _, _ = _run_pair_form(
        prof, prof, weight_fn, 0.0, n, s, breaks, r_hi=r_hi, include_outer=False,
        spec=PanelSpec(
            n_r=spec.n_r, n_t=spec.n_t, delta=spec.delta, t_floor=spec.t_floor,
            kernel_npts=spec.kernel_npts, estimate_error=False,
        ),
    )
    return value


# ---------------------------------------------------------------------------
# Radial power integrals and energies
# ---------------------------------------------------------------------------

def radial_power_integral(u, expo: float, n: int, *, r_max: float | None = None, npts: int = 16) -> float:
    """\\int |u|^expo dx for a radial profile, by graded Gauss-Legendre panels."""
    prof = as_profile(u, r_max if r_max is not None else math.inf)
    top = prof.support if math.isfinite(prof.support) else r_max
    if top is None:
        raise ValueError("profile has unbounded support; pass r_max")
    if r_max is not None:
        top = min(top, r_max)
    if isinstance(u, (Bubble, TruncatedBubble)):
        from .bubble import _lq_breaks

        eps = u.eps if isinstance(u, Bubble) else u.bubble.eps
        eta = None if isinstance(u, Bubble) else u.cutoff.eta
        breaks = _lq_breaks(eps, eta, top)
    else:
        breaks = np.unique(
            np.concatenate(
                [geometric_refine(0.0, top, toward=0.0, ratio=0.5, floor=top * 1e-10), np.linspace(0.0, top, 33)]
            )
        )
    r, wq = panel_nodes(breaks, npts)
    vals = np.abs(prof.radial_value(r)) ** expo
    return sphere_surface(n) * float(np.sum(wq * vals * r ** (n - 1)))


def weighted_energy(
    u,
    w,
    n: int,
    s: float,
    lam: float,
    q: float,
    *,
    functional: bool = False,
    r_max: float | None = None,
    panels: PanelSpec | None = None,
) -> float:
    """E_lambda(u) = N_p(u) - lambda \\int |u|^q, or the full functional.

    With ``functional=True`` returns
    Phi(u) = N_p(u)/2 - (lambda/q) \\int |u|^q - (1/q_s) \\int |u|^{q_s}.
    """
    prof = as_profile(u, r_max if r_max is not None else math.inf)
    top = prof.support if math.isfinite(prof.support) else r_max
    if top is None:
        raise ValueError("profile has unbounded support; pass r_max")
    spec = panels or PanelSpec(estimate_error=False)
    npart = seminorm_radial(u, w, n, s, top, panels=spec).value
    qpart = radial_power_integral(u, q, n, r_max=top)
    if not functional:
        return npart - lam * qpart
    qs = 2.0 * n / (n - 2.0 * s)
    crit = radial_power_integral(u, qs, n, r_max=top)
    return 0.5 * npart - (lam / q) * qpart - crit / qs


# ---------------------------------------------------------------------------
# Monte Carlo estimator
# ---------------------------------------------------------------------------

def _ball_volume(n: int, R: float) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0) * R**n


def _sample_ball(rng, m: int, n: int, R: float) -> np.ndarray:
    v = rng.standard_normal((m, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (R * rng.random(m) ** (1.0 / n))[:, None]


def _sample_dirs(rng, m: int, n: int) -> np.ndarray:
    v = rng.standard_normal((m, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _point_eval(u, pts: np.ndarray) -> np.ndarray:
    if hasattr(u, "radial_value"):
        return np.asarray(u.radial_value(np.linalg.norm(pts, axis=1)), dtype=float)
    return np.asarray(u(pts), dtype=float)


def _weight_points(w, pts: np.ndarray) -> np.ndarray:
    if w is None:
        return np.ones(len(pts))
    c = np.zeros(pts.shape[1]) if w.a is None else np.asarray(w.a, dtype=float)
    return np.asarray(w.radial(np.linalg.norm(pts - c, axis=1)), dtype=float)


def mc_reference_ks(n: int, s: float, N: int = 1_000_000, seed: int = 0, *, batches: int = 64) -> SeminormEstimate:
    """Monte Carlo estimate of Ks: the full-space seminorm of the unit bubble.

    Independent of the deterministic radial path.  Because the unit bubble
    has unbounded support, x is drawn over all of R^n with a half-Cauchy
    radius (heavy enough to cover both the core and the algebraic tail),
    while |x - y| uses the same singularity-cancelling split as
    :func:`seminorm_mc` at pivot 4.  The per-pair density is symmetrized
    over which endpoint was drawn first (balance heuristic): without this,
    pairs whose sampled endpoint sits far out while the partner lands on
    the bubble core carry weights with an infinite-variance Pareto tail.
    """
    sig = sphere_surface(n)
    two_s = 2.0 * s
    alpha = (n - two_s) / 2.0
    D = 4.0

    def u_pt(pts):
        r2 = np.sum(pts * pts, axis=1)
        return (1.0 + r2) ** (-alpha)

    def fx_of(r):
        r = np.maximum(r, 1e-12)
        return (2.0 / math.pi) / (1.0 + r * r) / (sig * r ** (n - 1.0))

    m = max(N // batches, 16)
    m_far = max(m // 4, 8)
    children = np.random.SeedSequence(seed).spawn(batches)
    batch_vals = np.empty(batches)
    for b in range(batches):
        rng = np.random.default_rng(children[b])
        ux = np.clip(rng.random(m), 1e-12, 1.0 - 1e-12)
        rx = np.tan(0.5 * math.pi * ux)
        x = _sample_dirs(rng, m, n) * rx[:, None]

        uz = np.maximum(rng.random(m), 1e-18)
        rz = np.maximum(D * uz ** (1.0 / (2.0 - two_s)), D * 1e-9)
        g = (2.0 - two_s) / (sig * D ** (2.0 - two_s)) * rz ** (2.0 - n - two_s)
        y = x + _sample_dirs(rng, m, n) * rz[:, None]
        du = u_pt(x) - u_pt(y)
        fmix = 0.5 * (fx_of(rx) + fx_of(np.linalg.norm(y, axis=1)))
        w_near = du**2 * rz ** (-(n + two_s)) / (fmix * g)

        uf = np.maximum(rng.random(m_far), 1e-16)
        rzf = D * uf ** (-1.0 / two_s)
        h = two_s * D**two_s / sig * rzf ** (-(n + two_s))
        yf = x[:m_far] + _sample_dirs(rng, m_far, n) * rzf[:, None]
        duf = u_pt(x[:m_far]) - u_pt(yf)
        fmixf = 0.5 * (fx_of(rx[:m_far]) + fx_of(np.linalg.norm(yf, axis=1)))
        w_far = duf**2 * rzf ** (-(n + two_s)) / (fmixf * h)

        batch_vals[b] = w_near.mean() + w_far.mean()

    value = float(batch_vals.mean())
    se = float(batch_vals.std(ddof=1) / math.sqrt(batches))
    return SeminormEstimate(
        value=value, abs_error=se, method="MonteCarlo", samples_or_panels=batches * (m + m_far), seed=seed
    )


def seminorm_mc(
    u,
    w,
    n: int,
    s: float,
    box: float | None = None,
    N: int = 200_000,
    seed: int = 0,
    *,
    batches: int = 64,
) -> SeminormEstimate:
    """Unbiased Monte Carlo estimate of the weighted Gagliardo seminorm.

    ``box`` is the radius of the sampling ball; defaults to 1.5x the profile
    support (required for plain callables, whose support is unknown).  The
    near piece pairs x ~ uniform(box) with y = x + z, |z| <= diam drawn from
    the singularity-cancelling radial density, weighted by the balance
    heuristic over the two symmetric generation routes; the far piece
    (|z| > diam, where the partner point is guaranteed outside the support)
    is doubled to cover its mirror region.  Reproducible per seed: batch b
    draws from the b-th spawn of the seed sequence, so the result is
    independent of how batches would be scheduled.
    """
    if hasattr(u, "support") and math.isfinite(getattr(u, "support")):
        support = float(u.support)
    elif box is not None:
        support = None
    else:
        raise ValueError("profile support unknown; pass an explicit box radius")
    r_box = float(box) if box is not None else 1.5 * support
    r_tail = support if support is not None else r_box
    diam = 2.0 * r_box

    sig = sphere_surface(n)
    v_box = _ball_volume(n, r_box)
    v_tail = _ball_volume(n, r_tail)
    two_s = 2.0 * s

    m = max(N // batches, 16)
    m_near = (3 * m) // 4
    m_tail = m - m_near
    children = np.random.SeedSequence(seed).spawn(batches)
    batch_vals = np.empty(batches)

    for b in range(batches):
        rng = np.random.default_rng(children[b])

        # near piece: |z| <= diam
        x = _sample_ball(rng, m_near, n, r_box)
        dirs = _sample_dirs(rng, m_near, n)
        u01 = rng.random(m_near)
        rho = np.maximum(diam * u01 ** (1.0 / (2.0 - two_s)), diam * 1e-9)
        y = x + dirs * rho[:, None]
        g = (2.0 - two_s) / (sig * diam ** (2.0 - two_s)) * rho ** (2.0 - n - two_s)
        wbar = 0.5 * (_weight_points(w, x) + _weight_points(w, y))
        du = _point_eval(u, x) - _point_eval(u, y)
        F = wbar * du**2 * rho ** (-(n + two_s))
        in_box = (np.linalg.norm(y, axis=1) <= r_box).astype(float)
        w_near = 2.0 * F * v_box / (g * (1.0 + in_box))

        # far piece: |z| > diam, partner point outside the support
        xt = _sample_ball(rng, m_tail, n, r_tail)
        dirt = _sample_dirs(rng, m_tail, n)
        u01t = np.maximum(rng.random(m_tail), 1e-16)
        rho_t = diam * u01t ** (-1.0 / two_s)
        yt = xt + dirt * rho_t[:, None]
        h = two_s * diam**two_s / sig * rho_t ** (-(n + two_s))
        wbar_t = 0.5 * (_weight_points(w, xt) + _weight_points(w, yt))
        Ft = wbar_t * _point_eval(u, xt) ** 2 * rho_t ** (-(n + two_s))
        w_far = 2.0 * Ft * v_tail / h

        batch_vals[b] = w_near.mean() + w_far.mean()

    value = float(batch_vals.mean())
    se = float(batch_vals.std(ddof=1) / math.sqrt(batches))
    if value != 0.0 and se > 0.2 * abs(value):
        warnings.warn(
            f"Monte Carlo variance overflow: relative standard error {se / abs(value):.1%} exceeds 20%",
            RuntimeWarning,
            stacklevel=2,
        )
    return SeminormEstimate(
        value=value, abs_error=se, method="MonteCarlo", samples_or_panels=batches * m, seed=seed
    )
