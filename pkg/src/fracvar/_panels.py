"""Gauss-Legendre panel primitives shared by the quadrature modules."""

from __future__ import annotations

import numpy as np
from scipy.special import roots_legendre

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gl_rule(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    rule = _GL_CACHE.get(npts)
    if rule is None:
        x, w = roots_legendre(npts)
        rule = (np.asarray(x), np.asarray(w))
        _GL_CACHE[npts] = rule
    return rule


def panel_nodes(breaks: np.ndarray, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Map an npts-point GL rule onto each interval of ``breaks``.

    Returns flat arrays (nodes, weights) of length (len(breaks)-1)*npts,
    ordered panel by panel.
    """
    breaks = np.asarray(breaks, dtype=float)
    x, w = gl_rule(npts)
    lo = breaks[:-1][:, None]
    half = 0.5 * (breaks[1:] - breaks[:-1])[:, None]
    nodes = lo + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def geometric_refine(a: float, b: float, toward: float, ratio: float = 0.5, floor: float = 1e-12) -> np.ndarray:
    """Panel breakpoints on [a, b] accumulating geometrically toward one endpoint.

    ``toward`` must equal ``a`` or ``b``.  Successive panel widths shrink by
    ``ratio`` approaching that endpoint; subdivision stops once the panel
    adjacent to it is shorter than ``floor`` (the endpoint itself is always
    included, so the last panel has width <= floor).
    """
    if not b > a:
        raise ValueError("need b > a")
    length = b - a
    cuts = [0.0]
    d = length
    while d * ratio > floor:
        d *= ratio
        cuts.append(length - d)
    cuts.append(length)
    offsets = np.array(cuts)
    if toward == a:
        pts = b - offsets
    elif toward == b:
        pts = a + offsets
    else:
        raise ValueError("'toward' must be one of the interval endpoints")
    return np.unique(pts)
