"""Catalog of convex disc functions g with g(0) = 1 and their image geometry.

Four closed-form families are supported: the Moebius map (1-z)/(1+z) onto the
right half-plane, the starlike-of-order-alpha maps onto discs/half-planes, the
almost-starlike maps onto shifted half-planes, and the strongly-starlike power
maps onto sectors.  Each family carries exact formulas for the derivative at
the origin, the distance ``d1`` from 1 to the image boundary, and membership
of a point in the image via the inverse map.  A ``custom`` family accepts
pointwise/boundary evaluators and falls back to boundary-grid scans with
golden-section refinement and polyline winding numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericalInstabilityError, UnsupportedError

MOEBIUS = "moebius"
STARLIKE_ORDER = "starlike_order"
ALMOST_STARLIKE = "almost_starlike"
STRONGLY_STARLIKE = "strongly_starlike"
CUSTOM = "custom"

FAMILIES = (MOEBIUS, STARLIKE_ORDER, ALMOST_STARLIKE, STRONGLY_STARLIKE, CUSTOM)
CATALOG_FAMILIES = (MOEBIUS, STARLIKE_ORDER, ALMOST_STARLIKE, STRONGLY_STARLIKE)

INSIDE = "inside"
OUTSIDE = "outside"
INDETERMINATE = "indeterminate"

#: number of boundary/radial grid points used by the numeric scans
GRID_SIZE = 4096


@dataclass(frozen=True)
class DiscFunction:
    """A univalent holomorphic function on the unit disc with g(0) = 1.

    ``alpha`` is required for the three parametric families: in [0, 1) for
    ``starlike_order`` and ``almost_starlike``, in (0, 1] for
    ``strongly_starlike``.  Custom functions supply a pointwise ``evaluator``
    and optionally an ``inverse`` (w -> preimage) and a ``boundary``
    parametrization theta -> g(e^{i theta}).
    """

    family: str
    alpha: Optional[float] = None
    evaluator: Optional[Callable] = None
    inverse: Optional[Callable] = None
    boundary: Optional[Callable] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown disc-function family {self.family!r}")
        if self.family == MOEBIUS and self.alpha is not None:
            raise DomainError("moebius takes no alpha parameter")
        if self.family in (STARLIKE_ORDER, ALMOST_STARLIKE):
            if self.alpha is None or not 0.0 <= self.alpha < 1.0:
                raise DomainError(f"{self.family} needs alpha in [0, 1)")
        if self.family == STRONGLY_STARLIKE:
            if self.alpha is None or not 0.0 < self.alpha <= 1.0:
                raise DomainError("strongly_starlike needs alpha in (0, 1]")
        if self.family == CUSTOM and self.evaluator is None:
            raise DomainError("custom disc function needs an evaluator")

    @property
    def is_catalog(self) -> bool:
        return self.family != CUSTOM


def describe(g: DiscFunction) -> str:
    if g.alpha is None:
        return g.family
    return f"{g.family}({g.alpha:g})"


def moebius() -> DiscFunction:
    return DiscFunction(MOEBIUS)


def starlike_order(alpha: float) -> DiscFunction:
    return DiscFunction(STARLIKE_ORDER, alpha)


def almost_starlike(alpha: float) -> DiscFunction:
    return DiscFunction(ALMOST_STARLIKE, alpha)


def strongly_starlike(alpha: float) -> DiscFunction:
    return DiscFunction(STRONGLY_STARLIKE, alpha)


# ---------------------------------------------------------------------------
# evaluation


def _eval_raw(g: DiscFunction, zeta):
    """Evaluate g without domain checks (the formulas extend past |z| = 1)."""
    z = np.asarray(zeta, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        if g.family == MOEBIUS:
            return (1.0 - z) / (1.0 + z)
        if g.family == STARLIKE_ORDER:
            beta = 1.0 - 2.0 * g.alpha
            return (1.0 - z) / (1.0 + beta * z)
        if g.family == ALMOST_STARLIKE:
            beta = 1.0 - 2.0 * g.alpha
            return (1.0 - beta * z) / (1.0 + z)
        if g.family == STRONGLY_STARLIKE:
            # principal branch; (1-z)/(1+z) has positive real part on the
            # disc, so the principal log never crosses its cut there
            w = (1.0 - z) / (1.0 + z)
            return np.exp(g.alpha * np.log(w))
        return np.asarray(g.evaluator(z), dtype=complex)


def evaluate(g: DiscFunction, zeta):
    """Value of g at a point (or array of points) of the open unit disc."""
    z = np.asarray(zeta, dtype=complex)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("disc function evaluated at |zeta| >= 1")
    out = _eval_raw(g, z)
    return out if out.shape else complex(out)


def derivative(g: DiscFunction, zeta):
    """g'(zeta); analytic for the catalog, Cauchy circle for custom."""
    z = np.asarray(zeta, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        if g.family == MOEBIUS:
            out = -2.0 / (1.0 + z) ** 2
        elif g.family == STARLIKE_ORDER:
            beta = 1.0 - 2.0 * g.alpha
            out = -(1.0 + beta) / (1.0 + beta * z) ** 2
        elif g.family == ALMOST_STARLIKE:
            beta = 1.0 - 2.0 * g.alpha
            out = -(beta + 1.0) / (1.0 + z) ** 2
        elif g.family == STRONGLY_STARLIKE:
            out = _eval_raw(g, z) * g.alpha * (-2.0) / (1.0 - z * z)
        else:
            out = _cauchy_derivative(g, z)
    return out if out.shape else complex(out)


def _cauchy_derivative(g: DiscFunction, z, n_nodes: int = 32):
    """First derivative of a custom g by a Cauchy integral on small circles."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    radius = np.minimum(0.05, 0.5 * (1.0 - np.abs(z)))
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    ring = np.exp(1j * theta)
    samples = np.asarray(g.evaluator(z[:, None] + radius[:, None] * ring[None, :]), dtype=complex)
    coeff = (samples * np.exp(-1j * theta)[None, :]).mean(axis=1) / radius
    return coeff.reshape(np.shape(z))


def g_prime0(g: DiscFunction) -> complex:
    """Derivative of g at the origin.

    Closed forms for the catalog; for a custom g the value is taken from a
    Cauchy integral on the circle of radius 0.25 and cross-checked against a
    fourth-order central difference with step 1e-5.
    """
    if g.family == MOEBIUS:
        return -2.0 + 0.0j
    if g.family in (STARLIKE_ORDER, ALMOST_STARLIKE):
        return complex(-2.0 * (1.0 - g.alpha))
    if g.family == STRONGLY_STARLIKE:
        return complex(-2.0 * g.alpha)
    rho, m = 0.25, 64
    theta = 2.0 * np.pi * np.arange(m) / m
    vals = np.asarray(g.evaluator(rho * np.exp(1j * theta)), dtype=complex)
    cauchy = complex((vals * np.exp(-1j * theta)).mean() / rho)
    h = 1e-5
    pts = np.array([2 * h, h, -h, -2 * h], dtype=complex)
    f = np.asarray(g.evaluator(pts), dtype=complex)
    central = complex((-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h))
    if abs(cauchy - central) > 1e-6:
        raise NumericalInstabilityError(
            f"custom g'(0): Cauchy {cauchy} vs central difference {central}"
        )
    return cauchy


# ---------------------------------------------------------------------------
# boundary distance d1 and the radial infimum a0


def _boundary_values(g: DiscFunction, theta):
    if g.is_catalog:
        return _eval_raw(g, np.exp(1j * np.asarray(theta, dtype=float)))
    if g.boundary is None:
        raise UnsupportedError("custom disc function has no boundary parametrization")
    return np.asarray(g.boundary(np.asarray(theta, dtype=float)), dtype=complex)


def _golden_refine(fun, xa, xb, xc):
    """Golden-section minimum of fun over a validated bracket, else fun(xb)."""
    fa, fb, fc = fun(xa), fun(xb), fun(xc)
    if not (fb < fa and fb < fc):
        return fb
    xmin, fval, _ = optimize.golden(fun, brack=(xa, xb, xc), tol=1e-12, full_output=True)
    return min(fb, fval)


def d1(g: DiscFunction) -> float:
    """Distance from 1 = g(0) to the boundary of the image g(U).

    Catalog families use the closed forms (1 for moebius; 1 or (1-a)/a for
    starlike of order a; 1-a for almost starlike; sin(a*pi/2) for strongly
    starlike).  Custom functions go through the boundary-grid scan.
    """
    if g.family == MOEBIUS:
        return 1.0
    if g.family == STARLIKE_ORDER:
        return 1.0 if g.alpha <= 0.5 else (1.0 - g.alpha) / g.alpha
    if g.family == ALMOST_STARLIKE:
        return 1.0 - g.alpha
    if g.family == STRONGLY_STARLIKE:
        return math.sin(g.alpha * math.pi / 2.0)
    return d1_grid(g)


def d1_grid(g: DiscFunction, n_grid: int = GRID_SIZE) -> float:
    """Numeric boundary distance: grid scan of |g(e^{i theta}) - 1| plus
    golden-section refinement around the three best grid points.

    Poles / infinite boundary points cannot be nearest points to 1 and are
    skipped.
    """
    theta = 2.0 * np.pi * np.arange(n_grid) / n_grid
    vals = _boundary_values(g, theta)
    dist = np.abs(vals - 1.0)
    dist[~np.isfinite(dist)] = np.inf

    def objective(t):
        v = _boundary_values(g, np.atleast_1d(t))[0]
        d = abs(v - 1.0)
        return d if np.isfinite(d) else 1e300

    step = 2.0 * np.pi / n_grid
    best = float(np.min(dist))
    for idx in np.argsort(dist)[:3]:
        t0 = theta[idx]
        if not np.isfinite(dist[idx]):
            continue
        best = min(best, _golden_refine(objective, t0 - step, t0, t0 + step))
    return best


def _a0_objective(g: DiscFunction, rho):
    rho = np.asarray(rho, dtype=float)
    right = np.abs(1.0 - _eval_raw(g, rho.astype(complex)))
    left = np.abs(_eval_raw(g, -rho.astype(complex)) - 1.0)
    out = np.minimum(right, left) / rho
    out[~np.isfinite(out)] = np.inf
    return out


def a0(g: DiscFunction, n_grid: int = GRID_SIZE) -> float:
    """Radial infimum over rho in (0,1) of min(|1-g(rho)|, |g(-rho)-1|)/rho.

    The scan combines a dense grid with golden-section refinement, the
    rho -> 0 limit |g'(0)|, and a linear-in-(1-rho) extrapolation of the
    rho -> 1 endpoint (the objective extends continuously whenever g does).
    """
    grid = np.linspace(1e-6, 1.0 - 1e-6, n_grid)
    vals = _a0_objective(g, grid)

    def objective(r):
        if not 0.0 < r < 1.0:
            return 1e300
        v = _a0_objective(g, np.atleast_1d(r))[0]
        return v if np.isfinite(v) else 1e300

    step = grid[1] - grid[0]
    candidates = [float(np.min(vals)), abs(g_prime0(g))]
    for idx in np.argsort(vals)[:3]:
        if not np.isfinite(vals[idx]):
            continue
        r0 = grid[idx]
        candidates.append(_golden_refine(objective, max(r0 - step, 1e-9), r0, min(r0 + step, 1.0 - 1e-9)))

    tail = _a0_objective(g, 1.0 - np.power(10.0, -np.arange(2.0, 7.0)))
    if np.all(np.isfinite(tail)):
        f5, f6 = tail[-2], tail[-1]
        candidates.append(float(f6 - (f5 - f6) / 9.0))  # extrapolate to rho = 1
        candidates.append(float(f6))
    return min(candidates)


# ---------------------------------------------------------------------------
# membership of a point in g(U)


def inverse_radius(g: DiscFunction, w):
    """|g^{-1}(w)| for catalog families (array-aware).

    Values below 1 certify membership of w in g(U), values above 1 certify
    exclusion.  For points far outside a sector image (where the principal
    power would wrap) a surrogate radius > 2 is returned.
    """
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        if g.family == MOEBIUS:
            r = np.abs((1.0 - w) / (1.0 + w))
        elif g.family == STARLIKE_ORDER:
            beta = 1.0 - 2.0 * g.alpha
            r = np.abs((1.0 - w) / (1.0 + beta * w))
        elif g.family == ALMOST_STARLIKE:
            beta = 1.0 - 2.0 * g.alpha
            r = np.abs((1.0 - w) / (w + beta))
        elif g.family == STRONGLY_STARLIKE:
            phi = np.abs(np.angle(w))
            r = 2.0 + phi
            safe = phi <= min(g.alpha * np.pi, np.pi) * (1.0 + 1e-14)
            u = np.exp(np.log(np.where(w == 0, 1.0, w)) / g.alpha)
            ru = np.abs((1.0 - u) / (1.0 + u))
            r = np.where(safe, ru, r)
            r = np.where(w == 0, 1.0, r)
        elif g.inverse is not None:
            r = np.abs(np.asarray(g.inverse(w), dtype=complex))
        else:
            raise UnsupportedError("no inverse available for this disc function")
    r = np.where(np.isnan(r), np.inf, r)
    return r if r.shape else float(r)


def boundary_margin(g: DiscFunction, w):
    """Signed Euclidean distance from w to the boundary of g(U).

    Positive inside the image, negative outside.  Closed forms for the
    catalog (half-planes, discs, sectors); signed polyline distance for
    custom functions with a boundary parametrization.
    """
    w = np.asarray(w, dtype=complex)
    if g.family == MOEBIUS or (g.family == STARLIKE_ORDER and g.alpha == 0.0):
        out = w.real
    elif g.family == STARLIKE_ORDER:
        c = 1.0 / (2.0 * g.alpha)
        out = c - np.abs(w - c)
    elif g.family == ALMOST_STARLIKE:
        out = w.real - g.alpha
    elif g.family == STRONGLY_STARLIKE:
        out = _sector_margin(w, g.alpha * np.pi / 2.0)
    else:
        out = _polyline_margin(g, w)
    out = np.asarray(out, dtype=float)
    return out if out.shape else float(out)


def _sector_margin(w, beta):
    """Signed distance to the boundary of the sector |arg w| < beta."""
    m = np.abs(w)
    phi = np.abs(np.angle(w))
    half_pi = np.pi / 2.0
    up = np.where(beta - phi < half_pi, m * np.sin(np.abs(beta - phi)), m)
    down = np.where(beta + phi < half_pi, m * np.sin(beta + phi), m)
    inside = np.minimum(up, down)
    delta = phi - beta
    outside = -np.where(delta < half_pi, m * np.sin(np.minimum(delta, half_pi)), m)
    return np.where(phi < beta, inside, outside)


@lru_cache(maxsize=32)
def _boundary_polyline(g: DiscFunction, n_grid: int = GRID_SIZE):
    theta = 2.0 * np.pi * np.arange(n_grid) / n_grid
    vals = _boundary_values(g, theta)
    if not np.all(np.isfinite(vals)):
        raise UnsupportedError("boundary polyline has non-finite points (unbounded image)")
    return np.append(vals, vals[0])  # close exactly; float noise at 2*pi breaks crossings


def _polyline_margin(g: DiscFunction, w):
    poly = _boundary_polyline(g)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    a, b = poly[:-1], poly[1:]
    seg = b - a
    seg_len2 = np.abs(seg) ** 2
    rel = w[:, None] - a[None, :]
    t = np.clip((rel * np.conj(seg[None, :])).real / seg_len2[None, :], 0.0, 1.0)
    dist = np.abs(rel - t * seg[None, :]).min(axis=1)
    sign = np.where(_winding_inside(poly, w), 1.0, -1.0)
    return sign * dist


def _winding_inside(poly, w):
    """Winding-number membership of points w w.r.t. a closed polyline."""
    x, y = poly.real, poly.imag
    wx, wy = w.real[:, None], w.imag[:, None]
    y0, y1 = y[None, :-1], y[None, 1:]
    x0, x1 = x[None, :-1], x[None, 1:]
    cross = (x1 - x0) * (wy - y0) - (wx - x0) * (y1 - y0)
    upward = (y0 <= wy) & (y1 > wy) & (cross > 0)
    downward = (y0 > wy) & (y1 <= wy) & (cross < 0)
    winding = upward.sum(axis=1) - downward.sum(axis=1)
    return winding != 0


def classify(g: DiscFunction, w, eps: float):
    """Vectorized membership verdicts: +1 inside, -1 outside, 0 indeterminate."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    scale = np.maximum(1.0, np.abs(w))
    if g.is_catalog or g.inverse is not None:
        r = np.asarray(inverse_radius(g, w))
        out = np.zeros(w.shape, dtype=np.int8)
        out[r < 1.0 - eps * scale] = 1
        out[r > 1.0 + eps * scale] = -1
        return out
    if g.boundary is None:
        raise UnsupportedError("custom disc function has neither inverse nor boundary")
    margin = _polyline_margin(g, w)
    out = np.zeros(w.shape, dtype=np.int8)
    out[margin > eps * scale] = 1
    out[margin < -eps * scale] = -1
    return out


def contains(g: DiscFunction, w: complex, eps: float) -> str:
    """Decide w in g(U): 'inside', 'outside' or 'indeterminate'."""
    code = classify(g, w, eps)[0]
    return {1: INSIDE, -1: OUTSIDE, 0: INDETERMINATE}[int(code)]


# ---------------------------------------------------------------------------
# serialization


def to_json(g: DiscFunction) -> dict:
    if not g.is_catalog:
        raise UnsupportedError("custom disc functions do not serialize")
    payload = {"family": g.family}
    if g.alpha is not None:
        payload["alpha"] = g.alpha
    return payload


def from_json(payload: dict) -> DiscFunction:
    return DiscFunction(payload["family"], payload.get("alpha"))
