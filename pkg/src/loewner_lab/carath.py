"""Holomorphic self-maps of the ball and the image-constraint certifier.

Maps come in three representations: sparse polynomial tables, composite
expression trees (identity, g(l(z))*z blocks, quadratic monomial terms and
linear/convex combinations) and black-box evaluators.  All evaluators are
batched: ``values`` takes an (m, n) array of points.

``second_coeff`` extracts the second-order Taylor data at the origin through
Cauchy integrals discretized as DFTs on circles/2-tori, with a dual-radius
consistency check.  ``certify_Mg`` tests, by structured and Monte-Carlo
sampling, that all supporting values l_z(h(z))/||z|| of a normalized map lie
in the image g(U).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from . import ball_geometry as bg
from . import disc_functions as df
from .errors import (
    DegenerateFunctionalError,
    DomainError,
    NumericalInstabilityError,
    ReducedPrecisionWarning,
    UnsupportedError,
)

PURE = "pure"
MIXED = "mixed"

#: radii used for the random certification samples
RADIUS_LADDER = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99, 0.999)
#: radii and per-axis phase count of the structured certification tori
TORUS_RADII = (0.9, 0.99, 0.999)
TORUS_PHASES = 64

_FD_STEP = 1e-5


# ---------------------------------------------------------------------------
# map representations


class HolMap:
    """Base class; concrete maps implement batched values and Jacobians."""

    domain: bg.BallGeometry
    normalized: bool

    def values(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def jacobian_batch(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return type(self).__name__


class PolynomialMap(HolMap):
    """Sparse polynomial map: terms[(component, exponents)] = coefficient.

    Components are 1-based, exponents are tuples of length n.
    """

    def __init__(self, terms: Dict[Tuple[int, Tuple[int, ...]], complex],
                 domain: bg.BallGeometry, normalized: bool = False, label: str = ""):
        self.terms = {key: complex(c) for key, c in terms.items() if c != 0}
        self.domain = domain
        self.normalized = normalized
        self.label = label

    def values(self, Z):
        Z = np.asarray(Z, dtype=complex)
        out = np.zeros_like(Z)
        for (comp, exps), c in self.terms.items():
            mon = np.ones(Z.shape[0], dtype=complex)
            for k, e in enumerate(exps):
                if e:
                    mon = mon * Z[:, k] ** e
            out[:, comp - 1] += c * mon
        return out

    def jacobian_batch(self, Z):
        Z = np.asarray(Z, dtype=complex)
        m, n = Z.shape
        J = np.zeros((m, n, n), dtype=complex)
        for (comp, exps), c in self.terms.items():
            for k, e in enumerate(exps):
                if not e:
                    continue
                mon = np.full(m, c * e, dtype=complex)
                for k2, e2 in enumerate(exps):
                    p = e2 - 1 if k2 == k else e2
                    if p:
                        mon = mon * Z[:, k2] ** p
                J[:, comp - 1, k] += mon
        return J

    def coefficient(self, comp: int, exps: Tuple[int, ...]) -> complex:
        """Exact table lookup (the analytic oracle for coefficient tests)."""
        return self.terms.get((comp, tuple(exps)), 0.0 + 0.0j)

    def describe(self):
        return self.label or f"polynomial[{len(self.terms)} terms]"


class BlackBoxMap(HolMap):
    """Map given only by an evaluator; Jacobians use 4th-order differences."""

    def __init__(self, fn, domain: bg.BallGeometry, normalized: bool = False,
                 label: str = "black_box", provenance=None):
        self.fn = fn
        self.domain = domain
        self.normalized = normalized
        self.label = label
        self.provenance = provenance

    def values(self, Z):
        return np.asarray(self.fn(np.asarray(Z, dtype=complex)), dtype=complex)

    def jacobian_batch(self, Z):
        Z = np.asarray(Z, dtype=complex)
        m, n = Z.shape
        h = _FD_STEP
        offsets = np.array([2 * h, h, -h, -2 * h])
        pts = np.repeat(Z[:, None, None, :], n, axis=1).repeat(4, axis=2)
        for k in range(n):
            pts[:, k, :, k] += offsets
        vals = self.values(pts.reshape(-1, n)).reshape(m, n, 4, n)
        # d/dz_k along the real direction equals the complex derivative
        deriv = (-vals[:, :, 0] + 8 * vals[:, :, 1] - 8 * vals[:, :, 2] + vals[:, :, 3]) / (12 * h)
        return np.swapaxes(deriv, 1, 2)

    def describe(self):
        return self.label


class CompositeMap(HolMap):
    """Expression-tree map; nodes implement values/jacobian_batch with (Z, dom)."""

    def __init__(self, node, domain: bg.BallGeometry, normalized: bool = False, label: str = ""):
        self.node = node
        self.domain = domain
        self.normalized = normalized
        self.label = label

    def values(self, Z):
        return self.node.values(np.asarray(Z, dtype=complex), self.domain)

    def jacobian_batch(self, Z):
        return self.node.jacobian_batch(np.asarray(Z, dtype=complex), self.domain)

    def describe(self):
        return self.label or self.node.describe()


def _cplx(value: complex) -> dict:
    return {"re": float(value.real), "im": float(value.imag)}


def _uncplx(payload: dict) -> complex:
    return complex(payload["re"], payload["im"])


@dataclass(frozen=True)
class Identity:
    def values(self, Z, dom):
        return Z.copy()

    def jacobian_batch(self, Z, dom):
        return np.broadcast_to(np.eye(dom.n, dtype=complex), (Z.shape[0], dom.n, dom.n)).copy()

    def describe(self):
        return "identity"

    def to_json(self):
        return {"node": "identity"}


@dataclass(frozen=True)
class DiscMultiple:
    """z -> g(l(z)) * z for a disc function g and a norm-one functional l."""

    g: df.DiscFunction
    functional: bg.LinearFunctional

    def values(self, Z, dom):
        lz = Z @ np.asarray(self.functional.coeffs, dtype=complex)
        return df._eval_raw(self.g, lz)[:, None] * Z

    def jacobian_batch(self, Z, dom):
        coeffs = np.asarray(self.functional.coeffs, dtype=complex)
        lz = Z @ coeffs
        gval = df._eval_raw(self.g, lz)
        gp = df.derivative(self.g, lz)
        eye = np.eye(dom.n, dtype=complex)
        return gval[:, None, None] * eye + gp[:, None, None] * (Z[:, :, None] * coeffs[None, None, :])

    def describe(self):
        return f"{df.describe(self.g)}(l(z))*z"

    def to_json(self):
        return {"node": "disc_multiple", "g": df.to_json(self.g),
                "coeffs": [_cplx(c) for c in self.functional.coeffs]}


@dataclass(frozen=True)
class MonomialShear:
    """z -> c * z_j^2 * e_i (1-based indices)."""

    c: complex
    i: int
    j: int

    def values(self, Z, dom):
        out = np.zeros_like(Z)
        out[:, self.i - 1] = self.c * Z[:, self.j - 1] ** 2
        return out

    def jacobian_batch(self, Z, dom):
        J = np.zeros((Z.shape[0], dom.n, dom.n), dtype=complex)
        J[:, self.i - 1, self.j - 1] = 2.0 * self.c * Z[:, self.j - 1]
        return J

    def describe(self):
        return f"{self.c:g}*z_{self.j}^2*e_{self.i}"

    def to_json(self):
        return {"node": "monomial_shear", "c": _cplx(self.c), "i": self.i, "j": self.j}


@dataclass(frozen=True)
class Wrapped:
    """Adapter putting an arbitrary HolMap under a composite node."""

    map: HolMap

    def values(self, Z, dom):
        return self.map.values(Z)

    def jacobian_batch(self, Z, dom):
        return self.map.jacobian_batch(Z)

    def describe(self):
        return self.map.describe()

    def to_json(self):
        return {"node": "wrapped", "map": map_to_json(self.map)}


@dataclass(frozen=True)
class LinearCombo:
    """Weighted sum of child nodes; covers sums, scalar multiples and convex
    combinations."""

    weights: Tuple[complex, ...]
    children: Tuple

    def values(self, Z, dom):
        out = np.zeros_like(np.asarray(Z, dtype=complex))
        for w, child in zip(self.weights, self.children):
            out += w * child.values(Z, dom)
        return out

    def jacobian_batch(self, Z, dom):
        out = np.zeros((Z.shape[0], dom.n, dom.n), dtype=complex)
        for w, child in zip(self.weights, self.children):
            out += w * child.jacobian_batch(Z, dom)
        return out

    def describe(self):
        inner = ", ".join(c.describe() for c in self.children)
        return f"combo[{inner}]"

    def to_json(self):
        return {"node": "combo", "weights": [_cplx(w) for w in self.weights],
                "children": [child.to_json() for child in self.children]}


def identity_map(dom: bg.BallGeometry) -> CompositeMap:
    return CompositeMap(Identity(), dom, normalized=True, label="identity")


def disc_multiple_map(g: df.DiscFunction, functional: bg.LinearFunctional,
                      dom: bg.BallGeometry) -> CompositeMap:
    node = DiscMultiple(g, functional)
    return CompositeMap(node, dom, normalized=True, label=node.describe())


def convex_combination(maps: Sequence[HolMap], weights: Sequence[float]) -> CompositeMap:
    """Convex combination of normalized maps (itself normalized)."""
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise DomainError("weights must be nonnegative and sum to 1")
    dom = maps[0].domain
    node = LinearCombo(tuple(complex(w) for w in weights), tuple(Wrapped(m) for m in maps))
    return CompositeMap(node, dom, normalized=all(m.normalized for m in maps))


# ---------------------------------------------------------------------------
# evaluation and normalization checks


def evaluate(f: HolMap, z):
    """Value of f at a point (or batch) of the open unit ball."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    Z = z[None, :] if single else z
    if np.any(np.asarray(bg.norm(f.domain, Z)) >= 1.0):
        raise DomainError("point outside the open unit ball")
    out = f.values(Z)
    return out[0] if single else out


def jacobian(f: HolMap, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return f.jacobian_batch(z[None, :])[0]


def assert_normalized(f: HolMap, tol_value: float = 1e-12, tol_jac: float = 1e-8):
    """Check f(0) = 0 and Df(0) = I within the stated tolerances."""
    zero = np.zeros((1, f.domain.n), dtype=complex)
    v0 = np.linalg.norm(f.values(zero)[0])
    if v0 >= tol_value:
        raise DomainError(f"map is not normalized: |f(0)| = {v0:.3e}")
    j0 = f.jacobian_batch(zero)[0]
    dev = np.abs(j0 - np.eye(f.domain.n)).max()
    if dev >= tol_jac:
        raise DomainError(f"map is not normalized: |Df(0) - I| = {dev:.3e}")


# ---------------------------------------------------------------------------
# second-order coefficients at the origin


def _check_pair(dom: bg.BallGeometry, i: int, j: int, need_distinct: bool = True):
    if not (1 <= i <= dom.n and 1 <= j <= dom.n):
        raise DomainError(f"indices ({i}, {j}) out of range for n = {dom.n}")
    if need_distinct and i == j:
        raise DomainError("indices must be distinct")
    if dom.rank >= 2:
        frame = dom.frame_coords
        if i not in frame or j not in frame:
            raise DomainError(f"indices ({i}, {j}) must lie in the frame {frame}")


def _reconcile(c_main: complex, c_check: complex, what: str) -> complex:
    gap = abs(c_main - c_check)
    if gap > 1e-4:
        raise NumericalInstabilityError(
            f"{what}: coefficient estimates disagree by {gap:.3e} between radii"
        )
    if gap > 1e-8:
        warnings.warn(
            ReducedPrecisionWarning(f"{what}: coefficient estimates agree only to {gap:.3e}")
        )
    return c_main


def second_coeff_bundle(f: HolMap, requests, rho: float = 0.4, rho_check: float = 0.2) -> dict:
    """Extract several second-order coefficients from one batched evaluation.

    ``requests`` is an iterable of (i, j, kind).  All axis circles and
    2-torus grids go into a single ``values`` call, which matters for
    black-box maps whose evaluation integrates an ODE.
    """
    requests = list(requests)
    n = f.domain.n
    for i, j, kind in requests:
        if kind not in (PURE, MIXED):
            raise DomainError(f"unknown coefficient kind {kind!r}")
        if not (1 <= i <= n and 1 <= j <= n):
            raise DomainError(f"indices ({i}, {j}) out of range for n = {n}")
        if kind == MIXED and i == j:
            raise DomainError("mixed coefficient needs i != j")

    radii = (rho, rho_check)
    m_axis, m_torus = 64, 32
    theta_axis = 2.0 * np.pi * np.arange(m_axis) / m_axis
    theta_t = 2.0 * np.pi * np.arange(m_torus) / m_torus
    A, B = np.meshgrid(theta_t, theta_t, indexing="ij")
    a, b = A.ravel(), B.ravel()

    axes = sorted({j for i, j, kind in requests if kind == PURE})
    pairs = sorted({tuple(sorted((i, j))) for i, j, kind in requests if kind == MIXED})

    blocks, layout = [], {}
    offset = 0
    for axis in axes:
        for r in radii:
            Z = np.zeros((m_axis, n), dtype=complex)
            Z[:, axis - 1] = r * np.exp(1j * theta_axis)
            layout[("axis", axis, r)] = offset
            blocks.append(Z)
            offset += m_axis
    for p, q in pairs:
        for r in radii:
            Z = np.zeros((m_torus * m_torus, n), dtype=complex)
            Z[:, p - 1] = r * np.exp(1j * a)
            Z[:, q - 1] = r * np.exp(1j * b)
            layout[("torus", (p, q), r)] = offset
            blocks.append(Z)
            offset += m_torus * m_torus
    vals = f.values(np.vstack(blocks))

    phase_axis = np.exp(-2j * theta_axis)
    phase_torus = np.exp(-1j * (a + b))
    out = {}
    for i, j, kind in requests:
        got = []
        for r in radii:
            if kind == PURE:
                k0 = layout[("axis", j, r)]
                block = vals[k0:k0 + m_axis, i - 1]
                got.append(complex((block * phase_axis).mean() / r**2))
            else:
                k0 = layout[("torus", tuple(sorted((i, j))), r)]
                block = vals[k0:k0 + m_torus * m_torus, i - 1]
                got.append(complex((block * phase_torus).mean() / r**2))
        out[(i, j, kind)] = _reconcile(got[0], got[1], f"{kind}({i},{j})")
    return out


def second_coeff(f: HolMap, i: int, j: int, kind: str,
                 rho: float = 0.4, rho_check: float = 0.2) -> complex:
    """Second-order Taylor data of f at 0.

    ``pure`` returns the coefficient of z_j^2 in component i, i.e.
    (1/2) d^2 f_i / d z_j^2 (0), from a 64-point Cauchy DFT on the circle of
    radius ``rho``.  ``mixed`` (i != j) returns the coefficient of z_i z_j in
    component i, i.e. d^2 f_i / (d z_i d z_j) (0), from a 32x32 double DFT on
    the 2-torus.  Both are recomputed at ``rho_check``; disagreement beyond
    1e-8 triggers a ReducedPrecisionWarning, beyond 1e-4 a
    NumericalInstabilityError.
    """
    return second_coeff_bundle(f, [(i, j, kind)], rho=rho, rho_check=rho_check)[(i, j, kind)]


def shear(h: HolMap, i: int, j: int) -> PolynomialMap:
    """Linear part of h plus its single pure z_j^2 term in component i."""
    _check_pair(h.domain, i, j)
    n = h.domain.n
    zero = np.zeros((1, n), dtype=complex)
    if np.linalg.norm(h.values(zero)[0]) > 1e-10:
        raise DomainError("shearing needs h(0) = 0")
    c = second_coeff(h, i, j, PURE)
    terms: Dict[Tuple[int, Tuple[int, ...]], complex] = {}
    if h.normalized:
        D = np.eye(n, dtype=complex)
    else:
        D = h.jacobian_batch(zero)[0]
    for a in range(n):
        for b in range(n):
            if D[a, b] != 0:
                exps = tuple(1 if k == b else 0 for k in range(n))
                terms[(a + 1, exps)] = terms.get((a + 1, exps), 0.0) + D[a, b]
    exps = tuple(2 if k == j - 1 else 0 for k in range(n))
    terms[(i, exps)] = terms.get((i, exps), 0.0) + c
    label = f"shear_{i}{j}[{h.describe()}]"
    return PolynomialMap(terms, h.domain, normalized=h.normalized, label=label)


def canonical_field(g: df.DiscFunction, dom: bg.BallGeometry, i: int, j: int,
                    sign: int) -> PolynomialMap:
    """The sharp quadratic field z + sign * factor * d1(g) * z_j^2 e_i.

    ``factor`` is 1 on the rank >= 2 frame geometries and 3*sqrt(3)/2 on the
    Euclidean ball.
    """
    if sign not in (-1, 1):
        raise DomainError("sign must be +1 or -1")
    _check_pair(dom, i, j)
    c = sign * dom.shear_factor * df.d1(g)
    terms: Dict[Tuple[int, Tuple[int, ...]], complex] = {}
    for a in range(dom.n):
        exps = tuple(1 if k == a else 0 for k in range(dom.n))
        terms[(a + 1, exps)] = 1.0
    exps = tuple(2 if k == j - 1 else 0 for k in range(dom.n))
    terms[(i, exps)] = terms.get((i, exps), 0.0) + c
    sgn = "+" if sign > 0 else "-"
    label = f"h_{i}{j}[{df.describe(g)}]{sgn}"
    return PolynomialMap(terms, dom, normalized=True, label=label)


# ---------------------------------------------------------------------------
# membership certification


@dataclass
class MgCertificate:
    """Outcome of a sampling certification run.

    ``worst_margin`` is the smallest signed distance of any supporting value
    to the boundary of g(U); negative means a violation was observed.
    """

    passed: bool
    samples_used: int
    worst_margin: float
    eps: float
    witness: Optional[dict] = None
    n_indeterminate: int = 0

    def to_json(self) -> dict:
        out = {
            "pass": self.passed,
            "samples_used": self.samples_used,
            "worst_margin": self.worst_margin,
            "eps": self.eps,
            "n_indeterminate": self.n_indeterminate,
        }
        if self.witness is not None:
            out["witness"] = {
                "z": [{"re": float(v.real), "im": float(v.imag)} for v in self.witness["z"]],
                "value": {"re": float(self.witness["value"].real),
                          "im": float(self.witness["value"].imag)},
                "margin": float(self.witness["margin"]),
            }
        return out


def structured_torus_points(dom: bg.BallGeometry, radii=TORUS_RADII,
                            phases: int = TORUS_PHASES) -> np.ndarray:
    """Deterministic sample tori where the quadratic fields are extremal.

    Rank >= 2 domains get the frame 2-tori |z_i| = |z_j| = rho.  The
    Euclidean ball gets, per ordered pair (i, j), the weighted torus
    |z_i| = rho/sqrt(3), |z_j| = rho*sqrt(2/3): the maximizer of |z_i||z_j|^2
    on its unit sphere.
    """
    theta = 2.0 * np.pi * np.arange(phases) / phases
    A, B = np.meshgrid(theta, theta, indexing="ij")
    ea, eb = np.exp(1j * A.ravel()), np.exp(1j * B.ravel())
    blocks = []
    if dom.kind == bg.EUCLIDEAN:
        w1, w2 = 1.0 / np.sqrt(3.0), np.sqrt(2.0 / 3.0)
        pairs = [(i, j) for i in range(dom.n) for j in range(dom.n) if i != j]
        for rho in radii:
            for i, j in pairs:
                Z = np.zeros((ea.size, dom.n), dtype=complex)
                Z[:, i] = rho * w1 * ea
                Z[:, j] = rho * w2 * eb
                blocks.append(Z)
    else:
        frame = [k - 1 for k in dom.frame_coords]
        for rho in radii:
            for i, j in itertools.combinations(frame, 2):
                Z = np.zeros((ea.size, dom.n), dtype=complex)
                Z[:, i] = rho * ea
                Z[:, j] = rho * eb
                blocks.append(Z)
    if not blocks:
        return np.empty((0, dom.n), dtype=complex)
    return np.vstack(blocks)


def _sphere_batch(dom: bg.BallGeometry, rng: np.random.Generator, count: int) -> np.ndarray:
    out = np.empty((count, dom.n), dtype=complex)
    for k in range(count):
        z = bg.sample_sphere(dom, rng)
        if dom.kind == bg.SPECTRAL2:
            # avoid near-degenerate top singular values (measure-zero set);
            # the gap must survive scaling by the smallest ladder radius
            while True:
                m = bg.to_matrices(z)
                s = np.linalg.svd(m, compute_uv=False)
                if s[0] - s[1] >= 1e-8:
                    break
                z = bg.sample_sphere(dom, rng)
        out[k] = z
    return out


def certification_points(dom: bg.BallGeometry, N: int, rng: np.random.Generator,
                         structured: bool = True) -> np.ndarray:
    """Sample points for a certification run: N sphere samples scaled onto the
    radius ladder, polydisc edge samples, and (optionally) structured tori."""
    blocks = []
    if N > 0:
        sphere = _sphere_batch(dom, rng, N)
        radii = np.array([RADIUS_LADDER[k % len(RADIUS_LADDER)] for k in range(N)])
        blocks.append(sphere * radii[:, None])
    if dom.kind == bg.POLYDISC and N > 0:
        n_edge = max(N // 10, 8)
        edges = np.stack([bg.sample_polydisc_edge(dom, rng) for _ in range(n_edge)])
        radii = np.array([RADIUS_LADDER[k % len(RADIUS_LADDER)] for k in range(n_edge)])
        blocks.append(edges * radii[:, None])
    if structured:
        torus = structured_torus_points(dom)
        if torus.size:
            blocks.append(torus)
    if not blocks:
        raise DomainError("no certification points requested (N = 0, no structure)")
    return np.vstack(blocks)


def certify_values(value_fn, g: df.DiscFunction, dom: bg.BallGeometry,
                   Z: np.ndarray, eps: float = 1e-9) -> MgCertificate:
    """Core certifier: check l_z(h(z))/||z|| in g(U) over the point set Z,
    where h(z) = value_fn(Z) row-wise."""
    H = np.asarray(value_fn(Z), dtype=complex)
    vals, owner = bg.support_values(dom, Z, H)
    codes = df.classify(g, vals, eps)
    margins = np.asarray(df.boundary_margin(g, vals), dtype=float)
    worst = int(np.argmin(margins))
    passed = not np.any(codes == -1)
    witness = None
    if not passed:
        bad = int(np.argmin(np.where(codes == -1, margins, np.inf)))
        witness = {"z": Z[owner[bad]], "value": complex(vals[bad]), "margin": float(margins[bad])}
    return MgCertificate(
        passed=passed,
        samples_used=Z.shape[0],
        worst_margin=float(margins[worst]),
        eps=eps,
        witness=witness,
        n_indeterminate=int(np.count_nonzero(codes == 0)),
    )


def certify_Mg(h: HolMap, g: df.DiscFunction, dom: bg.BallGeometry, N: int,
               eps: float = 1e-9, rng: Optional[np.random.Generator] = None,
               structured: bool = True) -> MgCertificate:
    """Sampling certificate that the normalized map h generates values inside
    g(U) for every extreme supporting functional.

    Indeterminate verdicts (values within eps of the boundary in the
    inverse-map metric) are recorded but do not fail the certificate.
    """
    if not h.normalized:
        raise DomainError("certification needs a normalized map")
    rng = np.random.default_rng(0) if rng is None else rng
    Z = certification_points(dom, N, rng, structured=structured)
    return certify_values(h.values, g, dom, Z, eps=eps)


def random_Mg_member(g: df.DiscFunction, dom: bg.BallGeometry,
                     rng: np.random.Generator, k: int) -> CompositeMap:
    """Random convex combination of k certified building blocks.

    Blocks are drawn uniformly from {identity, g(l_u(z))*z for a random unit
    u, canonical quadratic field with random admissible indices and sign}.
    Convexity of g(U) puts the combination back in the family.
    """
    if k < 1:
        raise DomainError("need at least one block")
    if dom.rank >= 2:
        pairs = list(itertools.permutations(dom.frame_coords, 2))
    else:
        pairs = list(itertools.permutations(range(1, dom.n + 1), 2))
    blocks = []
    for _ in range(k):
        kind = int(rng.integers(3))
        if kind == 0 or not pairs:
            blocks.append(Identity())
        elif kind == 1:
            while True:
                u = bg.sample_sphere(dom, rng)
                try:
                    functional = bg.support_functionals(dom, u)[0]
                    break
                except DegenerateFunctionalError:
                    continue
            blocks.append(DiscMultiple(g, functional))
        else:
            i, j = pairs[int(rng.integers(len(pairs)))]
            sign = 1 if rng.random() < 0.5 else -1
            blocks.append(Wrapped(canonical_field(g, dom, i, j, sign)))
    weights = tuple(complex(w) for w in rng.dirichlet(np.ones(k)))
    node = LinearCombo(weights, tuple(blocks))
    return CompositeMap(node, dom, normalized=True, label=node.describe())


# ---------------------------------------------------------------------------
# serialization


#: decoders for composite-node payloads; other modules may register more
NODE_DECODERS = {}


def _decode_node(payload: dict, dom: bg.BallGeometry):
    kind = payload["node"]
    if kind == "identity":
        return Identity()
    if kind == "disc_multiple":
        functional = bg.LinearFunctional(tuple(_uncplx(c) for c in payload["coeffs"]))
        return DiscMultiple(df.from_json(payload["g"]), functional)
    if kind == "monomial_shear":
        return MonomialShear(_uncplx(payload["c"]), int(payload["i"]), int(payload["j"]))
    if kind == "wrapped":
        return Wrapped(map_from_json(payload["map"], dom))
    if kind == "combo":
        children = tuple(_decode_node(c, dom) for c in payload["children"])
        return LinearCombo(tuple(_uncplx(w) for w in payload["weights"]), children)
    if kind in NODE_DECODERS:
        return NODE_DECODERS[kind](payload, dom)
    raise UnsupportedError(f"unknown composite node {kind!r}")


def map_to_json(f: HolMap) -> dict:
    """Wire format for polynomial and composite maps (black boxes do not
    serialize)."""
    if isinstance(f, PolynomialMap):
        return {"representation": "polynomial", "terms": poly_to_json(f),
                "normalized": f.normalized, "label": f.label}
    if isinstance(f, CompositeMap):
        return {"representation": "composite", "node": f.node.to_json(),
                "normalized": f.normalized, "label": f.label}
    raise UnsupportedError(f"{f.describe()} has no serializable representation")


def map_from_json(payload: dict, dom: bg.BallGeometry) -> HolMap:
    rep = payload["representation"]
    if rep == "polynomial":
        f = poly_from_json(payload["terms"], dom)
        f.label = payload.get("label", "")
        return f
    if rep == "composite":
        return CompositeMap(_decode_node(payload["node"], dom), dom,
                            normalized=bool(payload.get("normalized", False)),
                            label=payload.get("label", ""))
    raise UnsupportedError(f"unknown map representation {rep!r}")


def poly_to_json(f: PolynomialMap) -> list:
    out = []
    for (comp, exps), c in sorted(f.terms.items()):
        out.append({
            "component": comp,
            "exponents": list(exps),
            "re": float(c.real),
            "im": float(c.imag),
        })
    return out


def poly_from_json(payload: list, dom: bg.BallGeometry) -> PolynomialMap:
    terms = {}
    for entry in payload:
        key = (int(entry["component"]), tuple(int(e) for e in entry["exponents"]))
        terms[key] = complex(entry["re"], entry["im"])
    f = PolynomialMap(terms, dom)
    try:
        assert_normalized(f)
        f.normalized = True
    except DomainError:
        pass
    return f
