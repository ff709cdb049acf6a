"""The three unit-ball realizations and their supporting linear functionals.

Supported geometries: the Euclidean ball of C^n (rank 1), the polydisc U^n
under the sup norm (rank n), and the 2x2 spectral ball (matrices of operator
norm < 1, rank 2).  Coordinates of the spectral ball follow the basis order
(E11, E22, E12, E21), so the two frame coordinates are the diagonal entries.

For a nonzero z, ``support_functionals`` returns finitely many norm-one
functionals l with l(z) = ||z||.  Because l -> l(h(z)) is affine and the
image regions used by the certification code are convex, testing these
extreme functionals suffices for membership checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DegenerateFunctionalError, DomainError

EUCLIDEAN = "euclidean"
POLYDISC = "polydisc"
SPECTRAL2 = "spectral2"

KINDS = (EUCLIDEAN, POLYDISC, SPECTRAL2)

#: Sharp constant multiplying d1(g) in the second-coefficient bounds: 1 on the
#: rank >= 2 frame geometries, 3*sqrt(3)/2 on the Euclidean ball.
EUCLIDEAN_SHEAR_FACTOR = 3.0 * np.sqrt(3.0) / 2.0

_TIE_TOL = 1e-12
_DEGENERATE_TOL = 1e-10


@dataclass(frozen=True)
class BallGeometry:
    """One of the three unit-ball realizations."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown ball geometry {self.kind!r}")
        if self.kind == EUCLIDEAN and self.n < 1:
            raise DomainError("euclidean ball needs n >= 1")
        if self.kind == POLYDISC and self.n < 2:
            raise DomainError("polydisc needs n >= 2")
        if self.kind == SPECTRAL2 and self.n != 4:
            raise DomainError("spectral2 is the 2x2 matrix ball, n = 4")

    @property
    def rank(self) -> int:
        if self.kind == EUCLIDEAN:
            return 1
        if self.kind == POLYDISC:
            return self.n
        return 2

    @property
    def frame_coords(self) -> tuple:
        """1-based coordinate indices carrying the frame (empty for rank 1)."""
        if self.kind == EUCLIDEAN:
            return ()
        if self.kind == POLYDISC:
            return tuple(range(1, self.n + 1))
        return (1, 2)

    @property
    def shear_factor(self) -> float:
        return EUCLIDEAN_SHEAR_FACTOR if self.kind == EUCLIDEAN else 1.0


def euclidean(n: int) -> BallGeometry:
    return BallGeometry(EUCLIDEAN, n)


def polydisc(n: int) -> BallGeometry:
    return BallGeometry(POLYDISC, n)


def spectral2() -> BallGeometry:
    return BallGeometry(SPECTRAL2, 4)


@dataclass(frozen=True)
class LinearFunctional:
    """l(w) = sum_k coeffs_k * w_k, with operator norm 1 by construction."""

    coeffs: tuple

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        return w @ np.asarray(self.coeffs, dtype=complex)


def _check_dim(dom: BallGeometry, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != dom.n:
        raise DomainError(f"expected vectors of length {dom.n}, got shape {z.shape}")
    return z


def to_matrices(z) -> np.ndarray:
    """Spectral-ball coordinates -> stacked 2x2 matrices [[z1, z3], [z4, z2]]."""
    z = np.asarray(z, dtype=complex)
    m = np.empty(z.shape[:-1] + (2, 2), dtype=complex)
    m[..., 0, 0] = z[..., 0]
    m[..., 1, 1] = z[..., 1]
    m[..., 0, 1] = z[..., 2]
    m[..., 1, 0] = z[..., 3]
    return m


def from_matrices(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    return np.stack([m[..., 0, 0], m[..., 1, 1], m[..., 0, 1], m[..., 1, 0]], axis=-1)


def _spectral_norms(z) -> np.ndarray:
    """Largest singular value of the 2x2 matrix of z, in closed form."""
    z = np.asarray(z, dtype=complex)
    e = np.sum(np.abs(z) ** 2, axis=-1)
    det = z[..., 0] * z[..., 1] - z[..., 2] * z[..., 3]
    disc = np.sqrt(np.maximum(e * e - 4.0 * np.abs(det) ** 2, 0.0))
    return np.sqrt(0.5 * (e + disc))


def norm(dom: BallGeometry, z):
    """Domain norm of z; accepts a single vector or a batch (..., n)."""
    z = _check_dim(dom, z)
    if dom.kind == EUCLIDEAN:
        out = np.linalg.norm(z, axis=-1)
    elif dom.kind == POLYDISC:
        out = np.max(np.abs(z), axis=-1)
    else:
        out = _spectral_norms(z)
    return out if out.shape else float(out)


def support_functionals(dom: BallGeometry, z) -> List[LinearFunctional]:
    """Extreme supporting functionals at z != 0.

    Euclidean: the inner product with z/||z||.  Polydisc: one coordinate
    functional per norm-attaining coordinate.  Spectral ball: coordinate
    functionals for frame-diagonal points, otherwise the functional built
    from the top singular pair; a degenerate non-diagonal top singular value
    raises ``DegenerateFunctionalError`` so the caller can resample.
    """
    z = _check_dim(dom, z)
    if z.ndim != 1:
        raise DomainError("support_functionals takes a single point")
    nz = norm(dom, z)
    if nz == 0.0:
        raise DomainError("support functionals are undefined at z = 0")

    if dom.kind == EUCLIDEAN:
        return [LinearFunctional(tuple(np.conj(z) / nz))]

    if dom.kind == POLYDISC:
        out = []
        for k in range(dom.n):
            if abs(z[k]) >= nz - _TIE_TOL:
                coeffs = np.zeros(dom.n, dtype=complex)
                coeffs[k] = abs(z[k]) / z[k]
                out.append(LinearFunctional(tuple(coeffs)))
        return out

    diagonal = abs(z[2]) < 1e-14 and abs(z[3]) < 1e-14
    if diagonal:
        out = []
        for k in (0, 1):
            if abs(z[k]) >= nz - _DEGENERATE_TOL:
                coeffs = np.zeros(4, dtype=complex)
                coeffs[k] = abs(z[k]) / z[k]
                out.append(LinearFunctional(tuple(coeffs)))
        return out
    u, s, vh = np.linalg.svd(to_matrices(z))
    if s[0] - s[1] < _DEGENERATE_TOL:
        raise DegenerateFunctionalError("degenerate top singular value; resample")
    u1 = u[:, 0]
    v1 = np.conj(vh[0, :])
    # l(w) = u1^H W v1 in the (E11, E22, E12, E21) coordinates
    coeffs = (
        np.conj(u1[0]) * v1[0],
        np.conj(u1[1]) * v1[1],
        np.conj(u1[0]) * v1[1],
        np.conj(u1[1]) * v1[0],
    )
    return [LinearFunctional(coeffs)]


def support_values(dom: BallGeometry, Z, H):
    """Batched values l_z(h(z)) / ||z|| over all extreme functionals.

    ``Z`` and ``H`` are (m, n) arrays of points and of map values at those
    points.  Returns ``(values, owner)`` where ``owner[k]`` is the row of
    ``Z`` that produced ``values[k]``; points with several extreme
    functionals contribute several values.  Degenerate non-diagonal spectral
    points raise ``DegenerateFunctionalError``.
    """
    Z = _check_dim(dom, Z)
    H = np.asarray(H, dtype=complex)
    norms = np.asarray(norm(dom, Z))
    if np.any(norms == 0.0):
        raise DomainError("support values are undefined at z = 0")

    if dom.kind == EUCLIDEAN:
        vals = np.sum(H * np.conj(Z), axis=-1) / norms**2
        return vals, np.arange(Z.shape[0])

    if dom.kind == POLYDISC:
        values, owner = [], []
        absz = np.abs(Z)
        for k in range(dom.n):
            mask = absz[:, k] >= norms - _TIE_TOL
            if np.any(mask):
                values.append(np.conj(Z[mask, k]) * H[mask, k] / norms[mask] ** 2)
                owner.append(np.nonzero(mask)[0])
        return np.concatenate(values), np.concatenate(owner)

    values, owner = [], []
    diagonal = (np.abs(Z[:, 2]) < 1e-14) & (np.abs(Z[:, 3]) < 1e-14)
    if np.any(diagonal):
        absz = np.abs(Z)
        for k in (0, 1):
            mask = diagonal & (absz[:, k] >= norms - _DEGENERATE_TOL)
            if np.any(mask):
                values.append(np.conj(Z[mask, k]) * H[mask, k] / (absz[mask, k] * norms[mask]))
                owner.append(np.nonzero(mask)[0])
    generic = ~diagonal
    if np.any(generic):
        idx = np.nonzero(generic)[0]
        u, s, vh = np.linalg.svd(to_matrices(Z[idx]))
        if np.any(s[:, 0] - s[:, 1] < _DEGENERATE_TOL):
            raise DegenerateFunctionalError("degenerate top singular value in batch")
        u1 = u[:, :, 0]
        v1 = np.conj(vh[:, 0, :])
        hv = np.einsum("mij,mj->mi", to_matrices(H[idx]), v1)
        values.append(np.einsum("mi,mi->m", np.conj(u1), hv) / s[:, 0])
        owner.append(idx)
    return np.concatenate(values), np.concatenate(owner)


def sample_sphere(dom: BallGeometry, rng: np.random.Generator) -> np.ndarray:
    """One point of the unit sphere of the domain, deterministic under seed.

    Polydisc samples put exactly one coordinate on the unit circle and cap
    the others at modulus 0.999, so ties in the sup norm have probability 0.
    """
    if dom.kind == EUCLIDEAN:
        v = rng.standard_normal(dom.n) + 1j * rng.standard_normal(dom.n)
        return v / np.linalg.norm(v)
    if dom.kind == POLYDISC:
        k = int(rng.integers(dom.n))
        z = _disc_uniform(rng, dom.n, 0.999)
        z[k] = np.exp(2j * np.pi * rng.random())
        return z
    m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    z = from_matrices(m)
    return z / _spectral_norms(z)


def sample_polydisc_edge(dom: BallGeometry, rng: np.random.Generator) -> np.ndarray:
    """Polydisc sphere point with two coordinates of modulus 1 (tie stress)."""
    if dom.kind != POLYDISC:
        raise DomainError("edge sampler is specific to the polydisc")
    i, j = rng.choice(dom.n, size=2, replace=False)
    z = _disc_uniform(rng, dom.n, 0.999)
    z[i] = np.exp(2j * np.pi * rng.random())
    z[j] = np.exp(2j * np.pi * rng.random())
    return z


def _disc_uniform(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def to_json(dom: BallGeometry) -> dict:
    return {"kind": dom.kind, "n": dom.n}


def from_json(payload: dict) -> BallGeometry:
    return BallGeometry(payload["kind"], int(payload["n"]))
