"""Gaussian-beam spherical harmonics C_k (b . x)^k with b isotropic."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import lgamma, log, pi
from typing import Sequence

import numpy as np

from . import _kernels
from .geom import OrientedGeodesic, check_dimension, random_geodesic
from .groups import FiniteGroup, coset_representatives
from .quadrature import QuadratureRule, quadrature_rule

DEGREE_CAP = 256          # operations that need a sphere quadrature
ANALYTIC_DEGREE_CAP = 4096
MERGE_TOL = 1e-10
ZERO_TOL = 1e-12
GAUGE_FLOOR = 1e-3
OVERLAP_TOL = 1e-10


def eigenvalue(k: int, d: int) -> int:
    return k * (k + d - 1)


def normalization_constant(k: int, d: int) -> float:
    """C_k with ||C_k (x_1 + i x_2)^k||_{L^2(S^d)} = 1.

    int_{S^d} (x_1^2 + x_2^2)^k = 2 pi^n k! / Gamma(n + k), n = (d + 1) / 2.
    """
    n = 0.5 * (check_dimension(d) + 1)
    return float(np.exp(0.5 * (lgamma(n + k) - lgamma(k + 1) - log(2.0) - n * log(pi))))


@dataclass(frozen=True, eq=False)
class Beam:
    b: np.ndarray
    k: int
    c: complex = 1.0

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.complex128)
        if abs(b @ b) > 1e-12 or abs(np.vdot(b, b) - 2) > 1e-12:
            raise ValueError("beam vector must satisfy b.b = 0 and |b|^2 = 2")
        object.__setattr__(self, "b", b)


@dataclass(frozen=True, eq=False)
class HarmonicSum:
    """sum_t coefs[t] * C_k * (bvecs[t] . x)^k on S^d."""

    d: int
    k: int
    bvecs: np.ndarray
    coefs: np.ndarray

    def __post_init__(self):
        check_dimension(self.d)
        b = np.asarray(self.bvecs, dtype=np.complex128).reshape(-1, self.d + 1)
        c = np.asarray(self.coefs, dtype=np.complex128).reshape(-1)
        if len(b) != len(c):
            raise ValueError("one coefficient per beam vector")
        if self.k < 0 or self.k > ANALYTIC_DEGREE_CAP:
            raise ValueError(f"degree {self.k} outside 0..{ANALYTIC_DEGREE_CAP}")
        object.__setattr__(self, "bvecs", b)
        object.__setattr__(self, "coefs", c)

    @classmethod
    def zero(cls, d: int, k: int) -> "HarmonicSum":
        return cls(d, k, np.zeros((0, d + 1)), np.zeros(0))

    @classmethod
    def from_beams(cls, beams: Sequence[Beam], d: int) -> "HarmonicSum":
        ks = {bm.k for bm in beams}
        if len(ks) > 1:
            raise ValueError("all beams in a sum must share one degree")
        k = ks.pop() if ks else 0
        return cls(d, k, np.array([bm.b for bm in beams]), np.array([bm.c for bm in beams]))

    @property
    def terms(self) -> list[Beam]:
        return [Beam(b, self.k, c) for b, c in zip(self.bvecs, self.coefs)]

    @property
    def eigenvalue(self) -> int:
        return eigenvalue(self.k, self.d)

    def __len__(self):
        return len(self.coefs)

    def _check(self, other):
        if self.d != other.d:
            raise ValueError("harmonic sums live on different spheres")
        if self.k != other.k:
            raise ValueError(f"degree mismatch: {self.k} vs {other.k}")

    def __add__(self, other: "HarmonicSum") -> "HarmonicSum":
        self._check(other)
        return HarmonicSum(self.d, self.k, np.vstack([self.bvecs, other.bvecs]),
                           np.concatenate([self.coefs, other.coefs]))

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "HarmonicSum":
        return HarmonicSum(self.d, self.k, self.bvecs, complex(scalar) * self.coefs)

    def __mul__(self, scalar):
        return self.__rmul__(scalar)

    def __truediv__(self, scalar):
        return self.__rmul__(1.0 / scalar)

    def norm(self) -> float:
        return float(np.sqrt(max(inner_product(self, self).real, 0.0)))

    def normalized(self) -> "HarmonicSum":
        nrm = self.norm()
        if nrm <= ZERO_TOL:
            raise ValueError("cannot normalize the zero harmonic")
        return self / nrm

    def canonical(self) -> "HarmonicSum":
        return canonicalize(self)


def beam(gamma: OrientedGeodesic, k: int) -> HarmonicSum:
    """Normalized beam C_k ((u + i v) . x)^k concentrating on ``gamma``."""
    return HarmonicSum(gamma.dim - 1, int(k), gamma.b[None, :], np.ones(1))


def evaluate(psi: HarmonicSum, x):
    """Value of ``psi`` at one point or at each row of an array of points."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    vals = normalization_constant(psi.k, psi.d) * _kernels.beam_sum_values(
        pts, psi.bvecs, psi.coefs, psi.k)
    return complex(vals[0]) if single else vals


def compose_isometry(psi: HarmonicSum, phi) -> HarmonicSum:
    """psi o phi, via b -> phi^T b."""
    phi = np.asarray(phi, dtype=np.float64)
    return HarmonicSum(psi.d, psi.k, psi.bvecs @ phi, psi.coefs)


def canonicalize(psi: HarmonicSum, tol: float = MERGE_TOL) -> HarmonicSum:
    """Fix the phase gauge of each beam vector and merge coincident terms.

    The gauge makes the first component with modulus above ``GAUGE_FLOOR``
    real positive; the phase moves into the coefficient as exp(i k alpha).
    """
    bs, cs = [], []
    for b, c in zip(psi.bvecs, psi.coefs):
        lead = b[np.argmax(np.abs(b) > GAUGE_FLOOR)]
        phase = lead / abs(lead)
        b = b * np.conj(phase)
        c = c * phase ** psi.k
        for i, other in enumerate(bs):
            if np.max(np.abs(other - b)) <= tol:
                cs[i] += c
                break
        else:
            bs.append(b)
            cs.append(c)
    keep = [i for i, c in enumerate(cs) if abs(c) > ZERO_TOL]
    if not keep:
        return HarmonicSum.zero(psi.d, psi.k)
    order = sorted(keep, key=lambda i: tuple(np.round(np.concatenate([bs[i].real, bs[i].imag]), 9)))
    return HarmonicSum(psi.d, psi.k, np.array([bs[i] for i in order]), np.array([cs[i] for i in order]))


def sums_equal(psi1: HarmonicSum, psi2: HarmonicSum, tol: float = 1e-9) -> bool:
    """Termwise equality after canonicalization."""
    if psi1.d != psi2.d or psi1.k != psi2.k:
        return False
    a, b = canonicalize(psi1), canonicalize(psi2)
    used = set()
    for bv, c in zip(a.bvecs, a.coefs):
        for j, (bw, cw) in enumerate(zip(b.bvecs, b.coefs)):
            if j not in used and np.max(np.abs(bv - bw)) <= tol and abs(c - cw) <= tol:
                used.add(j)
                break
        else:
            return False
    return len(used) == len(b)


def overlap_matrix(b1, b2, k: int) -> np.ndarray:
    """<beam_b, beam_b'> = ((b . conj(b')) / 2)^k for unit-normalized beams."""
    return _kernels.cpow_np(0.5 * (np.asarray(b1) @ np.asarray(b2).conj().T), k)


def _quadrature_inner(psi1: HarmonicSum, psi2: HarmonicSum, rule: QuadratureRule) -> complex:
    v1 = evaluate(psi1, rule.nodes)
    v2 = evaluate(psi2, rule.nodes)
    return complex(rule.integrate(v1 * v2.conj()))


@lru_cache(maxsize=None)
def certify_overlap_formula(d: int, kmax: int = 8, n_pairs: int = 20, seed: int = 0) -> float:
    """Largest deviation between the closed-form beam overlap and exact quadrature.

    Runs ``n_pairs`` seeded geodesic pairs at every degree up to ``kmax``.
    """
    kmax = min(kmax, 8 if d <= 5 else 4)
    rng = np.random.default_rng(seed)
    rule = quadrature_rule(d, 2 * kmax)
    worst = 0.0
    for _ in range(n_pairs):
        g1, g2 = random_geodesic(d, rng), random_geodesic(d, rng)
        for k in range(kmax + 1):
            ck = normalization_constant(k, d)
            f1 = rule.nodes @ g1.b
            f2 = rule.nodes @ g2.b
            quad = ck * ck * rule.integrate(f1 ** k * np.conj(f2 ** k))
            exact = overlap_matrix(g1.b[None], g2.b[None], k)[0, 0]
            worst = max(worst, abs(quad - exact))
    return worst


def overlap_certified(d: int) -> bool:
    return certify_overlap_formula(d) <= OVERLAP_TOL


def inner_product(psi1: HarmonicSum, psi2: HarmonicSum, rule: QuadratureRule = None) -> complex:
    """L^2(S^d) product int psi1 conj(psi2).

    Closed-form overlaps are used once certified against quadrature for
    this dimension; otherwise (or when ``rule`` is given) quadrature is used.
    """
    psi1._check(psi2)
    if rule is None and overlap_certified(psi1.d):
        G = overlap_matrix(psi1.bvecs, psi2.bvecs, psi1.k)
        return complex(psi1.coefs @ G @ psi2.coefs.conj())
    if rule is None:
        if psi1.k > DEGREE_CAP:
            raise ValueError(f"degree {psi1.k} above quadrature cap {DEGREE_CAP}")
        rule = quadrature_rule(psi1.d, 2 * psi1.k)
    return _quadrature_inner(psi1, psi2, rule)


def group_average(psi: HarmonicSum, G: FiniteGroup) -> HarmonicSum:
    """(1/|G|) sum_g psi o g; may be the zero sum."""
    bs = np.concatenate([psi.bvecs @ g for g in G.elements])
    cs = np.tile(psi.coefs, G.order) / G.order
    return canonicalize(HarmonicSum(psi.d, psi.k, bs, cs))


def is_invariant(psi: HarmonicSum, G: FiniteGroup, tol: float = 1e-9) -> bool:
    return all(sums_equal(compose_isometry(psi, g), psi, tol) for g in G.elements)


def coset_average(psi: HarmonicSum, G: FiniteGroup, G_mu: FiniteGroup) -> HarmonicSum:
    """Average over G using one composition per coset of the stabilizer ``G_mu``."""
    for i, h in enumerate(G_mu.elements):
        if not sums_equal(compose_isometry(psi, h), psi):
            raise ValueError(f"harmonic is not invariant under subgroup element {i}")
    reps = coset_representatives(G, G_mu)
    bs = np.concatenate([psi.bvecs @ g for g in reps])
    cs = np.tile(psi.coefs, len(reps)) * (G_mu.order / G.order)
    return canonicalize(HarmonicSum(psi.d, psi.k, bs, cs))


def harmonicity_defect(psi: HarmonicSum) -> float:
    """max |b . b| over terms; zero certifies (b . x)^k is harmonic in R^{d+1}."""
    if len(psi) == 0:
        return 0.0
    return float(np.max(np.abs(np.einsum("ti,ti->t", psi.bvecs, psi.bvecs))))


def spherical_laplacian_fd(psi: HarmonicSum, samples, h: float = 1e-3):
    """Laplace-Beltrami of psi at unit points by 4th-order central differences.

    Uses Delta_{S^d} psi = Delta_{R^{d+1}} [psi(y / |y|)] on |y| = 1.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    m, dim = x.shape
    offsets = np.array([-2, -1, 1, 2]) * h
    stencil = np.array([-1.0, 16.0, 16.0, -1.0])
    pts = x[:, None, None, :] + offsets[None, None, :, None] * np.eye(dim)[None, :, None, :]
    pts = pts.reshape(-1, dim)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    vals = evaluate(psi, pts).reshape(m, dim, 4)
    center = evaluate(psi, x)
    lap = (vals @ stencil).sum(axis=1) - 30.0 * dim * center
    return lap / (12.0 * h * h), center


def eigen_residual(psi: HarmonicSum, samples, h: float = 1e-3) -> float:
    """max |Delta psi + k(k+d-1) psi| over the samples, Laplacian by finite differences."""
    lap, center = spherical_laplacian_fd(psi, samples, h)
    return float(np.max(np.abs(lap + psi.eigenvalue * center)))
