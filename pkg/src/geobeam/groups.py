"""Finite fixed-point-free subgroups of SO(d+1) and the lens-type groups G(p, l)."""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import qr

from .geom import (
    COMPARE_TOL,
    OrientedGeodesic,
    _canonical,
    apply_isometry,
    block_rotation,
    check_dimension,
    check_special_orthogonal,
    complex_structure,
    geodesics_equal,
    is_complex_line,
    realify,
)

MATCH_TOL = 1e-9


@dataclass(frozen=True)
class StandardGroupSpec:
    p: int
    l: tuple

    def __post_init__(self):
        object.__setattr__(self, "l", tuple(int(x) for x in self.l))
        if self.p < 1:
            raise ValueError("group order p must be positive")
        if any(not 1 <= x <= self.p for x in self.l):
            raise ValueError(f"l entries must lie in 1..{self.p}")

    def check_coprime(self):
        for x in self.l:
            g = gcd(x, self.p)
            if g != 1:
                raise ValueError(
                    f"generator has fixed points at power {self.p // g} (p/gcd, gcd({x}, {self.p}) = {g})"
                )

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.array(self.l) / self.p


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """Finite matrix group; ``elements[0]`` is the identity.

    ``spec`` is kept when the group is (conjugate to) a standard G(p, l);
    the exact invariant counting in :func:`invariant_dimension` relies on it.
    """

    elements: np.ndarray
    generator: Optional[int] = None
    spec: Optional[StandardGroupSpec] = None

    def __post_init__(self):
        els = np.asarray(self.elements, dtype=np.float64)
        if els.ndim != 3 or els.shape[1] != els.shape[2]:
            raise ValueError("elements must be an array of square matrices")
        if np.linalg.norm(els[0] - np.eye(els.shape[1])) > MATCH_TOL:
            raise ValueError("first element must be the identity")
        object.__setattr__(self, "elements", els)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self):
        return self.order

    def __iter__(self):
        return iter(self.elements)

    def index(self, matrix, tol: float = MATCH_TOL) -> Optional[int]:
        dist = np.linalg.norm(self.elements - matrix[None], axis=(1, 2))
        i = int(np.argmin(dist))
        return i if dist[i] <= tol else None

    def is_closed(self, tol: float = MATCH_TOL) -> bool:
        return all(self.index(a @ b, tol) is not None for a in self.elements for b in self.elements)

    def is_abelian(self, tol: float = MATCH_TOL) -> bool:
        return all(np.linalg.norm(a @ b - b @ a) <= tol for a in self.elements for b in self.elements)


def make_group(spec: StandardGroupSpec, d: int) -> FiniteGroup:
    """The cyclic group generated by ``block_rotation(2 pi l / p)``."""
    n = (check_dimension(d) + 1) // 2
    if len(spec.l) != n:
        raise ValueError(f"need {n} rotation numbers for d={d}, got {len(spec.l)}")
    spec.check_coprime()
    # powers from exact angles rather than repeated products
    els = np.stack([block_rotation(2 * np.pi * ((m * np.array(spec.l)) % spec.p) / spec.p)
                    for m in range(spec.p)])
    return FiniteGroup(els, generator=1 if spec.p > 1 else 0, spec=spec)


def cyclic_group(generator, max_order: int = 1024) -> FiniteGroup:
    g = check_special_orthogonal(generator, tol=1e-10)
    eye = np.eye(len(g))
    els = [eye]
    x = g
    while np.linalg.norm(x - eye) > MATCH_TOL:
        els.append(x)
        if len(els) > max_order:
            raise ValueError("generator has no finite order below the cap")
        x = x @ g
    return FiniteGroup(np.stack(els), generator=1 if len(els) > 1 else 0)


def group_from_elements(elements: Sequence[np.ndarray]) -> FiniteGroup:
    G = FiniteGroup(np.stack(elements))
    if not G.is_closed():
        raise ValueError("elements are not closed under multiplication")
    return FiniteGroup(G.elements, generator=is_cyclic(G))


def conjugate_group(G: FiniteGroup, phi) -> FiniteGroup:
    """Elementwise phi^{-1} g phi."""
    phi = check_special_orthogonal(phi)
    els = np.einsum("ji,njk,kl->nil", phi, G.elements, phi)
    els[0] = np.eye(G.dim)
    return FiniteGroup(els, generator=G.generator, spec=G.spec)


def _is_identity(g, tol=MATCH_TOL):
    return np.linalg.norm(g - np.eye(len(g))) <= tol


def is_fixed_point_free(G: FiniteGroup) -> bool:
    if G.spec is not None:
        return all(gcd(x, G.spec.p) == 1 for x in G.spec.l)
    for g in G.elements[1:]:
        # a repeated identity also fails here: that power acts trivially
        # singular values of g - I are |lambda - 1| over the spectrum of g
        if np.linalg.svd(g - np.eye(G.dim), compute_uv=False).min() <= COMPARE_TOL:
            return False
    return True


def is_cyclic(G: FiniteGroup) -> Optional[int]:
    """Smallest index of an element whose powers exhaust ``G``, else None."""
    p = G.order
    for i, g in enumerate(G.elements):
        x, m = g, 1
        while m < p and not _is_identity(x):
            x = x @ g
            m += 1
        if m == p and _is_identity(x):
            return i
    return None


def stabilizer(G: FiniteGroup, gamma: OrientedGeodesic) -> FiniteGroup:
    keep = [i for i, g in enumerate(G.elements)
            if geodesics_equal(apply_isometry(g, gamma), gamma)]
    H = FiniteGroup(G.elements[keep])
    return FiniteGroup(H.elements, generator=is_cyclic(H))


def coset_representatives(G: FiniteGroup, H: FiniteGroup) -> np.ndarray:
    """One representative per coset gH, identity first, in element order of ``G``."""
    if any(G.index(h) is None for h in H.elements):
        raise ValueError("H is not a subgroup of G")
    if not G.is_abelian():
        raise ValueError("unsupported: non-abelian group")
    covered = set()
    reps = []
    for i, g in enumerate(G.elements):
        if i in covered:
            continue
        reps.append(g)
        for h in H.elements:
            j = G.index(g @ h)
            if j is None:
                raise ValueError("H is not a subgroup of G")
            covered.add(j)
    if len(reps) * H.order != G.order:
        raise ValueError("H is not a subgroup of G")
    return np.stack(reps)


def _complement_basis(u, v):
    dim = len(u)
    P = np.eye(dim) - np.outer(u, u) - np.outer(v, v)
    Q, R, _ = qr(P, pivoting=True)
    Q = Q[:, :dim - 2] * np.sign(np.diag(R)[:dim - 2])
    if np.linalg.det(np.column_stack([u, v, Q])) < 0:
        Q[:, -1] *= -1
    return Q


def _rotation_numbers(angles, p):
    l = []
    for t in angles:
        x = t * p / (2 * np.pi)
        r = int(round(x))
        if abs(x - r) * 2 * np.pi / p > 1e-9:
            raise ValueError("generator order mismatch")
        r %= p
        l.append(p if r == 0 else r)
    return tuple(l)


def standardize_stabilizer(G_gamma: FiniteGroup, gamma: OrientedGeodesic):
    """Find phi and (p, l) with G_gamma = phi^{-1} G(p, l) phi.

    The first block of the standard form is the plane of ``gamma``, so
    ``apply_isometry(phi, gamma)`` is the standard circle gamma_1, a complex
    line inside an eigenspace of the standard generator.
    """
    gen = is_cyclic(G_gamma)
    if gen is None:
        raise ValueError("stabilizer is not cyclic")
    if not is_fixed_point_free(G_gamma):
        raise ValueError("stabilizer does not act without fixed points")
    g = G_gamma.elements[gen]
    p = G_gamma.order
    u, v = gamma.u, gamma.v
    gu = g @ u
    if not geodesics_equal(apply_isometry(g, gamma), gamma):
        raise ValueError("group does not stabilize the geodesic")
    psi = np.arctan2(v @ gu, u @ gu)
    Q = _complement_basis(u, v)
    cf = _canonical(Q.T @ g @ Q)
    V = np.column_stack([u, v, Q @ cf.conjugator])
    spec = StandardGroupSpec(p, _rotation_numbers(np.concatenate([[psi], cf.angles]), p))
    phi = V.T
    std = conjugate_group(make_group(spec, G_gamma.dim - 1), phi)
    if any(G_gamma.index(h) is None for h in std.elements):
        raise ValueError("generator order mismatch")
    return phi, spec


def _block_angles(phi):
    dim = len(phi)
    mask = np.kron(np.eye(dim // 2), np.ones((2, 2)))
    if np.linalg.norm(phi * (1 - mask)) > MATCH_TOL:
        raise ValueError("generator is not block diagonal")
    return np.array([np.arctan2(phi[2 * m + 1, 2 * m], phi[2 * m, 2 * m]) for m in range(dim // 2)])


def _complex_to_real(U):
    n = U.shape[0]
    R = np.zeros((2 * n, 2 * n))
    R[0::2, 0::2] = U.real
    R[1::2, 1::2] = U.real
    R[0::2, 1::2] = -U.imag
    R[1::2, 0::2] = U.imag
    return R


def build_chi(phi, gamma_target: OrientedGeodesic, j: int) -> np.ndarray:
    """Unitary chi commuting with the standard generator ``phi`` with chi(gamma_j) = gamma_target.

    chi is a complex rotation in span(e_j, w) where w spans the target line,
    so it is the identity on the orthogonal of that eigenspace.
    """
    phi = check_special_orthogonal(phi, tol=1e-10)
    angles = _block_angles(phi)
    n = len(angles)
    if not 1 <= j <= n:
        raise ValueError(f"block index {j} out of range")
    if not is_complex_line(gamma_target):
        raise ValueError("geodesic not a complex line")
    w = gamma_target.u[0::2] + 1j * gamma_target.u[1::2]
    lam = np.exp(1j * angles)
    in_E = np.abs(lam - lam[j - 1]) <= MATCH_TOL
    if np.linalg.norm(w[~in_E]) > MATCH_TOL:
        raise ValueError("no common eigenspace")
    e = np.zeros(n, dtype=complex)
    e[j - 1] = 1.0
    c = abs(w[j - 1])
    w1 = w * np.conj(w[j - 1]) / c if c > 1e-15 else w
    f = w1 - c * e
    s = np.linalg.norm(f)
    U = np.eye(n, dtype=complex)
    if s > 1e-14:
        f = f / s
        U += (c - 1) * (np.outer(e, e.conj()) + np.outer(f, f.conj()))
        U += s * (np.outer(f, e.conj()) - np.outer(e, f.conj()))
    return _complex_to_real(U)


def _invariant_poly_count_exact(spec: StandardGroupSpec, k: int) -> int:
    """Number of monomials z^a zbar^b of degree k with sum l_j (a_j - b_j) = 0 mod p."""
    if k < 0:
        return 0
    p = spec.p
    weights = [x % p for x in spec.l] + [(-x) % p for x in spec.l]
    table = np.zeros((k + 1, p), dtype=object)
    table[0, 0] = 1
    for wgt in weights:
        # multiply by 1/(1 - t s^wgt) in Z[t]/(t^{k+1}) x Z[Z_p]
        for deg in range(1, k + 1):
            table[deg] = table[deg] + np.roll(table[deg - 1], wgt)
    return int(table[k, 0])


def _complete_homogeneous(eigs, k):
    c = np.zeros(k + 1, dtype=complex)
    c[0] = 1.0
    for lam in eigs:
        for m in range(1, k + 1):
            c[m] += lam * c[m - 1]
    return c


def invariant_dimension(G: FiniteGroup, k: int) -> int:
    """Dimension of the G-invariant spherical harmonics of degree k.

    Coefficient difference of the Molien series: exact integer counting for
    standard groups, floating trace formula with rounding otherwise.
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if G.spec is not None:
        return (_invariant_poly_count_exact(G.spec, k)
                - _invariant_poly_count_exact(G.spec, k - 2))
    total = 0j
    for g in G.elements:
        h = _complete_homogeneous(np.linalg.eigvals(g), k)
        total += h[k] - (h[k - 2] if k >= 2 else 0.0)
    value = total / G.order
    out = int(round(value.real))
    if abs(value - out) >= 0.01:
        raise ArithmeticError(f"trace formula residual {abs(value - out):.3e}")
    return out


def generator_matrix(spec: StandardGroupSpec) -> np.ndarray:
    return block_rotation(spec.angles)


def complex_line_geodesic(w) -> OrientedGeodesic:
    """Oriented circle t -> Re(exp(it) w) for a unit w in C^n."""
    w = np.asarray(w, dtype=complex)
    w = w / np.linalg.norm(w)
    u = realify(w)
    return OrientedGeodesic(u, complex_structure(len(u)) @ u)

