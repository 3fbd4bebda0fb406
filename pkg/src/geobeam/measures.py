"""Measures on the space of oriented geodesics and their coherent-state transforms."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .geom import (
    OrientedGeodesic,
    apply_isometry,
    geodesics_equal,
    random_geodesic,
    standard_geodesic,
)
from .groups import FiniteGroup, stabilizer, standardize_stabilizer
from .harmonics import (
    HarmonicSum,
    beam,
    canonicalize,
    compose_isometry,
    coset_average,
    evaluate,
    inner_product,
    sums_equal,
)
from .quadrature import GeodesicGrid, QuadratureRule

WEIGHT_TOL = 1e-12


def _lex_key(vec):
    return tuple(np.round(vec, 9) + 0.0)


@dataclass(frozen=True, eq=False)
class GeodesicMeasure:
    """Finite convex combination sum_i w_i delta_{gamma_i}."""

    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms, weights = [], []
        for g, w in zip(self.atoms, np.asarray(self.weights, dtype=np.float64)):
            if w <= 0:
                raise ValueError("atom weights must be positive")
            for i, other in enumerate(atoms):
                if geodesics_equal(g, other):
                    weights[i] += w
                    break
            else:
                atoms.append(g)
                weights.append(float(w))
        if not atoms:
            raise ValueError("a measure needs at least one atom")
        weights = np.array(weights)
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "weights", weights)

    @classmethod
    def delta(cls, gamma: OrientedGeodesic) -> "GeodesicMeasure":
        return cls((gamma,), np.ones(1))

    @classmethod
    def combination(cls, atoms: Sequence[OrientedGeodesic], weights) -> "GeodesicMeasure":
        """Build from unnormalized positive weights."""
        w = np.asarray(weights, dtype=np.float64)
        return cls(tuple(atoms), w / w.sum())

    @property
    def dim(self) -> int:
        return self.atoms[0].dim

    def bivectors(self) -> np.ndarray:
        return np.stack([a.bivector for a in self.atoms])

    def pair(self, f: Callable[[OrientedGeodesic], float]) -> float:
        return float(sum(w * f(g) for g, w in zip(self.atoms, self.weights)))

    def mass_of(self, gamma: OrientedGeodesic) -> float:
        for g, w in zip(self.atoms, self.weights):
            if geodesics_equal(g, gamma):
                return float(w)
        return 0.0

    def equals(self, other: "GeodesicMeasure", tol: float = 1e-12) -> bool:
        if len(self.atoms) != len(other.atoms):
            return False
        return all(abs(other.mass_of(g) - w) <= tol for g, w in zip(self.atoms, self.weights))

    def __len__(self):
        return len(self.atoms)


def pushforward(mu: GeodesicMeasure, phi) -> GeodesicMeasure:
    return GeodesicMeasure(tuple(apply_isometry(phi, g) for g in mu.atoms), mu.weights)


def average_measure(mu: GeodesicMeasure, G: FiniteGroup) -> GeodesicMeasure:
    """(1/|G|) sum_g g_* mu."""
    atoms = [apply_isometry(g, a) for g in G.elements for a in mu.atoms]
    weights = np.tile(mu.weights, G.order) / G.order
    return GeodesicMeasure(tuple(atoms), weights)


def mutually_singular(mu: GeodesicMeasure, nu: GeodesicMeasure) -> bool:
    return not any(geodesics_equal(a, b) for a in mu.atoms for b in nu.atoms)


# ---------------------------------------------------------------------------
# test functions on the space of oriented great circles of S^3
# ---------------------------------------------------------------------------

PAIRS = [(i, j) for i in range(6) for j in range(i, 6)]


def _mono_index(i, j=None):
    if j is None:
        return 1 + i
    i, j = min(i, j), max(i, j)
    return 7 + PAIRS.index((i, j))


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Test functions of the Plucker bivector: polynomials of degree <= 2,
    Gaussian bumps exp(-s |B - B0|^2) and indicator balls |B - B0| < r."""

    poly: np.ndarray = field(default_factory=lambda: np.zeros((0, _kernels.N_POLY)))
    bump_centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    bump_scales: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ball_centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    ball_radii: np.ndarray = field(default_factory=lambda: np.zeros(0))
    names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "poly", np.asarray(self.poly, dtype=np.float64).reshape(-1, _kernels.N_POLY))
        object.__setattr__(self, "bump_centers", np.asarray(self.bump_centers, dtype=np.float64).reshape(-1, 6))
        object.__setattr__(self, "bump_scales", np.asarray(self.bump_scales, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "ball_centers", np.asarray(self.ball_centers, dtype=np.float64).reshape(-1, 6))
        object.__setattr__(self, "ball_radii", np.asarray(self.ball_radii, dtype=np.float64).reshape(-1))
        if len(self.names) != len(self):
            object.__setattr__(self, "names", tuple(f"f{i}" for i in range(len(self))))

    def __len__(self):
        return len(self.poly) + len(self.bump_centers) + len(self.ball_centers)

    @property
    def key(self) -> tuple:
        """Content key; equal dictionaries share cached pairings."""
        return tuple(a.tobytes() for a in (self.poly, self.bump_centers, self.bump_scales,
                                           self.ball_centers, self.ball_radii))

    @classmethod
    def default(cls, seed: int = 0, n_centers: int = 8, scales=(4.0, 16.0)) -> "Dictionary":
        """6 linear and 15 mixed quadratic bivector monomials plus seeded bumps."""
        rows, names = [], []
        for i in range(6):
            r = np.zeros(_kernels.N_POLY)
            r[_mono_index(i)] = 1.0
            rows.append(r)
            names.append(f"B{i}")
        for i in range(6):
            for j in range(i + 1, 6):
                r = np.zeros(_kernels.N_POLY)
                r[_mono_index(i, j)] = 1.0
                rows.append(r)
                names.append(f"B{i}*B{j}")
        rng = np.random.default_rng(seed)
        centers = np.stack([random_geodesic(3, rng).bivector for _ in range(n_centers)])
        bc, bs = [], []
        for s in scales:
            for m, c in enumerate(centers):
                bc.append(c)
                bs.append(s)
                names.append(f"bump{m}_s{s:g}")
        return cls(np.array(rows), np.array(bc), np.array(bs), names=tuple(names))

    @classmethod
    def constant(cls) -> "Dictionary":
        r = np.zeros((1, _kernels.N_POLY))
        r[0, 0] = 1.0
        return cls(r, names=("one",))

    @classmethod
    def balls(cls, centers: Sequence[OrientedGeodesic], radius: float) -> "Dictionary":
        cb = np.stack([g.bivector for g in centers])
        return cls(ball_centers=cb, ball_radii=np.full(len(cb), radius),
                   names=tuple(f"ball{i}" for i in range(len(cb))))

    @classmethod
    def bump(cls, center: OrientedGeodesic, scale: float) -> "Dictionary":
        return cls(bump_centers=center.bivector[None], bump_scales=[scale], names=("bump",))

    @classmethod
    def polynomial(cls, coefficients, name: str = "poly") -> "Dictionary":
        return cls(np.asarray(coefficients, dtype=np.float64)[None], names=(name,))

    def values(self, bivectors) -> np.ndarray:
        """Function values at each row of an (m, 6) bivector array, shape (m, len)."""
        biv = np.atleast_2d(np.asarray(bivectors, dtype=np.float64))
        if biv.shape[1] != 6:
            raise ValueError("dictionary functions are defined for d = 3 only")
        F = _kernels._test_values_np(biv, self.poly, self.bump_centers, self.bump_scales,
                                     self.ball_centers, self.ball_radii)
        return F[:, :-1]


def _require_d3(d):
    if d != 3:
        raise ValueError("geodesic-space quadrature only for d=3")


def husimi(psi: HarmonicSum, gamma: OrientedGeodesic) -> float:
    """|<psi, beam(gamma, k)>|^2."""
    return abs(inner_product(psi, beam(gamma, psi.k))) ** 2


@dataclass(eq=False)
class HusimiField:
    """Coherent-state density h(gamma) = husimi(psi, gamma) / Z on S^2 x S^2."""

    psi: HarmonicSum
    grid: GeodesicGrid
    Z: float
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, psi: HarmonicSum, grid: Optional[GeodesicGrid] = None) -> "HusimiField":
        _require_d3(psi.d)
        grid = grid or default_grid()
        field_ = cls(psi, grid, 1.0)
        field_.Z = float(field_._integrate(Dictionary())[-1])
        if field_.Z <= 0:
            raise ValueError("Husimi field of the zero harmonic")
        return field_

    @property
    def k(self) -> int:
        return self.psi.k

    def _integrate(self, dic: Dictionary) -> np.ndarray:
        g = self.grid
        return _kernels.grid_pairings(
            g.first.nodes, g.first.weights, g.second.nodes, g.second.weights,
            self.psi.bvecs, self.psi.coefs, self.psi.k,
            dic.poly, dic.bump_centers, dic.bump_scales, dic.ball_centers, dic.ball_radii)

    def density(self, gamma: OrientedGeodesic) -> float:
        return husimi(self.psi, gamma) / self.Z

    def pair(self, dic: Dictionary) -> np.ndarray:
        key = dic.key
        if key not in self._cache:
            self._cache[key] = self._integrate(dic)[:-1] / self.Z
        return self._cache[key]

    def masses(self, centers: Sequence[OrientedGeodesic], radius: float = 0.5) -> np.ndarray:
        """Husimi mass within bivector distance ``radius`` of each center."""
        return self.pair(Dictionary.balls(centers, radius))


_GRID = {}


def default_grid(n_theta: int = 64, n_phi: int = 64) -> GeodesicGrid:
    key = (n_theta, n_phi)
    if key not in _GRID:
        _GRID[key] = GeodesicGrid.build(n_theta, n_phi)
    return _GRID[key]


def pair_husimi(field_: HusimiField, f: Optional[Dictionary] = None):
    """Pair the Husimi field with dictionary functions; ``f=None`` pairs with 1."""
    if f is None:
        return float(field_.pair(Dictionary.constant())[0])
    return field_.pair(f)


def _pairings(A, dic: Dictionary) -> np.ndarray:
    if isinstance(A, HusimiField):
        return A.pair(dic)
    if isinstance(A, GeodesicMeasure):
        _require_d3(A.dim - 1)
        return A.weights @ dic.values(A.bivectors())
    raise TypeError(f"cannot pair {type(A).__name__} with a dictionary")


def weak_star_discrepancy(A, B, dictionary: Optional[Dictionary] = None) -> float:
    """max_f |<A, f> - <B, f>| over the dictionary."""
    dic = dictionary if dictionary is not None else Dictionary.default()
    return float(np.max(np.abs(_pairings(A, dic) - _pairings(B, dic))))


def position_pairing(psi: HarmonicSum, f: Callable, rule: QuadratureRule,
                     degree: Optional[int] = None) -> float:
    """int f |psi|^2 over S^d.

    ``f`` maps an (m, d+1) array of points to m values; give its polynomial
    ``degree`` to have the rule's exactness checked.
    """
    if rule.d != psi.d:
        raise ValueError("rule and harmonic live on different spheres")
    if degree is not None and rule.exactness is not None and rule.exactness < degree + 2 * psi.k:
        raise ValueError(f"quadrature exactness {rule.exactness} below required degree {degree + 2 * psi.k}")
    vals = evaluate(psi, rule.nodes)
    dens = vals.real ** 2 + vals.imag ** 2
    return float(rule.integrate(np.asarray(f(rule.nodes)) * dens))


def line_integral(gamma: OrientedGeodesic, f: Callable, n: int = 256) -> float:
    """(1/2 pi) int_0^{2 pi} f(u cos t + v sin t) dt, trapezoid rule with ``n`` nodes."""
    t = 2 * np.pi * np.arange(n) / n
    return float(np.mean(np.asarray(f(gamma.point(t)))))


def realize_measure(targets: GeodesicMeasure, G: FiniteGroup, k: int) -> HarmonicSum:
    """Normalized G-invariant degree-k harmonic whose Husimi field tends to <targets>.

    Per orbit of atoms: conjugate the stabilizer to a standard G(p, l),
    take the standard beam on gamma_1 (invariant once p divides k), pull it
    back, and average over the cosets of the stabilizer in G.
    """
    reduced = quotient_husimi_atoms(targets, G)
    d = targets.dim - 1
    parts = []
    for i, (gamma, w) in enumerate(zip(reduced.atoms, reduced.weights)):
        G_gamma = stabilizer(G, gamma)
        try:
            phi, _ = standardize_stabilizer(G_gamma, gamma)
        except ValueError as exc:
            raise ValueError(f"atom {i} not realizable: {exc}") from None
        if k % G_gamma.order:
            # the stabilizer acts on the beam by a nontrivial character
            raise ValueError(f"degree incompatible with group: atom {i} needs a multiple "
                             f"of its stabilizer order {G_gamma.order}, got {k}")
        psi_gamma = compose_isometry(beam(standard_geodesic(1, d), k), phi)
        avg = coset_average(psi_gamma, G, G_gamma)
        nrm = avg.norm()
        if nrm <= 1e-12:
            raise ValueError("degree incompatible with group")
        parts.append(np.sqrt(w) / nrm * avg)
    total = parts[0]
    for extra in parts[1:]:
        total = total + extra
    return canonicalize(total).normalized()


def _check_invariant_function(f, G, d, seed, tol=1e-9, n=100):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d + 1))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    fx = np.asarray(f(x))
    for i, g in enumerate(G.elements):
        if np.max(np.abs(np.asarray(f(x @ g.T)) - fx)) > tol:
            raise ValueError(f"test function is not invariant under group element {i}")


def quotient_pairing(psi: HarmonicSum, f: Callable, G: FiniteGroup, rule: QuadratureRule,
                     degree: Optional[int] = None, seed: int = 0, tol: float = 1e-9,
                     return_residual: bool = False):
    """Pairing of |psi|^2 with f on S^d / G, computed upstairs.

    Each sheet g(nodes) of the quadrature is integrated separately; all must
    agree with the upstairs value within ``tol``.
    """
    for i, g in enumerate(G.elements):
        if not sums_equal(compose_isometry(psi, g), psi):
            raise ValueError(f"harmonic is not invariant under group element {i}")
    _check_invariant_function(f, G, psi.d, seed)
    value = position_pairing(psi, f, rule, degree)
    resid = 0.0
    for g in G.elements:
        moved = rule.nodes @ g.T
        vals = evaluate(psi, moved)
        sheet = rule.integrate(np.asarray(f(moved)) * (vals.real ** 2 + vals.imag ** 2))
        resid = max(resid, abs(sheet - value))
    if resid > tol:
        raise ArithmeticError(f"sheet inconsistency {resid:.3e}")
    return (value, resid) if return_residual else value


def orbit_representative(gamma: OrientedGeodesic, G: FiniteGroup) -> OrientedGeodesic:
    images = [apply_isometry(g, gamma) for g in G.elements]
    return min(images, key=lambda g: _lex_key(g.bivector))


def quotient_husimi_atoms(mu: GeodesicMeasure, G: FiniteGroup) -> GeodesicMeasure:
    """pi_* mu: atoms grouped into G-orbits, each carried by its smallest-bivector image."""
    reps, weights = [], []
    for a, w in zip(mu.atoms, mu.weights):
        r = orbit_representative(a, G)
        for i, other in enumerate(reps):
            if geodesics_equal(r, other):
                weights[i] += w
                break
        else:
            reps.append(r)
            weights.append(float(w))
    return GeodesicMeasure(tuple(reps), np.array(weights))
