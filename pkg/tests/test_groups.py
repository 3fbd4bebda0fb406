from math import comb, gcd
from itertools import product

import numpy as np
import pytest

from geobeam.geom import (
    apply_isometry,
    block_rotation,
    complex_structure,
    geodesics_equal,
    is_complex_line,
    random_geodesic,
    random_rotation,
    standard_geodesic,
)
from geobeam.groups import (
    FiniteGroup,
    StandardGroupSpec,
    build_chi,
    complex_line_geodesic,
    conjugate_group,
    coset_representatives,
    cyclic_group,
    generator_matrix,
    group_from_elements,
    invariant_dimension,
    is_cyclic,
    is_fixed_point_free,
    make_group,
    stabilizer,
    standardize_stabilizer,
)
from geobeam.groups import _rotation_numbers
from conftest import span_rank_dimension


def same_elements(A, B, tol=1e-9):
    return A.order == B.order and all(A.index(b, tol) is not None for b in B.elements)


def all_powers(p, l):
    """Every power of the block rotation, repeats kept (no coprimality check)."""
    els = [block_rotation(2 * np.pi * ((m * np.asarray(l)) % p) / p) for m in range(p)]
    return FiniteGroup(np.array(els))


# -- construction ------------------------------------------------------------

def test_make_group_examples():
    G = make_group(StandardGroupSpec(1, (1, 1)), 3)
    assert G.order == 1 and np.allclose(G.elements[0], np.eye(4))
    G = make_group(StandardGroupSpec(2, (1, 1)), 3)
    assert G.order == 2 and np.allclose(G.elements[1], -np.eye(4), atol=1e-15)
    G = make_group(StandardGroupSpec(5, (1, 2)), 3)
    assert G.order == 5
    for m, g in enumerate(G.elements[1:], start=1):
        ev = np.linalg.eigvals(g)
        assert np.min(np.abs(ev - 1)) > 0.1
        ref = np.exp(2j * np.pi * np.array([m, -m, 2 * m, -2 * m]) / 5)
        assert np.allclose(np.sort_complex(ev), np.sort_complex(ref))


def test_make_group_rejects_non_coprime():
    with pytest.raises(ValueError, match="generator has fixed points at power 2"):
        make_group(StandardGroupSpec(4, (2, 1)), 3)


def test_order_exact_up_to_24():
    for p in range(1, 25):
        for l1 in range(1, p + 1):
            if gcd(l1, p) != 1:
                continue
            G = make_group(StandardGroupSpec(p, (l1, 1)), 3)
            assert G.order == p and G.is_closed()


def test_fixed_point_free_iff_coprime():
    for p in range(1, 13):
        for l in product(range(1, p + 1), repeat=2):
            coprime = all(gcd(x, p) == 1 for x in l)
            assert is_fixed_point_free(all_powers(p, l)) == coprime, (p, l)
            if coprime:
                assert is_fixed_point_free(make_group(StandardGroupSpec(p, l), 3))


def test_fixed_point_free_examples():
    assert is_fixed_point_free(make_group(StandardGroupSpec(5, (1, 2)), 3))
    rot = np.eye(4)
    rot[:2, :2] = block_rotation([2 * np.pi / 3])
    assert not is_fixed_point_free(cyclic_group(rot))
    assert is_fixed_point_free(group_from_elements([np.eye(4), -np.eye(4)]))


def test_conjugation(rng):
    G = make_group(StandardGroupSpec(5, (1, 2)), 3)
    assert same_elements(conjugate_group(G, np.eye(4)), G)
    phi = random_rotation(4, rng)
    H = conjugate_group(G, phi)
    back = conjugate_group(H, phi.T)
    assert np.max(np.abs(back.elements - G.elements)) <= 1e-10
    plain = FiniteGroup(H.elements)
    assert is_fixed_point_free(plain) and is_cyclic(plain) is not None
    assert plain.is_closed()


# -- stabilizers and cyclicity -----------------------------------------------

def test_stabilizer_examples(rng):
    G = make_group(StandardGroupSpec(7, (1, 3)), 3)
    g1 = standard_geodesic(1, 3)
    assert stabilizer(G, g1).order == 7
    pm = group_from_elements([np.eye(4), -np.eye(4)])
    assert stabilizer(pm, random_geodesic(3, rng)).order == 2
    G5 = make_group(StandardGroupSpec(5, (1, 2)), 3)
    g = random_geodesic(3, rng)
    assert not is_complex_line(g)
    assert stabilizer(G5, g).order == 1


def test_is_cyclic_examples():
    G = make_group(StandardGroupSpec(6, (1, 5)), 3)
    assert is_cyclic(G) is not None
    assert is_cyclic(make_group(StandardGroupSpec(1, (1, 1)), 3)) == 0
    a = np.diag([-1.0, -1.0, 1.0, 1.0])
    b = np.diag([1.0, 1.0, -1.0, -1.0])
    klein = group_from_elements([np.eye(4), a, b, -np.eye(4)])
    assert klein.order == 4 and is_cyclic(klein) is None


def test_stabilizers_of_conjugates_are_cyclic():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = int(rng.integers(2, 9))
        l = tuple(int(x) if gcd(int(x), p) == 1 else 1 for x in rng.integers(1, p + 1, 2))
        phi = random_rotation(4, rng)
        G = conjugate_group(make_group(StandardGroupSpec(p, l), 3), phi)
        for gamma in (apply_isometry(phi.T, standard_geodesic(1, 3)), random_geodesic(3, rng)):
            H = stabilizer(G, gamma)
            assert G.order % H.order == 0
            assert is_cyclic(H) is not None


def test_stabilizer_conjugation_covariance(rng):
    G = make_group(StandardGroupSpec(6, (1, 1)), 3)
    for _ in range(10):
        gamma = random_geodesic(3, rng)
        if rng.random() < 0.5:
            gamma = complex_line_geodesic(rng.standard_normal(2) + 1j * rng.standard_normal(2))
        phi = random_rotation(4, rng)
        lhs = stabilizer(conjugate_group(G, phi.T), apply_isometry(phi, gamma))
        rhs = conjugate_group(stabilizer(G, gamma), phi.T)
        assert same_elements(lhs, rhs)


# -- cosets ------------------------------------------------------------------

def test_cosets():
    G = make_group(StandardGroupSpec(6, (1, 1)), 3)
    H = FiniteGroup(G.elements[[0, 2, 4]])
    reps = coset_representatives(G, H)
    assert len(reps) == 2
    assert np.allclose(reps[0], np.eye(4)) and np.allclose(reps[1], G.elements[1])
    assert len(coset_representatives(G, G)) == 1
    triv = FiniteGroup(G.elements[:1])
    assert np.allclose(coset_representatives(G, triv), G.elements)


def test_cosets_errors():
    G = make_group(StandardGroupSpec(6, (1, 1)), 3)
    other = make_group(StandardGroupSpec(5, (1, 1)), 3)
    with pytest.raises(ValueError, match="not a subgroup"):
        coset_representatives(G, other)
    # dihedral-like non-abelian group of order 8 in SO(4)
    r = block_rotation([np.pi / 2, -np.pi / 2])
    s = np.diag([1.0, -1.0, 1.0, -1.0])
    els = [np.eye(4)]
    frontier = [np.eye(4)]
    while frontier:
        nxt = []
        for x in frontier:
            for g in (r, s):
                y = x @ g
                if all(np.linalg.norm(y - e) > 1e-9 for e in els):
                    els.append(y)
                    nxt.append(y)
        frontier = nxt
    D = group_from_elements(els)
    assert not D.is_abelian()
    with pytest.raises(ValueError, match="unsupported: non-abelian group"):
        coset_representatives(D, FiniteGroup(D.elements[:1]))


# -- standardization ---------------------------------------------------------

def test_standardize_standard():
    spec = StandardGroupSpec(7, (1, 3))
    G = make_group(spec, 3)
    phi, got = standardize_stabilizer(G, standard_geodesic(1, 3))
    assert np.allclose(phi, np.eye(4), atol=1e-12)
    assert got == spec


def test_standardize_minus_identity(rng):
    pm = group_from_elements([np.eye(4), -np.eye(4)])
    for _ in range(5):
        gamma = random_geodesic(3, rng)
        phi, spec = standardize_stabilizer(stabilizer(pm, gamma), gamma)
        assert spec == StandardGroupSpec(2, (1, 1))
        assert geodesics_equal(apply_isometry(phi, gamma), standard_geodesic(1, 3))


def test_standardize_conjugate_roundtrip(rng):
    spec = StandardGroupSpec(4, (1, 3))
    for _ in range(20):
        chi = random_rotation(4, rng)
        G = conjugate_group(make_group(spec, 3), chi)
        gamma = apply_isometry(chi.T, standard_geodesic(1, 3))
        Gg = stabilizer(G, gamma)
        phi, got = standardize_stabilizer(Gg, gamma)
        assert got.p == 4 and got.l[0] == 1 and got.l[1] in (1, 3)
        assert same_elements(conjugate_group(make_group(got, 3), phi), Gg)
        assert geodesics_equal(apply_isometry(phi, gamma), standard_geodesic(1, 3))


def test_standardize_order_mismatch():
    # a genuine cyclic group always has rational angles; exercise the check itself
    assert _rotation_numbers([2 * np.pi / 5, 4 * np.pi / 5], 5) == (1, 2)
    with pytest.raises(ValueError, match="generator order mismatch"):
        _rotation_numbers([2 * np.pi / 5 + 1e-6, 4 * np.pi / 5], 5)
    g = block_rotation([2 * np.pi / 5, np.sqrt(2)])
    fake = FiniteGroup(np.stack([np.linalg.matrix_power(g, m) for m in range(5)]))
    with pytest.raises(ValueError):
        standardize_stabilizer(fake, standard_geodesic(1, 3))


# -- chi ---------------------------------------------------------------------

def check_chi(chi, phi, target, j):
    dim = len(phi)
    J = complex_structure(dim)
    assert np.linalg.norm(chi.T @ chi - np.eye(dim)) <= 1e-10
    assert np.linalg.norm(chi @ J - J @ chi) <= 1e-10
    U = chi[0::2, 0::2] + 1j * chi[1::2, 0::2]
    assert abs(np.linalg.det(U) - 1) <= 1e-10
    assert np.linalg.norm(chi @ phi - phi @ chi) <= 1e-10
    assert geodesics_equal(apply_isometry(chi, standard_geodesic(j, dim - 1)), target)


def test_chi_identity():
    phi = generator_matrix(StandardGroupSpec(5, (1, 2)))
    chi = build_chi(phi, standard_geodesic(2, 3), 2)
    assert np.allclose(chi, np.eye(4), atol=1e-12)


def test_chi_minus_identity(rng):
    phi = -np.eye(4)
    for _ in range(5):
        target = complex_line_geodesic(rng.standard_normal(2) + 1j * rng.standard_normal(2))
        check_chi(build_chi(phi, target, 1), phi, target, 1)


def test_chi_d5_partial_eigenspace(rng):
    phi = block_rotation(2 * np.pi * np.array([1, 1, 2]) / 5)
    w = np.concatenate([rng.standard_normal(2) + 1j * rng.standard_normal(2), [0]])
    target = complex_line_geodesic(w)
    chi = build_chi(phi, target, 1)
    check_chi(chi, phi, target, 1)
    assert np.allclose(chi[4:, 4:], np.eye(2), atol=1e-12)
    assert np.allclose(chi[:4, 4:], 0, atol=1e-12)


def test_chi_fifty_seeded():
    rng = np.random.default_rng(50)
    for _ in range(50):
        d = int(rng.choice([3, 5, 7]))
        n = (d + 1) // 2
        p = int(rng.choice([2, 3, 4, 5, 7]))
        l = rng.integers(1, 3, n)
        l = np.where([gcd(int(x), p) == 1 for x in l], l, 1)
        phi = block_rotation(2 * np.pi * l / p)
        j = int(rng.integers(1, n + 1))
        same = (l - l[j - 1]) % p == 0
        w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * same
        target = complex_line_geodesic(w)
        check_chi(build_chi(phi, target, j), phi, target, j)


def test_chi_errors(rng):
    phi = generator_matrix(StandardGroupSpec(5, (1, 2)))
    with pytest.raises(ValueError, match="geodesic not a complex line"):
        build_chi(phi, random_geodesic(3, rng), 1)
    target = complex_line_geodesic(np.array([1.0, 1.0j]))
    with pytest.raises(ValueError, match="no common eigenspace"):
        build_chi(phi, target, 1)


# -- invariant dimensions ----------------------------------------------------

def test_invariant_dimension_examples():
    assert invariant_dimension(make_group(StandardGroupSpec(1, (1, 1)), 3), 2) == 9
    pm = make_group(StandardGroupSpec(2, (1, 1)), 3)
    assert all(invariant_dimension(pm, k) == 0 for k in (1, 3, 5, 7))
    assert invariant_dimension(make_group(StandardGroupSpec(5, (1, 2)), 3), 5) >= 1


def test_invariant_dimension_trivial_group_formula():
    for d in (3, 5, 7):
        G = make_group(StandardGroupSpec(1, (1,) * ((d + 1) // 2)), d)
        for k in range(8):
            ref = comb(k + d, d) - (comb(k + d - 2, d) if k >= 2 else 0)
            assert invariant_dimension(G, k) == ref


@pytest.mark.parametrize("spec", [(1, (1, 1)), (2, (1, 1)), (3, (1, 1)), (5, (1, 2))])
def test_invariant_dimension_vs_basis_rank(spec):
    rng = np.random.default_rng(spec[0])
    G = make_group(StandardGroupSpec(*spec), 3)
    plain = FiniteGroup(G.elements)
    for k in range(7):
        exact = invariant_dimension(G, k)
        assert invariant_dimension(plain, k) == exact
        assert span_rank_dimension(G, k, rng) == exact


def test_invariant_dimension_conjugate_invariant(rng):
    G = make_group(StandardGroupSpec(6, (1, 5)), 3)
    H = FiniteGroup(conjugate_group(G, random_rotation(4, rng)).elements)
    for k in range(0, 13):
        assert invariant_dimension(H, k) == invariant_dimension(G, k)
