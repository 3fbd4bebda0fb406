import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

from geobeam.geom import geodesic_from_frame, random_geodesic, standard_geodesic
from geobeam.harmonics import HarmonicSum, evaluate, group_average, normalization_constant


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def g1():
    return standard_geodesic(1, 3)


@pytest.fixture
def g2():
    return standard_geodesic(2, 3)


def tilted(alpha, d=3):
    """gamma_1 tilted by alpha in the (e2, e3) plane."""
    e = np.eye(d + 1)
    return geodesic_from_frame(e[0], np.cos(alpha) * e[1] + np.sin(alpha) * e[2])


def sphere_points(rng, m, d=3):
    x = rng.standard_normal((m, d + 1))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def span_rank_dimension(G, k, rng, n_beams=None):
    """Oracle: rank of group-averaged random beams sampled at random points."""
    d = G.dim - 1
    n = n_beams or 2 * (k + 1) ** 2 + 10
    bs = np.array([random_geodesic(d, rng).b for _ in range(n)])
    x = sphere_points(rng, 3 * n, d)
    M = np.zeros((len(x), n), dtype=complex)
    for t in range(n):
        avg = group_average(HarmonicSum(d, k, bs[t:t + 1], np.ones(1)), G)
        M[:, t] = evaluate(avg, x) if len(avg) else 0.0
    s = np.linalg.svd(M, compute_uv=False)
    # beams are O(C_k) at every point, so an absolute cut is scale-aware
    scale = np.sqrt(len(x) * n) * normalization_constant(k, d)
    return int(np.sum(s > 1e-8 * scale))
