"""Quadrature on odd spheres and on the space of oriented great circles of S^3.

The sphere rule writes z_m = sqrt(r_m) exp(i xi_m).  Under the round measure
(r_1, ..., r_n) is uniform on the simplex and the angles are uniform on the
torus, so a trapezoid rule in each angle times a conical Gauss-Jacobi rule on
the simplex integrates every polynomial up to the requested degree exactly.
For d = 3 this is Gauss-Legendre in r_1 times two trapezoid rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import lgamma, log, pi
from typing import Optional

import numpy as np
from scipy.special import roots_jacobi
from scipy.stats import norm, qmc

from .geom import check_dimension

EXACTNESS_CAP = 400
MAX_NODES = 20_000_000


def sphere_volume(d: int) -> float:
    """Surface measure of the unit sphere S^d."""
    return float(np.exp(log(2.0) + 0.5 * (d + 1) * log(pi) - lgamma(0.5 * (d + 1))))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    exactness: Optional[int]
    d: int
    method: str = "product"

    def integrate(self, values) -> float:
        values = np.asarray(values)
        return (self.weights * values).sum()

    def standard_error(self, values) -> float:
        """Monte Carlo error estimate; zero for the exact product rule."""
        if self.method != "qmc":
            return 0.0
        vals = np.asarray(values) * len(self.weights) * self.weights
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))

    def __len__(self):
        return len(self.weights)


def _simplex_rule(n: int, m: int):
    """Conical product rule on {r_i >= 0, sum r_i = 1} in R^n, total weight 1/(n-1)!."""
    wts = np.ones(1)
    remaining = np.ones(1)
    coords = np.zeros((1, 0))
    for i in range(1, n):
        alpha = n - 1 - i
        x, w = roots_jacobi(m, alpha, 0.0)
        s = 0.5 * (1 + x)
        w = w / 2.0 ** (alpha + 1)
        r_i = remaining[:, None] * s[None, :]
        coords = np.concatenate([np.repeat(coords, m, axis=0), r_i.reshape(-1, 1)], axis=1)
        remaining = (remaining[:, None] * (1 - s)[None, :]).reshape(-1)
        wts = (wts[:, None] * w[None, :]).reshape(-1)
    coords = np.concatenate([coords, remaining[:, None]], axis=1)
    return coords, wts


def _product_rule(d: int, degree: int) -> QuadratureRule:
    n = (d + 1) // 2
    m = (degree + 2 + 1) // 2  # ceil((degree + 2) / 2)
    n_xi = degree + 1
    count = m ** (n - 1) * n_xi ** n
    if count > MAX_NODES:
        raise ValueError(f"product rule needs {count} nodes; use method='qmc'")
    r, w_r = _simplex_rule(n, m)
    xi = 2 * np.pi * np.arange(n_xi) / n_xi
    grids = np.meshgrid(*([xi] * n), indexing="ij")
    ang = np.stack([g.reshape(-1) for g in grids], axis=1)
    sqrt_r = np.sqrt(np.clip(r, 0.0, None))
    nodes = np.empty((len(r), len(ang), 2 * n))
    nodes[:, :, 0::2] = sqrt_r[:, None, :] * np.cos(ang)[None, :, :]
    nodes[:, :, 1::2] = sqrt_r[:, None, :] * np.sin(ang)[None, :, :]
    scale = 2.0 ** (1 - n) * (2 * np.pi / n_xi) ** n
    weights = np.repeat(w_r * scale, len(ang))
    return QuadratureRule(nodes.reshape(-1, 2 * n), weights, degree, d, "product")


def _qmc_rule(d: int, n_points: int, seed: int) -> QuadratureRule:
    sob = qmc.Sobol(d + 1, scramble=True, seed=seed)
    u = sob.random(n_points)
    g = norm.ppf(np.clip(u, 1e-15, 1 - 1e-15))
    x = g / np.linalg.norm(g, axis=1, keepdims=True)
    w = np.full(n_points, sphere_volume(d) / n_points)
    return QuadratureRule(x, w, None, d, "qmc")


@lru_cache(maxsize=16)
def quadrature_rule(d: int, exactness_degree: int, method: str = "product",
                    n_points: int = 2 ** 16, seed: int = 0,
                    cap: int = EXACTNESS_CAP) -> QuadratureRule:
    """Integration rule on S^d.

    ``method="product"`` is exact up to ``exactness_degree``;
    ``method="qmc"`` is a scrambled Sobol rule with a standard error.
    """
    check_dimension(d)
    if exactness_degree > cap:
        raise ValueError(f"exactness degree {exactness_degree} exceeds cap {cap}")
    if exactness_degree < 0:
        raise ValueError("exactness degree must be nonnegative")
    if method == "product":
        return _product_rule(d, int(exactness_degree))
    if method == "qmc":
        return _qmc_rule(d, n_points, seed)
    raise ValueError(f"unknown quadrature method {method!r}")


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Gauss-Legendre in cos(theta) times trapezoid in phi on S^2."""

    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, n_theta: int, n_phi: int) -> "SphereRule":
        x, w = np.polynomial.legendre.leggauss(n_theta)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1 - x ** 2)
        nodes = np.stack([
            np.outer(st, np.cos(phi)).reshape(-1),
            np.outer(st, np.sin(phi)).reshape(-1),
            np.repeat(x, n_phi),
        ], axis=1)
        weights = np.repeat(w * 2 * np.pi / n_phi, n_phi)
        return cls(nodes, weights)


@dataclass(frozen=True, eq=False)
class GeodesicGrid:
    """Product rule on S^2 x S^2, the space of oriented great circles of S^3.

    A point (a, c) is the oriented plane whose unit bivector has self-dual
    part a/2 and anti-self-dual part c/2 (see :func:`bivector_to_pair`).
    """

    first: SphereRule
    second: SphereRule

    @classmethod
    def build(cls, n_theta: int = 64, n_phi: int = 64) -> "GeodesicGrid":
        rule = SphereRule.build(n_theta, n_phi)
        return cls(rule, rule)

    @property
    def total_weight(self) -> float:
        return float(self.first.weights.sum() * self.second.weights.sum())

    def __len__(self):
        return len(self.first.weights) * len(self.second.weights)


def bivector_to_pair(biv):
    """Split a unit simple bivector (B12, B13, B14, B23, B24, B34) into (a, c) in S^2 x S^2."""
    B = np.asarray(biv, dtype=np.float64)
    a = np.stack([B[..., 0] + B[..., 5], B[..., 1] - B[..., 4], B[..., 2] + B[..., 3]], axis=-1)
    c = np.stack([B[..., 0] - B[..., 5], B[..., 1] + B[..., 4], B[..., 2] - B[..., 3]], axis=-1)
    return a, c


def pair_to_bivector(a, c):
    a = np.asarray(a, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    return 0.5 * np.stack([
        a[..., 0] + c[..., 0], a[..., 1] + c[..., 1], a[..., 2] + c[..., 2],
        a[..., 2] - c[..., 2], c[..., 1] - a[..., 1], a[..., 0] - c[..., 0],
    ], axis=-1)
