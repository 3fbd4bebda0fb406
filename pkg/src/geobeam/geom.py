"""Linear algebra on R^{d+1} = C^n, canonical forms in SO(d+1), oriented great circles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.stats import special_ortho_group

BUILD_TOL = 1e-12
COMPARE_TOL = 1e-9
RECON_TOL = 1e-10


def check_dimension(d: int) -> int:
    """Return ``d`` if it is an odd sphere dimension >= 3, else raise."""
    if int(d) != d or d < 3 or d % 2 == 0:
        raise ValueError(f"sphere dimension must be odd and >= 3, got {d}")
    return int(d)


def complexify(x) -> np.ndarray:
    """Pack a point of S^d into C^n via z_m = x_{2m-1} + i x_{2m}."""
    x = np.asarray(x, dtype=np.float64)
    check_dimension(x.shape[-1] - 1)
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > BUILD_TOL):
        raise ValueError("point is not on the unit sphere")
    return x[..., 0::2] + 1j * x[..., 1::2]


def realify(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    x = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    x[..., 0::2] = z.real
    x[..., 1::2] = z.imag
    return x


def complex_structure(dim: int) -> np.ndarray:
    """Real matrix of multiplication by i on C^{dim/2}."""
    J = np.zeros((dim, dim))
    for m in range(0, dim, 2):
        J[m + 1, m] = 1.0
        J[m, m + 1] = -1.0
    return J


def rotation2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def block_rotation(angles) -> np.ndarray:
    """Block-diagonal rotation acting on z_m as multiplication by exp(i angle_m)."""
    angles = np.asarray(angles, dtype=np.float64)
    out = np.zeros((2 * len(angles), 2 * len(angles)))
    for m, t in enumerate(angles):
        out[2 * m:2 * m + 2, 2 * m:2 * m + 2] = rotation2(t)
    return out


def check_special_orthogonal(matrix, tol: float = BUILD_TOL) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("not special orthogonal: matrix is not square")
    if np.linalg.norm(m.T @ m - np.eye(m.shape[0])) > tol:
        raise ValueError("not special orthogonal")
    if abs(np.linalg.det(m) - 1.0) > RECON_TOL:
        raise ValueError("not special orthogonal: det != +1")
    return m


def random_rotation(dim: int, rng) -> np.ndarray:
    return special_ortho_group.rvs(dim, random_state=rng)


@dataclass(frozen=True)
class CanonicalForm:
    """``conjugator.T @ phi @ conjugator == block_rotation(angles)``."""

    conjugator: np.ndarray
    angles: np.ndarray

    def block(self) -> np.ndarray:
        return block_rotation(self.angles)


def _canonical(phi: np.ndarray) -> CanonicalForm:
    dim = phi.shape[0]
    if dim % 2:
        raise ValueError("canonical form needs an even ambient dimension")
    T, Z = schur(phi, output="real")
    blocks, plus, minus = [], [], []
    i = 0
    while i < dim:
        if i + 1 < dim and T[i + 1, i] != 0.0:
            blocks.append((i, i + 1))
            i += 2
        else:
            (plus if T[i, i] > 0 else minus).append(i)
            i += 1
    if len(plus) % 2 or len(minus) % 2:
        raise ValueError("not special orthogonal: unpaired real eigenvalues")
    for group in (plus, minus):
        blocks.extend(zip(group[0::2], group[1::2]))

    cols, angles = [], []
    for a, b in blocks:
        P = Z[:, [a, b]].copy()
        S = P.T @ phi @ P
        theta = np.arctan2(S[1, 0] - S[0, 1], S[0, 0] + S[1, 1])
        if theta < 0:
            P[:, 1] *= -1
            theta = -theta
        cols.append(P)
        angles.append(theta)

    order = sorted(range(len(blocks)), key=lambda m: (angles[m], m))
    cols = [cols[m] for m in order]
    angles = [angles[m] for m in order]
    V = np.hstack(cols) if cols else np.zeros((0, 0))
    if np.linalg.det(V) < 0:
        flat = [m for m, t in enumerate(angles) if t < 1e-12 or np.pi - t < 1e-12]
        m = flat[0] if flat else 0
        V[:, 2 * m + 1] *= -1
        if not flat:
            angles[0] = -angles[0]
    angles = np.array(angles)
    resid = np.linalg.norm(V.T @ phi @ V - block_rotation(angles))
    if resid > RECON_TOL:
        raise ArithmeticError(f"canonical form reconstruction residual {resid:.3e}")
    return CanonicalForm(V, angles)


def canonical_form(phi) -> CanonicalForm:
    """Conjugate ``phi`` in SO(d+1) to a block-diagonal rotation.

    Angles lie in (-pi, pi] and are sorted ascending.  A negative angle
    appears only when no basis in SO(d+1) makes all of them nonnegative.
    """
    phi = check_special_orthogonal(phi)
    check_dimension(phi.shape[0] - 1)
    return _canonical(phi)


def _triu(dim):
    return np.triu_indices(dim, 1)


@dataclass(frozen=True, eq=False)
class OrientedGeodesic:
    """Oriented great circle t -> u cos t + v sin t."""

    u: np.ndarray
    v: np.ndarray
    bivector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if (abs(u @ u - 1) > BUILD_TOL or abs(v @ v - 1) > BUILD_TOL
                or abs(u @ v) > BUILD_TOL):
            raise ValueError("geodesic frame is not orthonormal")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        M = np.outer(u, v) - np.outer(v, u)
        object.__setattr__(self, "bivector", M[_triu(len(u))])

    @property
    def dim(self) -> int:
        """Ambient dimension d + 1."""
        return len(self.u)

    @property
    def b(self) -> np.ndarray:
        """Isotropic vector u + i v."""
        return self.u + 1j * self.v

    def point(self, t):
        t = np.asarray(t, dtype=np.float64)[..., None]
        return np.cos(t) * self.u + np.sin(t) * self.v

    def reframed(self, alpha: float) -> "OrientedGeodesic":
        c, s = np.cos(alpha), np.sin(alpha)
        return OrientedGeodesic(c * self.u + s * self.v, -s * self.u + c * self.v)

    def reversed(self) -> "OrientedGeodesic":
        return OrientedGeodesic(self.v, self.u)

    def __repr__(self):
        return f"OrientedGeodesic(u={np.round(self.u, 6)}, v={np.round(self.v, 6)})"


def geodesic_from_frame(u, v) -> OrientedGeodesic:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    wedge = np.linalg.norm(np.outer(u, v) - np.outer(v, u)) / np.sqrt(2)
    if wedge < 1e-10:
        raise ValueError("degenerate frame")
    u = u / np.linalg.norm(u)
    v = v - (v @ u) * u
    v = v / np.linalg.norm(v)
    # a second pass keeps the orthogonality error at rounding level
    v = v - (v @ u) * u
    v = v / np.linalg.norm(v)
    return OrientedGeodesic(u, v)


def standard_geodesic(j: int, d: int) -> OrientedGeodesic:
    """The circle |x_{2j-1}|^2 + |x_{2j}|^2 = 1 (j is 1-based)."""
    dim = check_dimension(d) + 1
    if not 1 <= j <= dim // 2:
        raise ValueError(f"block index {j} out of range")
    e = np.eye(dim)
    return OrientedGeodesic(e[2 * j - 2], e[2 * j - 1])


def apply_isometry(phi, gamma: OrientedGeodesic) -> OrientedGeodesic:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (gamma.dim, gamma.dim):
        raise ValueError("isometry and geodesic dimensions differ")
    return OrientedGeodesic(phi @ gamma.u, phi @ gamma.v)


def geodesics_equal(g1: OrientedGeodesic, g2: OrientedGeodesic, tol: float = COMPARE_TOL) -> bool:
    if g1.dim != g2.dim:
        return False
    return bool(np.linalg.norm(g1.bivector - g2.bivector) <= tol)


def is_complex_line(gamma: OrientedGeodesic, tol: float = COMPARE_TOL) -> bool:
    J = complex_structure(gamma.dim)
    return bool(np.linalg.norm(gamma.v - J @ gamma.u) <= tol)


def random_geodesic(d: int, rng) -> OrientedGeodesic:
    x = rng.standard_normal((2, check_dimension(d) + 1))
    return geodesic_from_frame(x[0], x[1])
