"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorized numpy version.  The numba path is used when numba imports and
``GEOBEAM_DISABLE_NUMBA`` is unset (or ``0``).  Both paths reduce in a fixed
row order, so each is bit-stable across thread counts.
"""

from __future__ import annotations

import cmath
import os
import warnings

import numpy as np

POLAR_THRESHOLD = 64
N_POLY = 28  # 1 + 6 linear + 21 quadratic bivector monomials

_flag = os.environ.get("GEOBEAM_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba
    from numba import njit, prange

    warnings.filterwarnings("ignore", message="The TBB threading layer")

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def _set_threads_from_env():
    cap = os.environ.get("GEOBEAM_NUM_THREADS")
    if HAVE_NUMBA and cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


_set_threads_from_env()


# ---------------------------------------------------------------------------
# numpy paths
# ---------------------------------------------------------------------------


def cpow_np(z, k):
    """z**k elementwise; repeated squaring for small k, polar form beyond."""
    z = np.asarray(z, dtype=np.complex128)
    if k > POLAR_THRESHOLD:
        r = np.abs(z)
        out = np.zeros_like(z)
        nz = r > 0
        out[nz] = r[nz] ** k * np.exp(1j * k * np.angle(z[nz]))
        return out
    result = np.ones_like(z)
    base = z.copy()
    e = k
    while e:
        if e & 1:
            result = result * base
        e >>= 1
        if e:
            base = base * base
    return result


def beam_sum_values_np(points, bvecs, coefs, k):
    dots = points @ bvecs.T
    return cpow_np(dots, k) @ coefs


def _bivector_frame_np(a, c):
    """Isotropic vectors b = x + i y for oriented planes given by (a, c) in S^2 x S^2."""
    B12 = 0.5 * (a[:, 0] + c[:, 0])
    B34 = 0.5 * (a[:, 0] - c[:, 0])
    B13 = 0.5 * (a[:, 1] + c[:, 1])
    B24 = 0.5 * (c[:, 1] - a[:, 1])
    B14 = 0.5 * (a[:, 2] + c[:, 2])
    B23 = 0.5 * (a[:, 2] - c[:, 2])
    n = a.shape[0]
    M = np.zeros((n, 4, 4))
    M[:, 0, 1], M[:, 0, 2], M[:, 0, 3] = B12, B13, B14
    M[:, 1, 2], M[:, 1, 3], M[:, 2, 3] = B23, B24, B34
    M = M - M.transpose(0, 2, 1)
    colnorm = np.einsum("nji,nji->ni", M, M)
    col = np.argmax(colnorm, axis=1)
    x = M[np.arange(n), :, col]
    x = x / np.sqrt(colnorm[np.arange(n), col])[:, None]
    y = -np.einsum("nij,nj->ni", M, x)
    biv = np.stack([B12, B13, B14, B23, B24, B34], axis=1)
    return x + 1j * y, biv


def _monomials_np(biv):
    n = biv.shape[0]
    mono = np.empty((n, N_POLY))
    mono[:, 0] = 1.0
    mono[:, 1:7] = biv
    idx = 7
    for i in range(6):
        for j in range(i, 6):
            mono[:, idx] = biv[:, i] * biv[:, j]
            idx += 1
    return mono


def _test_values_np(biv, poly, bump_c, bump_s, ball_c, ball_r):
    n = biv.shape[0]
    vals = [_monomials_np(biv) @ poly.T]
    if bump_c.shape[0]:
        d2 = ((biv[:, None, :] - bump_c[None, :, :]) ** 2).sum(axis=2)
        vals.append(np.exp(-bump_s[None, :] * d2))
    else:
        vals.append(np.zeros((n, 0)))
    if ball_c.shape[0]:
        d2 = ((biv[:, None, :] - ball_c[None, :, :]) ** 2).sum(axis=2)
        vals.append((d2 < ball_r[None, :] ** 2).astype(np.float64))
    else:
        vals.append(np.zeros((n, 0)))
    vals.append(np.ones((n, 1)))
    return np.concatenate(vals, axis=1)


def _grid_moments_np(a_nodes, a_w, c_nodes, c_w, bterms, coefs, k,
                     bump_c, bump_s, ball_c, ball_r):
    nf = N_POLY + bump_c.shape[0] + ball_c.shape[0]
    rows = np.zeros((a_nodes.shape[0], nf))
    nc = c_nodes.shape[0]
    empty = np.zeros((0, N_POLY))
    for i in range(a_nodes.shape[0]):
        a = np.broadcast_to(a_nodes[i], (nc, 3))
        b, biv = _bivector_frame_np(a, c_nodes)
        ov = 0.5 * (b.conj() @ bterms.T)
        amp = cpow_np(ov, k) @ coefs
        h = (amp.real ** 2 + amp.imag ** 2) * c_w
        F = _test_values_np(biv, empty, bump_c, bump_s, ball_c, ball_r)[:, :-1]
        rows[i, :N_POLY] = a_w[i] * (h @ _monomials_np(biv))
        rows[i, N_POLY:] = a_w[i] * (h @ F)
    total = np.zeros(nf)
    for i in range(rows.shape[0]):
        total += rows[i]
    return total


# ---------------------------------------------------------------------------
# numba paths
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _cpow_nb(z, k):
        if k > POLAR_THRESHOLD:
            r = abs(z)
            if r == 0.0:
                return 0j
            return r ** k * cmath.exp(1j * k * cmath.phase(z))
        result = 1.0 + 0j
        base = z
        e = k
        while e:
            if e & 1:
                result *= base
            e >>= 1
            if e:
                base *= base
        return result

    @njit(parallel=True, cache=True)
    def beam_sum_values_nb(points, bvecs, coefs, k):
        m, dim = points.shape
        nt = bvecs.shape[0]
        out = np.empty(m, dtype=np.complex128)
        for p in prange(m):
            acc = 0j
            for t in range(nt):
                dot = 0j
                for q in range(dim):
                    dot += bvecs[t, q] * points[p, q]
                acc += coefs[t] * _cpow_nb(dot, k)
            out[p] = acc
        return out

    @njit(cache=True)
    def _accumulate_point(biv, h, bump_c, bump_s, ball_c, ball_r, acc):
        # acc layout: 28 monomial moments, then bumps, then balls
        acc[0] += h
        for i in range(6):
            acc[1 + i] += h * biv[i]
        idx = 7
        for i in range(6):
            hb = h * biv[i]
            for j in range(i, 6):
                acc[idx] += hb * biv[j]
                idx += 1
        off = N_POLY
        for f in range(bump_c.shape[0]):
            d2 = 0.0
            for m in range(6):
                diff = biv[m] - bump_c[f, m]
                d2 += diff * diff
            acc[off + f] += h * np.exp(-bump_s[f] * d2)
        off += bump_c.shape[0]
        for f in range(ball_c.shape[0]):
            d2 = 0.0
            for m in range(6):
                diff = biv[m] - ball_c[f, m]
                d2 += diff * diff
            if d2 < ball_r[f] * ball_r[f]:
                acc[off + f] += h

    @njit(parallel=True, cache=True)
    def _grid_moments_nb(a_nodes, a_w, c_nodes, c_w, bterms, coefs, k,
                         bump_c, bump_s, ball_c, ball_r):
        na = a_nodes.shape[0]
        nc = c_nodes.shape[0]
        nt = bterms.shape[0]
        nf = N_POLY + bump_c.shape[0] + ball_c.shape[0]
        rows = np.zeros((na, nf))
        for i in prange(na):
            M = np.zeros((4, 4))
            biv = np.empty(6)
            bc = np.empty(4, dtype=np.complex128)
            acc = np.zeros(nf)
            a0, a1, a2 = a_nodes[i, 0], a_nodes[i, 1], a_nodes[i, 2]
            for j in range(nc):
                c0, c1, c2 = c_nodes[j, 0], c_nodes[j, 1], c_nodes[j, 2]
                biv[0] = 0.5 * (a0 + c0)
                biv[1] = 0.5 * (a1 + c1)
                biv[2] = 0.5 * (a2 + c2)
                biv[3] = 0.5 * (a2 - c2)
                biv[4] = 0.5 * (c1 - a1)
                biv[5] = 0.5 * (a0 - c0)
                M[0, 1] = biv[0]
                M[0, 2] = biv[1]
                M[0, 3] = biv[2]
                M[1, 2] = biv[3]
                M[1, 3] = biv[4]
                M[2, 3] = biv[5]
                for r in range(4):
                    for s in range(r + 1, 4):
                        M[s, r] = -M[r, s]
                best = -1.0
                col = 0
                for s in range(4):
                    nrm = 0.0
                    for r in range(4):
                        nrm += M[r, s] * M[r, s]
                    if nrm > best:
                        best = nrm
                        col = s
                scale = 1.0 / np.sqrt(best)
                # b = x + i y with x = M e_col / |M e_col|, y = -M x; store conj(b) / 2
                for r in range(4):
                    y = 0.0
                    for s in range(4):
                        y -= M[r, s] * M[s, col]
                    bc[r] = 0.5 * scale * (M[r, col] - 1j * y)
                amp = 0j
                for t in range(nt):
                    ov = 0j
                    for r in range(4):
                        ov += bterms[t, r] * bc[r]
                    amp += coefs[t] * _cpow_nb(ov, k)
                h = (amp.real * amp.real + amp.imag * amp.imag) * c_w[j]
                _accumulate_point(biv, h, bump_c, bump_s, ball_c, ball_r, acc)
            for f in range(nf):
                rows[i, f] = a_w[i] * acc[f]
        total = np.zeros(nf)
        for i in range(na):
            for f in range(nf):
                total[f] += rows[i, f]
        return total


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def beam_sum_values(points, bvecs, coefs, k):
    """Sum_t coefs[t] * (bvecs[t] . x)^k at each row x of ``points``."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    bvecs = np.ascontiguousarray(bvecs, dtype=np.complex128)
    coefs = np.ascontiguousarray(coefs, dtype=np.complex128)
    if bvecs.shape[0] == 0:
        return np.zeros(points.shape[0], dtype=np.complex128)
    if USE_NUMBA:
        return beam_sum_values_nb(points, bvecs, coefs, int(k))
    return beam_sum_values_np(points, bvecs, coefs, int(k))


def grid_pairings(a_nodes, a_w, c_nodes, c_w, bterms, coefs, k,
                  poly, bump_c, bump_s, ball_c, ball_r):
    """Integrate Husimi density times test functions over an S^2 x S^2 grid.

    Returns one unnormalized integral per polynomial, bump and ball test
    function, followed by the total mass.  Polynomials are applied to the
    accumulated monomial moments, so their count does not affect the cost.
    """
    poly = np.ascontiguousarray(poly, dtype=np.float64).reshape(-1, N_POLY)
    args = (
        np.ascontiguousarray(a_nodes, dtype=np.float64),
        np.ascontiguousarray(a_w, dtype=np.float64),
        np.ascontiguousarray(c_nodes, dtype=np.float64),
        np.ascontiguousarray(c_w, dtype=np.float64),
        np.ascontiguousarray(bterms, dtype=np.complex128),
        np.ascontiguousarray(coefs, dtype=np.complex128),
        int(k),
        np.ascontiguousarray(bump_c, dtype=np.float64).reshape(-1, 6),
        np.ascontiguousarray(bump_s, dtype=np.float64).reshape(-1),
        np.ascontiguousarray(ball_c, dtype=np.float64).reshape(-1, 6),
        np.ascontiguousarray(ball_r, dtype=np.float64).reshape(-1),
    )
    moments = (_grid_moments_nb if USE_NUMBA else _grid_moments_np)(*args)
    return np.concatenate([poly @ moments[:N_POLY], moments[N_POLY:], moments[:1]])
