"""Cyclic Jacobi eigensolvers for dense symmetric matrices.

Two flavors of the same algorithm: a vectorized double-precision routine
and an arbitrary-precision routine on mpmath matrices. Jacobi rotation
with the relative off-diagonal threshold computes small eigenvalues of
positive definite matrices to high relative accuracy, which is what the
nearly singular Gram matrices in this package need; bisection-style
LAPACK routines only deliver absolute accuracy at the matrix norm scale.

Rotations sweep the strict upper triangle in row-major order, so runs are
deterministic. A sweep that performs no rotation ends the iteration.
"""

import math

import numpy as np
import mpmath as mp
from scipy.linalg import solve_triangular

from .errors import NonConvergenceError

_MAX_SWEEPS = 64


def _rotation(app, aqq, apq):
    """Classic stable Jacobi rotation parameters (c, s)."""
    tau = (aqq - app) / (2.0 * apq)
    if tau >= 0.0:
        t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
    else:
        t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c


def jacobi_eigh(matrix: np.ndarray, rel_tol: float = 1e-14):
    """Eigen decomposition of a symmetric matrix by cyclic Jacobi.

    Returns (values, vectors) with values ascending and vectors in the
    matching column order. A pair (p,q) is rotated while
    |a_pq| > rel_tol * sqrt(|a_pp a_qq|), the relative criterion that
    preserves tiny eigenvalues of graded positive definite matrices.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n == 1:
        return a[0].copy(), np.array([[1.0]])
    v = np.eye(n)
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                gate = rel_tol * math.sqrt(abs(a[p, p] * a[q, q]))
                if abs(apq) <= gate or apq == 0.0:
                    continue
                rotated = True
                c, s = _rotation(a[p, p], a[q, q], apq)
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            vals = np.diag(a).copy()
            order = np.argsort(vals, kind="stable")
            return vals[order], v[:, order]
    raise NonConvergenceError("Jacobi sweep budget exhausted")


def jacobi_eigh_mp(matrix: "mp.matrix", rel_tol=None):
    """Arbitrary-precision cyclic Jacobi on an mpmath matrix.

    Same sweep strategy as the float routine; rel_tol defaults to a few
    digits above the working precision. Returns (values, vectors) with
    values as a sorted list of mpf.
    """
    n = matrix.rows
    a = matrix.copy()
    if rel_tol is None:
        rel_tol = mp.mpf(10) ** (-(mp.mp.dps - 4))
    v = mp.eye(n)
    one = mp.mpf(1)
    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0:
                    continue
                gate = rel_tol * mp.sqrt(abs(a[p, p] * a[q, q]))
                if abs(apq) <= gate:
                    continue
                rotated = True
                tau = (a[q, q] - a[p, p]) / (2 * apq)
                if tau >= 0:
                    t = one / (tau + mp.sqrt(one + tau * tau))
                else:
                    t = -one / (-tau + mp.sqrt(one + tau * tau))
                c = one / mp.sqrt(one + t * t)
                s = t * c
                for k in range(n):
                    akp, akq = a[p, k], a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                for k in range(n):
                    akp, akq = a[k, p], a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                a[p, q] = mp.mpf(0)
                a[q, p] = mp.mpf(0)
                for k in range(n):
                    vkp, vkq = v[k, p], v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
        if not rotated:
            pairs = sorted(((a[i, i], i) for i in range(n)), key=lambda x: x[0])
            vals = [pair[0] for pair in pairs]
            vecs = mp.zeros(n)
            for col, (_, i) in enumerate(pairs):
                for rr in range(n):
                    vecs[rr, col] = v[rr, i]
            return vals, vecs
    raise NonConvergenceError("Jacobi sweep budget exhausted (mp)")


def generalized_largest_eigenpair(a: np.ndarray, b: np.ndarray):
    """Largest eigenpair of A x = lam B x for symmetric A and SPD B.

    Reduces by the Cholesky factor of B and runs the Jacobi solver.
    Raises numpy.linalg.LinAlgError when B is numerically singular; the
    caller decides how to report that.
    """
    chol = np.linalg.cholesky(b)
    half = solve_triangular(chol, a, lower=True)
    reduced = solve_triangular(chol, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)
    vals, vecs = jacobi_eigh(reduced)
    lam = float(vals[-1])
    x = solve_triangular(chol.T, vecs[:, -1], lower=False)
    return lam, x
