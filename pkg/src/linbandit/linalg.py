"""Minimal dense linear algebra for small symmetric systems (d <= 64).

Everything the simulator solves has the form lambda*I + A/n with lambda > 0,
so SPD solves go through an unpivoted Cholesky factorization. Eigenvalues use
cyclic Jacobi rotations, which keep symmetric inputs symmetric exactly.
"""

from __future__ import annotations

import math

import numpy as np

PIVOT_TOL = 1e-12
JACOBI_OFF_TOL = 1e-12
DEFAULT_RANK_TOL = 1e-9


class DimensionMismatchError(ValueError):
    pass


class DegenerateSystemError(ValueError):
    """Raised when a Cholesky pivot falls below PIVOT_TOL (non-SPD input)."""


class NoNonzeroEigenvalueError(ValueError):
    """Raised when every eigenvalue sits below the rank tolerance."""


class SymMat:
    """Dense symmetric matrix; the upper triangle is authoritative.

    Construction mirrors the upper triangle into the lower one, so
    ``m[i, j] == m[j, i]`` holds bit-exactly from then on.
    """

    __slots__ = ("a",)

    def __init__(self, arr):
        a = np.array(arr, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite entries in matrix")
        iu = np.triu_indices(a.shape[0], k=1)
        a[(iu[1], iu[0])] = a[iu]
        self.a = a

    @classmethod
    def zeros(cls, d):
        return cls(np.zeros((d, d)))

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d))

    @classmethod
    def _wrap(cls, a):
        # internal: trusted already-symmetric array, skip re-validation
        m = cls.__new__(cls)
        m.a = a
        return m

    @property
    def dim(self):
        return self.a.shape[0]

    def copy(self):
        return SymMat._wrap(self.a.copy())

    def upper_triangle(self):
        """Row-major flattened upper triangle (including the diagonal)."""
        iu = np.triu_indices(self.dim)
        return self.a[iu].copy()

    @classmethod
    def from_upper_triangle(cls, d, flat):
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (d * (d + 1) // 2,):
            raise DimensionMismatchError("upper triangle length does not match dimension")
        a = np.zeros((d, d))
        a[np.triu_indices(d)] = flat
        return cls(a)

    def __repr__(self):
        return f"SymMat({self.a!r})"


def _check_vec(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionMismatchError(f"expected vector of dimension {d}, got shape {x.shape}")
    return x


def rank1_update(M, x):
    """Return M + x x^T.

    The outer product is symmetric bit-for-bit (IEEE multiplication commutes),
    so the result stays exactly symmetric.
    """
    x = _check_vec(x, M.dim)
    return SymMat._wrap(M.a + np.outer(x, x))


def cholesky(M, pivot_tol=PIVOT_TOL):
    """Lower-triangular L with L L^T = M; raises on pivots <= pivot_tol."""
    d = M.dim
    a = M.a
    L = np.zeros((d, d))
    for j in range(d):
        piv = a[j, j] - L[j, :j] @ L[j, :j]
        if piv <= pivot_tol:
            raise DegenerateSystemError(f"pivot {piv:.3e} at column {j} (matrix not SPD)")
        ljj = math.sqrt(piv)
        L[j, j] = ljj
        if j + 1 < d:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / ljj
    return L


def spd_solve(M, v):
    """Solve M u = v for symmetric positive definite M."""
    v = _check_vec(v, M.dim)
    L = cholesky(M)
    d = M.dim
    # forward substitution L y = v, then back substitution L^T u = y
    y = np.empty(d)
    for i in range(d):
        y[i] = (v[i] - L[i, :i] @ y[:i]) / L[i, i]
    u = np.empty(d)
    for i in range(d - 1, -1, -1):
        u[i] = (y[i] - L[i + 1:, i] @ u[i + 1:]) / L[i, i]
    return u


def _offdiag_frobenius(a):
    return math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))


def sym_eigenvalues(M):
    """Ascending eigenvalues of a symmetric matrix via cyclic Jacobi sweeps."""
    a = M.a.copy()
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries in matrix")
    d = a.shape[0]
    if d == 1:
        return np.array([a[0, 0]])
    # iterate on a scaled copy so the absolute off-diagonal threshold is
    # meaningful for any input magnitude
    scale = np.max(np.abs(a))
    if scale == 0.0:
        return np.zeros(d)
    a /= scale
    max_sweeps = 100
    for _ in range(max_sweeps):
        if _offdiag_frobenius(a) <= JACOBI_OFF_TOL:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < abs(diff) * 1e-36:
                    t = apq / diff
                else:
                    phi = diff / (2.0 * apq)
                    t = 1.0 / (abs(phi) + math.sqrt(phi * phi + 1.0))
                    if phi < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # apply the rotation to rows/columns p and q
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
    return np.sort(np.diag(a)) * scale


def min_nonzero_eigenvalue(M, rank_tol=DEFAULT_RANK_TOL):
    """Smallest eigenvalue above rank_tol * lambda_max for a PSD matrix."""
    if not 0.0 < rank_tol < 1.0:
        raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
    evals = sym_eigenvalues(M)
    lam_max = evals[-1]
    nonzero = evals[evals > rank_tol * lam_max] if lam_max > 0 else evals[:0]
    if nonzero.size == 0:
        raise NoNonzeroEigenvalueError("matrix has no eigenvalue above the rank tolerance")
    return float(nonzero[0])
