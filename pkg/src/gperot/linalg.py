"""Sparse complex-Hermitian linear algebra: ILU(0) and preconditioned CG.

Real-linear (conjugation-dependent) operators are handled by running the
same CG loop with the real inner product Re(x^H y), which is equivalent to
the conventional stacked 2n real embedding without the copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit


@dataclass
class SolveReport:
    iterations: int
    relres: float
    breakdown: str | None = None   # None | "indefinite" | "stagnation"

    @property
    def converged(self) -> bool:
        return self.breakdown is None


def check_hermitian(A: sp.spmatrix, tol: float = 1e-12) -> None:
    d = abs(A - A.getH())
    amax = abs(A).max() if A.nnz else 0.0
    if d.nnz and d.max() > tol * max(amax, 1.0):
        raise ValueError(f"matrix is not Hermitian (deviation {d.max():.3e})")


def stack_real(v: np.ndarray) -> np.ndarray:
    """Complex n-vector -> stacked real 2n-vector (Re, Im)."""
    return np.concatenate([v.real, v.imag])


def unstack_real(x: np.ndarray) -> np.ndarray:
    n = x.size // 2
    return x[:n] + 1j * x[n:]


def embed_real(A) -> np.ndarray:
    """Dense real 2n x 2n embedding [[Re A, -Im A], [Im A, Re A]] of a complex matrix."""
    A = np.asarray(A.todense() if sp.issparse(A) else A)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


@njit(cache=True)
def _ilu0_factor(n, indptr, indices, data, diag_pos, shift):
    # in-place IKJ ILU(0); L unit lower in strict lower part, U in upper incl. diag
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for q in range(indptr[i], indptr[i + 1]):
            pos[indices[q]] = q
        for q in range(indptr[i], indptr[i + 1]):
            k = indices[q]
            if k >= i:
                break
            dk = diag_pos[k]
            piv = data[dk]
            if piv == 0.0:
                piv = shift
                data[dk] = piv
            lik = data[q] / piv
            data[q] = lik
            for r in range(dk + 1, indptr[k + 1]):
                j = indices[r]
                pj = pos[j]
                if pj >= 0:
                    data[pj] -= lik * data[r]
        for q in range(indptr[i], indptr[i + 1]):
            pos[indices[q]] = -1
        if data[diag_pos[i]] == 0.0:
            data[diag_pos[i]] = shift
    return 0


@njit(cache=True)
def _ilu0_solve(n, indptr, indices, data, diag_pos, b, x):
    # forward: L y = b (unit diagonal)
    for i in range(n):
        s = b[i]
        for q in range(indptr[i], diag_pos[i]):
            s -= data[q] * x[indices[q]]
        x[i] = s
    # backward: U x = y
    for i in range(n - 1, -1, -1):
        s = x[i]
        for q in range(diag_pos[i] + 1, indptr[i + 1]):
            s -= data[q] * x[indices[q]]
        x[i] = s / data[diag_pos[i]]
    return 0


class ILU0:
    """Zero-fill incomplete LU of a sparse matrix, applied by two triangular solves."""

    def __init__(self, A: sp.spmatrix):
        A = A.tocsr().copy()
        A.sort_indices()
        n = A.shape[0]
        indptr = A.indptr.astype(np.int64)
        indices = A.indices.astype(np.int64)
        data = np.asarray(A.data, dtype=np.complex128).copy()

        diag_pos = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            row = indices[indptr[i]:indptr[i + 1]]
            hits = np.flatnonzero(row == i)
            if hits.size == 0 or data[indptr[i] + hits[0]] == 0.0:
                raise ValueError(f"ILU0: zero or missing diagonal in row {i}")
            diag_pos[i] = indptr[i] + hits[0]

        maxdiag = np.abs(data[diag_pos]).max()
        _ilu0_factor(n, indptr, indices, data, diag_pos, 1e-12 * maxdiag)

        self.n = n
        self._indptr = indptr
        self._indices = indices
        self._data = data
        self._diag_pos = diag_pos

    def apply(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.complex128)
        if b.ndim == 2:
            return np.column_stack([self.apply(b[:, i])
                                    for i in range(b.shape[1])])
        x = np.empty(self.n, dtype=np.complex128)
        _ilu0_solve(self.n, self._indptr, self._indices, self._data,
                    self._diag_pos, b, x)
        return x

    __call__ = apply


def _as_matvec(A):
    if sp.issparse(A) or isinstance(A, np.ndarray):
        return lambda v: A @ v
    return A


def solve_pcg(A, b, prec=None, rel_tol: float = 1e-10, max_iter: int = 2000,
              inner: str = "complex", x0=None):
    """Preconditioned CG for a self-adjoint positive definite map.

    inner="complex" uses x^H y (complex-linear Hermitian A); inner="real"
    uses Re(x^H y), correct for real-linear self-adjoint maps on complex
    storage. Stopping is on the preconditioned residual norm relative to the
    preconditioned right-hand side. Directions with nonpositive curvature
    set breakdown="indefinite" and return the current iterate.
    """
    matvec = _as_matvec(A)
    apply_prec = (lambda v: v) if prec is None else _as_matvec(prec)
    if inner == "complex":
        dot = lambda x, y: np.vdot(x, y)
    elif inner == "real":
        dot = lambda x, y: np.vdot(x, y).real
    else:
        raise ValueError("inner must be 'complex' or 'real'")

    b = np.asarray(b, dtype=np.complex128)
    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=np.complex128).copy()
    r = b - matvec(x) if x0 is not None else b.copy()
    z = apply_prec(r)
    rz = dot(r, z)
    zb = apply_prec(b)
    bnorm = np.sqrt(abs(dot(b, zb)))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveReport(0, 0.0)
    if rz.real <= 0 and abs(rz) > 0:
        return x, SolveReport(0, np.sqrt(abs(rz)) / bnorm, "indefinite")

    p = z.copy()
    relres = np.sqrt(abs(rz)) / bnorm
    for k in range(1, max_iter + 1):
        if relres <= rel_tol:
            return x, SolveReport(k - 1, relres)
        Ap = matvec(p)
        pAp = dot(p, Ap)
        if pAp.real <= 0.0:
            return x, SolveReport(k - 1, relres, "indefinite")
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        z = apply_prec(r)
        rz_new = dot(r, z)
        if rz_new.real < 0.0:
            return x, SolveReport(k, np.sqrt(abs(rz_new)) / bnorm, "indefinite")
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
        relres = np.sqrt(abs(rz)) / bnorm
    if relres <= rel_tol:
        return x, SolveReport(max_iter, relres)
    return x, SolveReport(max_iter, relres, "stagnation")
