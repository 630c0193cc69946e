"""Small dense complex linear algebra used by the precoders.

Every routine accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``
and works on the trailing two axes, so the Monte-Carlo code can push whole
blocks of channel realizations through one call. Results for a given matrix
never depend on what else is in the stack.
"""

from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np

__all__ = [
    "LinAlgError",
    "NotHermitian",
    "NotPositiveDefinite",
    "NotPositiveSemidefinite",
    "SingularTriangular",
    "NoConvergence",
    "HermitianEig",
    "is_hermitian",
    "cholesky",
    "invert_lower_triangular",
    "hermitian_eig",
    "hermitian_tolerance",
]

# Relative Hermitian tolerance assumed by every routine taking a Hermitian input.
hermitian_tolerance = 1e-10

CHOLESKY_PIVOT_EPS = 1e-12
TRIANGULAR_DIAG_RTOL = 1e-14
JACOBI_MAX_SWEEPS = 30
JACOBI_RTOL = 1e-12
PSD_CLAMP_RTOL = 1e-10


class LinAlgError(ArithmeticError):
    """Base class for numerical failures in this module."""


class NotHermitian(LinAlgError, ValueError):
    pass


class NotPositiveDefinite(LinAlgError):
    pass


class NotPositiveSemidefinite(LinAlgError):
    pass


class SingularTriangular(LinAlgError):
    pass


class NoConvergence(LinAlgError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class HermitianEig(NamedTuple):
    """Eigen-pairs of a Hermitian matrix (or stack of them).

    ``eigenvalues[..., i]`` pairs with ``eigenvectors[..., :, i]``; values are
    non-increasing and each eigenvector has its largest-magnitude entry real
    and positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_square_stack(A, name="A"):
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if A.shape[-1] < 1:
        raise ValueError(f"{name} must be at least 1x1")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A.astype(np.complex128, copy=False)


def _fro(A):
    return np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1)))


def _hermitian_defect(A):
    """Relative ||A - A^H||_F / ||A||_F, zero for the zero matrix."""
    diff = _fro(A - np.conj(np.swapaxes(A, -1, -2)))
    norm = _fro(A)
    return np.where(norm > 0, diff / np.where(norm > 0, norm, 1.0), diff)


def is_hermitian(A, rtol=hermitian_tolerance):
    """True iff ``||A - A^H||_F <= rtol * ||A||_F``.

    For a stack of matrices a boolean array over the leading axes is returned.
    """
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    ok = _hermitian_defect(A.astype(np.complex128, copy=False)) <= rtol
    return bool(ok) if ok.ndim == 0 else ok


def _require_hermitian(A, name="A"):
    defect = _hermitian_defect(A)
    if np.any(defect > hermitian_tolerance):
        raise NotHermitian(
            f"{name} is not Hermitian (relative defect {np.max(defect):.3e})"
        )


def cholesky(C):
    """Lower Cholesky factor ``L`` with ``L @ L^H == C`` and real positive diagonal.

    No pivoting. A pivot at or below ``1e-12 * trace(C) / n`` raises
    :class:`NotPositiveDefinite`.
    """
    C = _as_square_stack(C, "C")
    _require_hermitian(C, "C")
    n = C.shape[-1]
    floor = CHOLESKY_PIVOT_EPS * np.real(np.trace(C, axis1=-2, axis2=-1)) / n
    L = np.zeros_like(C)
    for j in range(n):
        row = L[..., j, :j]
        pivot = np.real(C[..., j, j]) - np.sum(np.abs(row) ** 2, axis=-1)
        bad = pivot <= floor
        if np.any(bad):
            raise NotPositiveDefinite(
                f"pivot {np.min(pivot):.3e} at column {j} is not positive"
            )
        d = np.sqrt(pivot)
        L[..., j, j] = d
        if j + 1 < n:
            below = C[..., j + 1 :, j] - np.einsum(
                "...ik,...k->...i", L[..., j + 1 :, :j], np.conj(row)
            )
            L[..., j + 1 :, j] = below / d[..., None]
    return L


def invert_lower_triangular(L):
    """Inverse of a lower-triangular matrix by forward substitution.

    The result is lower triangular. Raises :class:`SingularTriangular` when a
    diagonal entry is smaller than ``1e-14`` times the largest one.
    """
    L = _as_square_stack(L, "L")
    if np.any(np.triu(L, 1) != 0):
        raise ValueError("L must be lower triangular")
    n = L.shape[-1]
    diag = np.diagonal(L, axis1=-2, axis2=-1)
    mag = np.abs(diag)
    if np.any(mag < TRIANGULAR_DIAG_RTOL * np.max(mag, axis=-1, keepdims=True)) or np.any(
        mag == 0
    ):
        raise SingularTriangular("lower-triangular matrix has a (near) zero diagonal entry")
    X = np.zeros_like(L)
    inv_diag = 1.0 / diag
    for i in range(n):
        X[..., i, i] = inv_diag[..., i]
        if i:
            acc = np.einsum("...k,...kj->...j", L[..., i, :i], X[..., :i, :i])
            X[..., i, :i] = -acc * inv_diag[..., i, None]
    return X


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _jacobi_kernel(A, V, tol, max_sweeps):
    """In-place cyclic Jacobi on each matrix of ``A``; returns sweeps used per matrix.

    A matrix whose off-diagonal norm is still above ``tol`` after
    ``max_sweeps`` sweeps reports ``max_sweeps + 1``.
    """
    batch, n, _ = A.shape
    used = np.zeros(batch, dtype=np.int64)
    for b in range(batch):
        a = A[b]
        v = V[b]
        sweeps = 0
        while True:
            off = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        off += a[i, j].real ** 2 + a[i, j].imag ** 2
            if np.sqrt(off) <= tol[b]:
                break
            if sweeps == max_sweeps:
                sweeps += 1
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    z = a[p, q]
                    r = abs(z)
                    if r == 0.0:
                        continue
                    cph = z.conjugate() / r
                    tau = (a[q, q].real - a[p, p].real) / (2.0 * r)
                    sign = 1.0 if tau >= 0.0 else -1.0
                    t = sign / (abs(tau) + np.sqrt(tau * tau + 1.0))
                    c = 1.0 / np.sqrt(1.0 + t * t)
                    s = t * c
                    # W = [[c, s], [-s conj(phase), c conj(phase)]]; A <- W^H A W, V <- V W.
                    # Only columns are rotated; rows follow by Hermitian symmetry.
                    w10 = -s * cph
                    w11 = c * cph
                    app = a[p, p].real - t * r
                    aqq = a[q, q].real + t * r
                    for i in range(n):
                        if i == p or i == q:
                            continue
                        ap = a[i, p]
                        aq = a[i, q]
                        nip = c * ap + aq * w10
                        niq = s * ap + aq * w11
                        a[i, p] = nip
                        a[i, q] = niq
                        a[p, i] = nip.conjugate()
                        a[q, i] = niq.conjugate()
                    a[p, p] = app
                    a[q, q] = aqq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for i in range(n):
                        vp = v[i, p]
                        vq = v[i, q]
                        v[i, p] = c * vp + vq * w10
                        v[i, q] = s * vp + vq * w11
            sweeps += 1
        used[b] = sweeps
    return used


def _jacobi(A):
    """Cyclic complex Jacobi on a stack ``(B, n, n)``; returns (diag, V)."""
    A = np.ascontiguousarray(A, dtype=np.complex128).copy()
    n = A.shape[-1]
    V = np.zeros_like(A)
    V[:, np.arange(n), np.arange(n)] = 1.0
    tol = JACOBI_RTOL * _fro(A)
    used = _jacobi_kernel(A, V, tol, JACOBI_MAX_SWEEPS)
    failed = used > JACOBI_MAX_SWEEPS
    if np.any(failed):
        offmask = ~np.eye(n, dtype=bool)
        off = np.sqrt(np.sum(np.abs(A[failed][:, offmask]) ** 2, axis=-1))
        worst = float(np.max(off / _fro(A[failed])))
        raise NoConvergence(
            f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps "
            f"(relative off-diagonal residual {worst:.3e})",
            residual=worst,
        )
    return np.real(np.diagonal(A, axis1=-2, axis2=-1)).copy(), V


def hermitian_eig(A, psd=False):
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : array_like, shape (..., n, n)
        Hermitian within a relative tolerance of 1e-10.
    psd : bool
        Treat ``A`` as positive semidefinite: negative eigenvalues with
        magnitude at most ``1e-10 * max eigenvalue`` are set to zero and any
        larger negative raises :class:`NotPositiveSemidefinite`.

    Returns
    -------
    HermitianEig
        Eigenvalues sorted non-increasing (stable with respect to the Jacobi
        output order), unitary eigenvectors with a fixed phase convention.
    """
    A = _as_square_stack(A)
    _require_hermitian(A)
    lead = A.shape[:-2]
    n = A.shape[-1]
    # Symmetrize so rounding in the input cannot leak into the rotations.
    H = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    lam, V = _jacobi(H.reshape((-1, n, n)))

    order = np.argsort(-lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)

    pivot = np.argmax(np.abs(V), axis=-2)
    lead_entry = np.take_along_axis(V, pivot[:, None, :], axis=-2)[:, 0, :]
    V = V * (np.conj(lead_entry) / np.abs(lead_entry))[:, None, :]
    np.put_along_axis(V, pivot[:, None, :], np.abs(lead_entry)[:, None, :], axis=-2)

    if psd:
        top = np.max(lam, axis=-1, keepdims=True)
        neg = lam < 0
        tiny = neg & (-lam <= PSD_CLAMP_RTOL * np.maximum(top, 0.0))
        if np.any(neg & ~tiny):
            raise NotPositiveSemidefinite(
                f"eigenvalue {np.min(lam):.3e} is too negative for a PSD input"
            )
        lam = np.where(tiny, 0.0, lam)

    return HermitianEig(lam.reshape(lead + (n,)), V.reshape(lead + (n, n)))
