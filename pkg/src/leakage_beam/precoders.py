"""SLNR precoders: the GED-based original and the balanced variant.

Both schemes start from the same matrix pair per user,

    A_k = H_k^H H_k,    B_k = (M sigma^2 / L) I + Hbar_k^H Hbar_k,

and differ in how the pair is diagonalized. The original scheme whitens
``B_k`` (``T^H B T = I``) and keeps the leading generalized eigenvectors.
The proposed scheme whitens ``C_k = A_k + B_k`` instead, which yields
``P^H A P = diag(theta)`` and ``P^H B P = diag(1 - theta)`` with the same
eigenvector directions but a per-stream rescaling that narrows the gap
between stream gains.

The ``*_stack`` functions take arrays with arbitrary leading axes and are
what the Monte-Carlo code calls; the per-user functions wrap them for one
:class:`~leakage_beam.channel.ChannelSet`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import check_user, noise_scale
from .linalg import cholesky, hermitian_eig, invert_lower_triangular

__all__ = [
    "Scheme",
    "GedDiagonalization",
    "PairDiagonalization",
    "Precoder",
    "DegenerateDenominator",
    "build_pair",
    "pair_stack",
    "ged_diagonalize",
    "simultaneous_diagonalize",
    "precoder_stack",
    "original_precoder",
    "proposed_precoder",
    "all_precoders",
    "slnr_value",
]


class Scheme(str, enum.Enum):
    ORIGINAL = "original"
    PROPOSED = "proposed"

    def __str__(self):
        return self.value


class DegenerateDenominator(ArithmeticError):
    pass


def _herm(X):
    return np.conj(np.swapaxes(X, -1, -2))


class GedDiagonalization(NamedTuple):
    """``T^H A T = diag(lam)`` and ``T^H B T = I``, ``lam`` non-increasing."""

    transform: np.ndarray
    lam: np.ndarray


class PairDiagonalization(NamedTuple):
    """``P^H A P = diag(theta)``, ``P^H B P = diag(omega)``, ``theta + omega = 1``."""

    transform: np.ndarray
    theta: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True, eq=False)
class Precoder:
    """Normalized precoder of one user.

    ``matrix`` is N x L with ``Tr(F F^H) = L``. ``scale`` is the normalization
    factor applied to the leading transform columns (rho for the original
    scheme, gamma for the proposed one) and ``stream_gains`` are the matching
    diagonal values (lambda_1..L or theta_1..L), so that
    ``F^H A F = scale**2 * diag(stream_gains)``.
    """

    scheme: Scheme
    user: int
    matrix: np.ndarray
    scale: float
    stream_gains: np.ndarray


def pair_stack(H, noise_variance, L):
    """Per-user ``(A, B)`` for channels of shape ``(..., K, M, N)``.

    Returns two arrays of shape ``(..., K, N, N)``.
    """
    H = np.asarray(H, dtype=np.complex128)
    K, M, N = H.shape[-3:]
    gram = _herm(H) @ H
    noise = (M * noise_variance / L) * np.eye(N)
    B = np.empty_like(gram)
    for k in range(K):
        leak = np.zeros_like(gram[..., 0, :, :])
        for i in range(K):
            if i != k:
                leak = leak + gram[..., i, :, :]
        B[..., k, :, :] = noise + leak
    return gram, B


def build_pair(cs, k):
    """``A = H_k^H H_k`` and ``B = (M sigma^2/L) I + Hbar_k^H Hbar_k`` for 1-based ``k``."""
    check_user(cs, k)
    Hk = cs.channels[k - 1]
    Hbar = np.vstack([cs.channels[i] for i in range(cs.dims.K) if i != k - 1])
    A = _herm(Hk) @ Hk
    B = noise_scale(cs.dims, cs.noise_variance) * np.eye(cs.dims.N) + _herm(Hbar) @ Hbar
    return A, B


def ged_diagonalize(A, B):
    """Generalized eigendecomposition of ``(A, B)`` via Cholesky reduction of ``B``.

    With ``B = L_B L_B^H`` the reduced matrix ``L_B^-1 A L_B^-H`` is
    diagonalized by a unitary ``V`` and ``T = L_B^-H V``.
    """
    X = invert_lower_triangular(cholesky(B))
    reduced = X @ A @ _herm(X)
    lam, V = hermitian_eig(reduced, psd=True)
    return GedDiagonalization(_herm(X) @ V, lam)


def simultaneous_diagonalize(A, B):
    """Diagonalize ``A`` and ``B`` together so the two spectra sum to one.

    Steps: ``C = A + B = G G^H`` (Cholesky), ``Q = (G^-1)^H`` so that
    ``Q^H C Q = I``, eigendecompose ``A' = Q^H A Q = U diag(theta) U^H``,
    ``P = Q U`` and ``omega = 1 - theta``.
    """
    A = np.asarray(A, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    C = A + B
    Q = _herm(invert_lower_triangular(cholesky(C)))
    A_prime = _herm(Q) @ A @ Q
    theta, U = hermitian_eig(A_prime, psd=True)
    return PairDiagonalization(Q @ U, theta, 1.0 - theta)


def _fix_column_phase(X):
    # Largest-magnitude entry of every column real positive, so that parallel
    # columns from the two schemes also agree in phase.
    pivot = np.argmax(np.abs(X), axis=-2)[..., None, :]
    entry = np.take_along_axis(X, pivot, axis=-2)
    out = X * (np.conj(entry) / np.abs(entry))
    np.put_along_axis(out, pivot, np.abs(entry), axis=-2)
    return out


def _normalize_leading(transform, L):
    lead = _fix_column_phase(transform[..., :, :L])
    power = np.sum(np.abs(lead) ** 2, axis=(-2, -1))
    scale = np.sqrt(L / power)
    return scale[..., None, None] * lead, scale


def precoder_stack(A, B, L, scheme):
    """Normalized precoders for stacked pairs.

    Returns ``(F, scale, gains)`` with shapes ``(..., N, L)``, ``(...)`` and
    ``(..., L)``.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.ORIGINAL:
        transform, spectrum = ged_diagonalize(A, B)
    else:
        transform, spectrum, _ = simultaneous_diagonalize(A, B)
    F, scale = _normalize_leading(transform, L)
    return F, scale, spectrum[..., :L]


def _precoder(cs, k, scheme):
    check_user(cs, k)
    if cs.dims.L > cs.dims.M:
        raise ValueError("L <= M required")
    A, B = build_pair(cs, k)
    F, scale, gains = precoder_stack(A, B, cs.dims.L, scheme)
    F.setflags(write=False)
    gains.setflags(write=False)
    return Precoder(Scheme(scheme), k, F, float(scale), gains)


def original_precoder(cs, k):
    """Leading L generalized eigenvectors of ``(A_k, B_k)``, scaled to ``Tr(F F^H) = L``."""
    return _precoder(cs, k, Scheme.ORIGINAL)


def proposed_precoder(cs, k):
    """Leading L columns of the balanced transform ``P_k``, scaled to ``Tr(F F^H) = L``."""
    return _precoder(cs, k, Scheme.PROPOSED)


def all_precoders(cs, scheme):
    """Precoders of users ``1..K`` for one scheme, in user order."""
    return [_precoder(cs, k, scheme) for k in range(1, cs.dims.K + 1)]


def slnr_value(cs, k, F):
    """``Tr(F^H A F) / Tr(F^H B F)`` for user ``k`` and any N x L matrix ``F``."""
    A, B = build_pair(cs, k)
    F = np.asarray(F, dtype=np.complex128)
    if F.ndim != 2 or F.shape[0] != cs.dims.N:
        raise ValueError(f"F must be N x L with N={cs.dims.N}, got {F.shape}")
    num = np.real(np.trace(_herm(F) @ A @ F))
    den = np.real(np.trace(_herm(F) @ B @ F))
    if not den > 0:
        raise DegenerateDenominator(f"SLNR denominator {den!r} is not positive")
    return float(num / den)
