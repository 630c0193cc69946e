"""Receiver-side figures of merit for a set of per-user precoders.

All users apply the matched filter ``G_k = (H_k F_k)^H``. Under either
precoder ``G_k H_k F_k`` is diagonal, so each stream only sees co-channel
interference (CCI) from other users plus filtered noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel import check_user

__all__ = [
    "ReceiveFilter",
    "StreamPowers",
    "StreamSinrReport",
    "NonPositiveSinr",
    "IntraUserInterference",
    "matched_filter",
    "stream_powers",
    "exact_stream_sinr",
    "approx_stream_sinr",
    "stream_margins_db",
    "stream_report",
    "sum_rate",
]

# Off-diagonal mass of G_k H_k F_k allowed relative to its diagonal.
INTRA_USER_RTOL = 1e-8


class NonPositiveSinr(ValueError):
    pass


class IntraUserInterference(ArithmeticError):
    """``G_k H_k F_k`` is not diagonal: the precoder is not a valid SLNR solution."""


@dataclass(frozen=True, eq=False)
class ReceiveFilter:
    user: int
    matrix: np.ndarray


class StreamPowers(NamedTuple):
    """Per-stream powers after matched filtering, each shaped ``(..., K, L)``."""

    signal: np.ndarray
    cci: np.ndarray
    noise: np.ndarray

    @property
    def sinr(self):
        return self.signal / (self.cci + self.noise)


@dataclass(frozen=True, eq=False)
class StreamSinrReport:
    """SINR view of one user's streams.

    ``margins_db[l, m] = 10 log10(sinr[l] / sinr[m])`` from the exact SINRs.
    """

    user: int
    exact_sinr: np.ndarray
    approx_sinr: np.ndarray
    margins_db: np.ndarray


def matched_filter(cs, p):
    """``G = (H_k F)^H`` for precoder ``p`` of user ``p.user``."""
    check_user(cs, p.user)
    G = np.conj(cs.channels[p.user - 1] @ p.matrix).T
    return ReceiveFilter(p.user, G)


def stream_powers(H, F, noise_variance, check=True):
    """Signal, CCI and noise power of every stream after matched filtering.

    Parameters
    ----------
    H : ndarray, shape (..., K, M, N)
    F : ndarray, shape (..., K, N, L)
        Precoder of every user.
    noise_variance : float
    check : bool
        Raise :class:`IntraUserInterference` if any ``G_k H_k F_k`` has
        off-diagonal entries above ``1e-8`` relative to its diagonal.
    """
    H = np.asarray(H)
    F = np.asarray(F)
    K = H.shape[-3]
    # eff[..., k, i] = H_k F_i, shape (M, L)
    eff = np.einsum("...kmn,...inl->...kiml", H, F)
    own = eff[..., np.arange(K), np.arange(K), :, :]
    G = np.conj(np.swapaxes(own, -1, -2))
    # out[..., k, i] = G_k H_k F_i, shape (L, L)
    out = np.einsum("...klm,...kimj->...kilj", G, eff)
    direct = out[..., np.arange(K), np.arange(K), :, :]
    diag = np.diagonal(direct, axis1=-2, axis2=-1)
    if check:
        L = direct.shape[-1]
        off = np.abs(direct * (1 - np.eye(L)))
        if np.any(off > INTRA_USER_RTOL * np.max(np.abs(diag), axis=-1)[..., None, None]):
            raise IntraUserInterference("G_k H_k F_k is not diagonal")
    signal = np.abs(diag) ** 2
    others = (1 - np.eye(K))[:, :, None, None]
    cci = np.sum(others * np.abs(out) ** 2, axis=(-3, -1))
    noise = noise_variance * np.sum(np.abs(G) ** 2, axis=-1)
    return StreamPowers(signal, cci, noise)


def exact_stream_sinr(cs, precoders, k):
    """Per-stream SINR of user ``k`` with CCI from every other user's precoder."""
    check_user(cs, k)
    if len(precoders) != cs.dims.K:
        raise ValueError(f"need precoders for all {cs.dims.K} users, got {len(precoders)}")
    F = np.stack([p.matrix for p in sorted(precoders, key=lambda p: p.user)])
    return stream_powers(cs.channels, F, cs.noise_variance).sinr[k - 1]


def approx_stream_sinr(p, sigma2):
    """CCI-free SINR ``scale^2 * gain_l / sigma^2`` per stream."""
    return p.scale**2 * np.asarray(p.stream_gains, dtype=float) / sigma2


def stream_margins_db(sinr):
    """Antisymmetric table ``10 log10(sinr[l] / sinr[m])`` in dB."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(~(sinr > 0)):
        raise NonPositiveSinr("all SINR entries must be positive")
    db = 10.0 * np.log10(sinr)
    return db[:, None] - db[None, :]


def stream_report(cs, precoders, k):
    by_user = {p.user: p for p in precoders}
    exact = exact_stream_sinr(cs, precoders, k)
    return StreamSinrReport(
        user=k,
        exact_sinr=exact,
        approx_sinr=approx_stream_sinr(by_user[k], cs.noise_variance),
        margins_db=stream_margins_db(exact),
    )


def sum_rate(cs, precoders):
    """``sum_k sum_l log2(1 + SINR_{k,l})`` in bit/s/Hz, interference treated as noise."""
    if len(precoders) != cs.dims.K:
        raise ValueError(f"need precoders for all {cs.dims.K} users, got {len(precoders)}")
    F = np.stack([p.matrix for p in sorted(precoders, key=lambda p: p.user)])
    sinr = stream_powers(cs.channels, F, cs.noise_variance).sinr
    return float(np.sum(np.log2(1.0 + sinr)))
