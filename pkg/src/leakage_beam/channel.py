"""I.i.d. Rayleigh downlink channels and the per-user leakage stack."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemDims",
    "ChannelSet",
    "IndexOutOfRange",
    "draw_channels",
    "draw_channel_set",
    "leakage_channel",
    "noise_term",
    "noise_scale",
    "substream",
    "dump_channel_set",
    "load_channel_set",
]

FULL_RANK_RTOL = 1e-10


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class SystemDims:
    """Antenna and stream counts.

    Attributes
    ----------
    N : int
        Transmit antennas at the base station.
    M : int
        Receive antennas per user.
    K : int
        Number of users (at least 2, so every user leaks somewhere).
    L : int
        Data streams per user, ``1 <= L <= M``.
    """

    N: int
    M: int
    K: int
    L: int

    def __post_init__(self):
        for name in ("N", "M", "K", "L"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise TypeError(f"{name} must be an integer, got {value!r}")
        if self.N < 1:
            raise ValueError("N >= 1 required")
        if self.M < 1:
            raise ValueError("M >= 1 required")
        if self.K < 2:
            raise ValueError("K >= 2 required")
        if not 1 <= self.L:
            raise ValueError("L >= 1 required")
        if self.L > self.M:
            raise ValueError(f"L <= M required (L={self.L}, M={self.M})")


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One realization of all K user channels.

    ``channels`` has shape ``(K, M, N)``; ``channels[k]`` is the channel from
    the base station to user ``k`` (0-based internally, 1-based in
    :func:`leakage_channel`). The array is made read-only on construction.
    """

    dims: SystemDims
    channels: np.ndarray
    noise_variance: float

    def __post_init__(self):
        d = self.dims
        H = np.array(self.channels, dtype=np.complex128)
        if H.shape != (d.K, d.M, d.N):
            raise ValueError(f"channels must have shape {(d.K, d.M, d.N)}, got {H.shape}")
        if not np.all(np.isfinite(H)):
            raise ValueError("channels have non-finite entries")
        if not (self.noise_variance > 0 and np.isfinite(self.noise_variance)):
            raise ValueError("noise_variance must be positive and finite")
        sv = np.linalg.svd(H, compute_uv=False)
        if np.any(sv[:, -1] <= FULL_RANK_RTOL * sv[:, 0]) and d.M <= d.N:
            raise ValueError("every H_k must have full row rank M")
        H.setflags(write=False)
        object.__setattr__(self, "channels", H)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    def __eq__(self, other):
        if not isinstance(other, ChannelSet):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.noise_variance == other.noise_variance
            and np.array_equal(self.channels, other.channels)
        )


def substream(master_seed, *key):
    """Independent generator for the work unit named by ``key``.

    The stream depends only on ``master_seed`` and ``key``, never on the order
    in which work units run.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def draw_channels(rng, shape):
    """CN(0, 1) entries: real and imaginary parts i.i.d. N(0, 1/2)."""
    z = rng.standard_normal(tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def draw_channel_set(dims, noise_variance, rng):
    """Draw ``H_1..H_K`` with i.i.d. CN(0, 1) entries from ``rng``."""
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    H = draw_channels(rng, (dims.K, dims.M, dims.N))
    return ChannelSet(dims, H, noise_variance)


def check_user(cs, k):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= cs.dims.K:
        raise IndexOutOfRange(f"user index must be in 1..{cs.dims.K}, got {k!r}")


def leakage_channel(cs, k):
    """Rows of every other user's channel stacked in ascending user order.

    ``k`` is 1-based. The result has shape ``((K-1)*M, N)``.
    """
    check_user(cs, k)
    others = [cs.channels[i] for i in range(cs.dims.K) if i != k - 1]
    return np.vstack(others)


def noise_scale(dims, noise_variance):
    """Scalar ``M * sigma^2 / L`` weighting the identity in the SLNR denominator."""
    return dims.M * noise_variance / dims.L


def noise_term(cs):
    """``(M sigma^2 / L) I_N``."""
    return noise_scale(cs.dims, cs.noise_variance) * np.eye(cs.dims.N, dtype=np.complex128)


def dump_channel_set(cs):
    """JSON text with every H_k as nested ``[re, im]`` pairs."""
    d = cs.dims
    doc = {
        "N": d.N,
        "M": d.M,
        "K": d.K,
        "L": d.L,
        "noise_variance": cs.noise_variance,
        "channels": [
            [[[float(z.real), float(z.imag)] for z in row] for row in Hk] for Hk in cs.channels
        ],
    }
    return json.dumps(doc)


def load_channel_set(text):
    doc = json.loads(text)
    dims = SystemDims(doc["N"], doc["M"], doc["K"], doc["L"])
    raw = np.asarray(doc["channels"], dtype=float)
    if raw.shape != (dims.K, dims.M, dims.N, 2):
        raise ValueError(f"channels must have shape {(dims.K, dims.M, dims.N, 2)}, got {raw.shape}")
    return ChannelSet(dims, raw[..., 0] + 1j * raw[..., 1], doc["noise_variance"])
