"""SLNR-based linear precoding for downlink multi-user MIMO.

Two per-user precoders built from the same Hermitian pair (own-channel Gram
matrix vs. leakage-plus-noise): the generalized-eigenvector precoder and a
balanced variant from a simultaneous diagonalization whose spectra sum to
one. Includes link metrics and a seeded Monte-Carlo BER / sum-rate simulator.
"""

__version__ = "0.1.0"

from .channel import ChannelSet, SystemDims, draw_channel_set, leakage_channel, noise_term
from .metrics import (
    approx_stream_sinr,
    exact_stream_sinr,
    matched_filter,
    stream_margins_db,
    sum_rate,
)
from .precoders import (
    Precoder,
    Scheme,
    all_precoders,
    build_pair,
    ged_diagonalize,
    original_precoder,
    proposed_precoder,
    simultaneous_diagonalize,
    slnr_value,
)
from .sim import BerPoint, SimConfig, interpolate_snr_at_ber, run_sweep

__all__ = [
    "ChannelSet",
    "SystemDims",
    "draw_channel_set",
    "leakage_channel",
    "noise_term",
    "approx_stream_sinr",
    "exact_stream_sinr",
    "matched_filter",
    "stream_margins_db",
    "sum_rate",
    "Precoder",
    "Scheme",
    "all_precoders",
    "build_pair",
    "ged_diagonalize",
    "original_precoder",
    "proposed_precoder",
    "simultaneous_diagonalize",
    "slnr_value",
    "BerPoint",
    "SimConfig",
    "interpolate_snr_at_ber",
    "run_sweep",
]
