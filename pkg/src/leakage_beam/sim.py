"""Monte-Carlo BER and sum-rate simulation over an SNR grid.

Each trial draws a fresh channel for every user (block fading), one QPSK
vector symbol per user and one noise vector per user. All requested schemes
see exactly the same draws. Trials are grouped into fixed-size blocks; block
``b`` of SNR point ``i`` always uses the random substream
``(master_seed, i, b)``, and blocks are merged in index order, so the result
is the same for any number of worker threads.
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import SystemDims, draw_channels, substream
from .metrics import stream_powers
from .precoders import Scheme, pair_stack, precoder_stack

__all__ = [
    "LengthMismatch",
    "TargetNotBracketed",
    "SimConfig",
    "BerPoint",
    "noise_variance_for_snr",
    "modulate_qpsk",
    "demodulate_qpsk",
    "simulate_trial",
    "run_sweep",
    "interpolate_snr_at_ber",
    "default_workers",
]

log = logging.getLogger(__name__)

THREADS_ENV = "LEAKAGE_BEAM_THREADS"


class LengthMismatch(ValueError):
    pass


class TargetNotBracketed(ValueError):
    pass


def default_workers():
    value = os.environ.get(THREADS_ENV)
    if value:
        n = int(value)
        if n < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer")
        return n
    return os.cpu_count() or 1


def noise_variance_for_snr(snr_db, L):
    """Noise variance for a transmit SNR of ``L / sigma^2`` given in dB."""
    return L / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class SimConfig:
    dims: SystemDims
    snr_grid_db: tuple = tuple(float(s) for s in range(0, 25, 2))
    schemes: tuple = (Scheme.ORIGINAL, Scheme.PROPOSED)
    max_trials: int = 100_000
    min_bit_errors: int = 200
    master_seed: int = 1
    block_trials: int = 1000
    ber_floor: float = 0.0

    def __post_init__(self):
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("snr_grid_db must not be empty")
        if not all(np.isfinite(grid)):
            raise ValueError("snr_grid_db must be finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("snr_grid_db must be strictly increasing")
        schemes = tuple(Scheme(s) for s in self.schemes)
        if not schemes or len(set(schemes)) != len(schemes):
            raise ValueError("schemes must be a non-empty set of distinct schemes")
        if self.max_trials < 1:
            raise ValueError("max_trials >= 1 required")
        if self.min_bit_errors < 0:
            raise ValueError("min_bit_errors >= 0 required")
        if self.block_trials < 1:
            raise ValueError("block_trials >= 1 required")
        if not 0 <= self.ber_floor < 1:
            raise ValueError("ber_floor must be in [0, 1)")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        object.__setattr__(self, "snr_grid_db", grid)
        object.__setattr__(self, "schemes", schemes)


@dataclass(frozen=True)
class BerPoint:
    """Result of one (SNR, scheme) cell.

    ``resolved`` is False when the trial cap was hit before ``min_bit_errors``
    errors were seen; the point is kept but its BER is only a coarse estimate.
    ``mean_margins_db[l, m]`` averages ``10 log10(sinr_l / sinr_m)`` of the
    exact per-stream SINRs over users and trials.
    """

    snr_db: float
    scheme: Scheme
    bit_errors: int
    bits_simulated: int
    ber: float
    sum_rate_mean: float
    sum_rate_stderr: float
    trials: int = 0
    resolved: bool = True
    user_bit_errors: tuple = ()
    mean_margins_db: np.ndarray = field(default=None, compare=False, repr=False)


def modulate_qpsk(bits):
    """Gray-mapped unit-energy QPSK.

    Bits are consumed in pairs along the last axis:
    ``(b0, b1) -> ((1 - 2 b0) + 1j (1 - 2 b1)) / sqrt(2)``.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise LengthMismatch(f"need an even number of bits, got {bits.shape[-1]}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    pairs = bits.reshape(bits.shape[:-1] + (-1, 2)).astype(float)
    return ((1 - 2 * pairs[..., 0]) + 1j * (1 - 2 * pairs[..., 1])) / math.sqrt(2)


def demodulate_qpsk(symbols):
    """Quadrant decision, inverse of :func:`modulate_qpsk`."""
    symbols = np.asarray(symbols)
    out = np.stack([symbols.real < 0, symbols.imag < 0], axis=-1).astype(np.int8)
    return out.reshape(symbols.shape[:-1] + (-1,))


def _transmit(H, F, bits, noise):
    """Matched-filter detection for stacked trials.

    ``H`` (..., K, M, N), ``F`` (..., K, N, L), ``bits`` (..., K, 2L),
    ``noise`` (..., K, M). Returns the detected bits, shaped like ``bits``.
    """
    s = modulate_qpsk(bits)
    x = np.einsum("...knl,...kl->...n", F, s)
    r = np.einsum("...kmn,...n->...km", H, x) + noise
    HF = H @ F
    s_hat = np.einsum("...kml,...km->...kl", np.conj(HF), r)
    return demodulate_qpsk(s_hat)


def simulate_trial(cs, scheme, rng):
    """Bit errors per user for one vector symbol through ``cs``.

    Draws 2L bits per user, then CN(0, sigma^2 I_M) noise per user, from
    ``rng`` in that order. Calling this with identically seeded generators for
    two schemes gives a paired comparison.
    """
    d = cs.dims
    bits = rng.integers(0, 2, size=(d.K, 2 * d.L), dtype=np.int8)
    noise = draw_channels(rng, (d.K, d.M)) * math.sqrt(cs.noise_variance)
    A, B = pair_stack(cs.channels, cs.noise_variance, d.L)
    F, _, _ = precoder_stack(A, B, d.L, scheme)
    detected = _transmit(cs.channels, F, bits, noise)
    return np.sum(detected != bits, axis=-1)


@dataclass
class _Tally:
    trials: int
    bit_errors: int
    user_bit_errors: np.ndarray
    rate_sum: float
    rate_sumsq: float
    margin_sum: np.ndarray

    def merge(self, other):
        self.trials += other.trials
        self.bit_errors += other.bit_errors
        self.user_bit_errors = self.user_bit_errors + other.user_bit_errors
        self.rate_sum += other.rate_sum
        self.rate_sumsq += other.rate_sumsq
        self.margin_sum = self.margin_sum + other.margin_sum


def _run_block(cfg, snr_index, block_index, n_trials, schemes):
    """Tallies of ``n_trials`` trials for each scheme in ``schemes``.

    The random draws depend only on ``(master_seed, snr_index, block_index)``
    and ``n_trials``, not on which schemes are evaluated.
    """
    d = cfg.dims
    sigma2 = noise_variance_for_snr(cfg.snr_grid_db[snr_index], d.L)
    rng = substream(cfg.master_seed, snr_index, block_index)
    H = draw_channels(rng, (n_trials, d.K, d.M, d.N))
    bits = rng.integers(0, 2, size=(n_trials, d.K, 2 * d.L), dtype=np.int8)
    noise = draw_channels(rng, (n_trials, d.K, d.M)) * math.sqrt(sigma2)
    A, B = pair_stack(H, sigma2, d.L)

    tallies = {}
    for scheme in schemes:
        F, _, _ = precoder_stack(A, B, d.L, scheme)
        detected = _transmit(H, F, bits, noise)
        errors = np.sum(detected != bits, axis=(0, 2)).astype(np.int64)
        sinr = stream_powers(H, F, sigma2).sinr
        rates = np.sum(np.log2(1.0 + sinr), axis=(-2, -1))
        db = 10.0 * np.log10(sinr)
        margins = np.sum(db[..., :, None] - db[..., None, :], axis=(0, 1))
        tallies[scheme] = _Tally(
            trials=n_trials,
            bit_errors=int(errors.sum()),
            user_bit_errors=errors,
            rate_sum=float(np.sum(rates)),
            rate_sumsq=float(np.sum(rates * rates)),
            margin_sum=margins,
        )
    return tallies


def _finish_point(cfg, snr_db, scheme, tally):
    d = cfg.dims
    n = tally.trials
    bits = n * d.K * 2 * d.L
    mean = tally.rate_sum / n
    if n > 1:
        var = max(tally.rate_sumsq - n * mean * mean, 0.0) / (n - 1)
        stderr = math.sqrt(var / n)
    else:
        stderr = float("nan")
    return BerPoint(
        snr_db=snr_db,
        scheme=scheme,
        bit_errors=tally.bit_errors,
        bits_simulated=bits,
        ber=tally.bit_errors / bits,
        sum_rate_mean=mean,
        sum_rate_stderr=stderr,
        trials=n,
        resolved=tally.bit_errors >= cfg.min_bit_errors,
        user_bit_errors=tuple(int(e) for e in tally.user_bit_errors),
        mean_margins_db=tally.margin_sum / (n * d.K),
    )


def _sweep_point(cfg, snr_index, pool, workers):
    """Run blocks for one SNR point until every scheme is done.

    A scheme is done once it has ``min_bit_errors`` errors (checked after each
    block, in block order) or the trial cap is reached. Blocks are dispatched
    ``workers`` at a time; results past the stopping block are discarded, so
    the outcome does not depend on ``workers``.
    """
    totals = {}
    active = list(cfg.schemes)
    done = 0
    block = 0
    while True:
        sizes = []
        start = done
        for _ in range(workers):
            n = min(cfg.block_trials, cfg.max_trials - start)
            if n <= 0:
                break
            sizes.append((block + len(sizes), n))
            start += n
        wave = tuple(active)
        if pool is None:
            results = (_run_block(cfg, snr_index, b, n, wave) for b, n in sizes)
        else:
            results = pool.map(lambda bn: _run_block(cfg, snr_index, *bn, wave), sizes)
        for (_, n), tallies in zip(sizes, results):
            for scheme in active:
                if scheme in totals:
                    totals[scheme].merge(tallies[scheme])
                else:
                    totals[scheme] = tallies[scheme]
            done += n
            block += 1
            active = [s for s in active if totals[s].bit_errors < cfg.min_bit_errors]
            if not active or done >= cfg.max_trials:
                return totals


def run_sweep(cfg, workers=None):
    """BER and sum-rate for every (SNR, scheme) in ``cfg``.

    Each SNR point runs blocks of trials until every scheme has at least
    ``min_bit_errors`` errors or ``max_trials`` trials have run. A scheme that
    reaches its error count stops early; the others keep going on the same
    draws. If ``cfg.ber_floor`` is positive the sweep ends after the first SNR
    point at which every scheme's BER is below it.

    Returns the points ordered by SNR, then by the order of ``cfg.schemes``.
    """
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ValueError("workers >= 1 required")
    points = []
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for i, snr in enumerate(cfg.snr_grid_db):
            total = _sweep_point(cfg, i, pool, workers)
            row = [_finish_point(cfg, snr, s, total[s]) for s in cfg.schemes]
            for point in row:
                if not point.resolved:
                    log.warning(
                        "%s at %.2f dB: only %d bit errors after %d trials",
                        point.scheme, snr, point.bit_errors, point.trials,
                    )
            points.extend(row)
            if cfg.ber_floor > 0 and all(p.ber < cfg.ber_floor for p in row):
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return points


def interpolate_snr_at_ber(curve, target_ber):
    """SNR (dB) where a BER curve crosses ``target_ber``.

    Linear interpolation of SNR against log10(BER) between the first pair of
    adjacent grid points with ``ber[i] >= target >= ber[i+1] > 0``.
    """
    pts = sorted(curve, key=lambda p: p.snr_db)
    if len({p.scheme for p in pts}) > 1:
        raise ValueError("curve mixes several schemes")
    if not target_ber > 0:
        raise ValueError("target_ber must be positive")
    for p in pts:
        if p.ber == target_ber:
            return float(p.snr_db)
    for a, b in zip(pts, pts[1:]):
        if a.ber >= target_ber >= b.ber > 0:
            if any(q.ber > a.ber for q in pts if q.snr_db > a.snr_db):
                warnings.warn("BER curve is not monotone after the crossing", stacklevel=2)
            la, lb, lt = math.log10(a.ber), math.log10(b.ber), math.log10(target_ber)
            return a.snr_db + (lt - la) / (lb - la) * (b.snr_db - a.snr_db)
    raise TargetNotBracketed(f"no adjacent grid points bracket BER {target_ber:g}")
