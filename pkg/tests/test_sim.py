import itertools
import warnings

import numpy as np
import pytest

from leakage_beam.channel import ChannelSet, SystemDims, draw_channel_set, substream
from leakage_beam.precoders import Scheme
from leakage_beam.sim import (
    BerPoint,
    LengthMismatch,
    SimConfig,
    TargetNotBracketed,
    demodulate_qpsk,
    interpolate_snr_at_ber,
    modulate_qpsk,
    noise_variance_for_snr,
    run_sweep,
    simulate_trial,
)

SMALL = SystemDims(4, 2, 2, 2)


class TestQpsk:
    def test_zero_bits(self):
        np.testing.assert_allclose(modulate_qpsk([0, 0]), [(1 + 1j) / np.sqrt(2)])

    def test_unit_energy(self):
        pts = modulate_qpsk(list(itertools.chain(*itertools.product((0, 1), repeat=2))))
        np.testing.assert_allclose(np.abs(pts) ** 2, np.ones(4))

    def test_gray_neighbours(self):
        labels = list(itertools.product((0, 1), repeat=2))
        sym = {b: modulate_qpsk(list(b))[0] for b in labels}
        for a, b in itertools.combinations(labels, 2):
            dist = abs(sym[a] - sym[b])
            hamming = sum(x != y for x, y in zip(a, b))
            # nearest neighbours are sqrt(2) apart, the diagonal 2 apart
            assert hamming == (1 if np.isclose(dist, np.sqrt(2)) else 2)

    def test_round_trip(self):
        bits = np.random.default_rng(0).integers(0, 2, size=(5, 6))
        np.testing.assert_array_equal(demodulate_qpsk(modulate_qpsk(bits)), bits)

    def test_average_power(self):
        bits = np.random.default_rng(1).integers(0, 2, size=(100_000, 4))
        s = modulate_qpsk(bits)
        cov = s.T @ s.conj() / len(s)
        np.testing.assert_allclose(cov, np.eye(2), atol=0.01)

    def test_odd_length(self):
        with pytest.raises(LengthMismatch):
            modulate_qpsk([0, 1, 1])


class TestTrial:
    def test_noiseless_cci_free(self):
        H1 = [[2, 0, 0, 0], [0, 1, 0, 0]]
        H2 = [[0, 0, 1, 0], [0, 0, 0, 1]]
        cs = ChannelSet(SMALL, np.array([H1, H2], dtype=float), 1e-6)
        rng = np.random.default_rng(0)
        for _ in range(50):
            for scheme in Scheme:
                assert simulate_trial(cs, scheme, rng).sum() == 0

    def test_deterministic(self):
        cs = draw_channel_set(SMALL, 1.0, substream(3))
        a = simulate_trial(cs, Scheme.ORIGINAL, substream(1, 2))
        b = simulate_trial(cs, Scheme.ORIGINAL, substream(1, 2))
        np.testing.assert_array_equal(a, b)

    def test_guessing_limit(self):
        rng = np.random.default_rng(5)
        errors = bits = 0
        for _ in range(12_500):
            cs = draw_channel_set(SMALL, 1e8, rng)
            errors += int(simulate_trial(cs, Scheme.PROPOSED, rng).sum())
            bits += 8
        assert bits == 100_000
        assert abs(errors / bits - 0.5) < 0.02


def test_noise_variance_for_snr():
    assert noise_variance_for_snr(0.0, 2) == 2.0
    assert noise_variance_for_snr(10.0, 3) == pytest.approx(0.3)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"snr_grid_db": ()},
            {"snr_grid_db": (0, 0)},
            {"snr_grid_db": (2, 0)},
            {"max_trials": 0},
            {"min_bit_errors": -1},
            {"schemes": ()},
            {"master_seed": -1},
            {"master_seed": 2**64},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(SMALL, **kwargs)

    def test_default_grid(self):
        assert SimConfig(SMALL).snr_grid_db == tuple(float(s) for s in range(0, 25, 2))


def small_config(**kw):
    base = dict(
        dims=SystemDims(8, 3, 2, 2),
        snr_grid_db=(0.0, 6.0, 12.0),
        max_trials=300,
        min_bit_errors=50,
        block_trials=40,
        master_seed=4,
    )
    base.update(kw)
    return SimConfig(**base)


class TestSweep:
    def test_point_invariants(self):
        pts = run_sweep(small_config(), workers=1)
        assert len(pts) == 6
        assert [p.scheme for p in pts[:2]] == [Scheme.ORIGINAL, Scheme.PROPOSED]
        for p in pts:
            assert p.bits_simulated > 0
            assert p.ber == p.bit_errors / p.bits_simulated
            assert 0 <= p.ber <= 1
            assert p.bits_simulated == p.trials * 2 * 2 * 2
            assert sum(p.user_bit_errors) == p.bit_errors
            assert p.resolved == (p.bit_errors >= 50)
            assert p.sum_rate_mean > 0 and p.sum_rate_stderr >= 0

    def test_stops_at_block_boundary(self):
        for p in run_sweep(small_config(), workers=1):
            assert p.trials % 40 == 0 or p.trials == 300
            if p.resolved:
                assert p.trials < 300 or p.bit_errors >= 50

    def test_workers_do_not_change_results(self):
        cfg = small_config()
        ref = run_sweep(cfg, workers=1)
        for w in (2, 3, 8):
            assert run_sweep(cfg, workers=w) == ref

    def test_scheme_subset_uses_same_draws(self):
        both = run_sweep(small_config(), workers=1)
        only = run_sweep(small_config(schemes=(Scheme.PROPOSED,)), workers=1)
        assert only == [p for p in both if p.scheme is Scheme.PROPOSED]

    def test_paired_single_stream(self):
        cfg = small_config(dims=SystemDims(8, 3, 2, 1), min_bit_errors=10**9)
        pts = run_sweep(cfg, workers=1)
        for a, b in zip(pts[::2], pts[1::2]):
            assert a.bit_errors == b.bit_errors
            assert a.sum_rate_mean == pytest.approx(b.sum_rate_mean, rel=1e-9)

    def test_ber_decreases(self):
        pts = run_sweep(small_config(min_bit_errors=10**9), workers=1)
        for scheme in Scheme:
            curve = [p for p in pts if p.scheme is scheme]
            for a, b in zip(curve, curve[1:]):
                slack = 3 * np.sqrt(a.ber * (1 - a.ber) / a.bits_simulated)
                assert b.ber <= a.ber + slack

    def test_ber_floor_truncates(self):
        pts = run_sweep(small_config(ber_floor=0.2, snr_grid_db=(0.0, 12.0, 24.0)), workers=1)
        assert pts[-1].snr_db < 24.0
        assert all(p.ber < 0.2 for p in pts[-2:])

    def test_unresolved_flagged(self, caplog):
        pts = run_sweep(small_config(max_trials=40, snr_grid_db=(24.0,)), workers=1)
        assert not any(p.resolved for p in pts)
        assert "bit errors" in caplog.text


def point(snr, ber):
    return BerPoint(snr, Scheme.ORIGINAL, 0, 1, ber, 0.0, 0.0)


class TestInterpolate:
    def test_midpoint(self):
        assert interpolate_snr_at_ber([point(10, 1e-3), point(12, 1e-5)], 1e-4) == pytest.approx(11.0)

    def test_exact_hit(self):
        curve = [point(8, 1e-2), point(10, 1e-4), point(12, 1e-6)]
        assert interpolate_snr_at_ber(curve, 1e-4) == 10.0

    def test_above_target(self):
        with pytest.raises(TargetNotBracketed):
            interpolate_snr_at_ber([point(0, 0.1), point(2, 0.01)], 1e-4)

    def test_unsorted_input(self):
        assert interpolate_snr_at_ber([point(12, 1e-5), point(10, 1e-3)], 1e-4) == pytest.approx(11.0)

    def test_zero_tail(self):
        curve = [point(10, 1e-3), point(12, 1e-5), point(14, 0.0)]
        assert interpolate_snr_at_ber(curve, 1e-4) == pytest.approx(11.0)

    def test_non_monotone_warns(self):
        curve = [point(10, 1e-3), point(12, 1e-5), point(14, 2e-3)]
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            interpolate_snr_at_ber(curve, 1e-4)
        assert caught
