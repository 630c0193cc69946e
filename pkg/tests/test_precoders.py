import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakage_beam.channel import ChannelSet, SystemDims, draw_channel_set, substream
from leakage_beam.linalg import NotPositiveDefinite, is_hermitian
from leakage_beam.precoders import (
    DegenerateDenominator,
    Scheme,
    all_precoders,
    build_pair,
    ged_diagonalize,
    original_precoder,
    proposed_precoder,
    simultaneous_diagonalize,
    slnr_value,
)


def herm(X):
    return X.conj().T


def scalar_set():
    return ChannelSet(SystemDims(1, 1, 2, 1), np.array([[[1.0]], [[2.0]]]), 1.0)


def random_set(seed, L=2, s2=0.1, N=8, M=3, K=2):
    return draw_channel_set(SystemDims(N, M, K, L), s2, substream(seed))


def parallel_gap(f, g):
    return abs(np.linalg.norm(f) * np.linalg.norm(g) - abs(np.vdot(f, g)))


class TestBuildPair:
    def test_scalar(self):
        A, B = build_pair(scalar_set(), 1)
        np.testing.assert_allclose(A, [[1.0]])
        np.testing.assert_allclose(B, [[5.0]])

    def test_hermitian_and_rank(self):
        cs = random_set(0)
        A, B = build_pair(cs, 2)
        assert is_hermitian(A, 1e-10) and is_hermitian(B, 1e-10)
        ev = np.linalg.eigvalsh(A)[::-1]
        assert ev[2] > 1e-6 * ev[0]
        assert np.all(np.abs(ev[3:]) <= 1e-10 * ev[0])


class TestGed:
    def test_diagonal_pair(self):
        T, lam = ged_diagonalize(np.diag([1.0, 0.0]), np.diag([1.0, 2.0]))
        np.testing.assert_allclose(lam, [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(np.abs(T), np.diag([1.0, 1 / np.sqrt(2)]), atol=1e-15)

    def test_identical_pair(self):
        _, lam = ged_diagonalize(np.eye(4), np.eye(4))
        np.testing.assert_allclose(lam, np.ones(4), atol=1e-14)

    def test_eigenpair_residual(self):
        A, B = build_pair(random_set(1), 1)
        T, lam = ged_diagonalize(A, B)
        for i in range(T.shape[1]):
            t = T[:, i]
            assert np.linalg.norm(A @ t - lam[i] * (B @ t)) <= 1e-8 * np.linalg.norm(A)

    def test_matches_dense_solver(self):
        # eigenvalues of B^-1 A from a general (non-Hermitian) LAPACK route
        A, B = build_pair(random_set(2), 2)
        _, lam = ged_diagonalize(A, B)
        ref = np.sort(np.linalg.eigvals(np.linalg.solve(B, A)).real)[::-1]
        np.testing.assert_allclose(lam, ref, atol=1e-9 * ref[0])

    def test_indefinite_denominator(self):
        with pytest.raises(NotPositiveDefinite):
            ged_diagonalize(np.eye(2), np.diag([1.0, -1.0]))


class TestSimultaneous:
    def test_scalar(self):
        P, theta, omega = simultaneous_diagonalize(np.array([[1.0]]), np.array([[5.0]]))
        np.testing.assert_allclose(theta, [1 / 6])
        np.testing.assert_allclose(omega, [5 / 6])
        np.testing.assert_allclose(np.abs(P), [[1 / np.sqrt(6)]])
        np.testing.assert_allclose(theta / omega, [0.2])

    def test_diagonal_pair(self):
        P, theta, omega = simultaneous_diagonalize(np.diag([1.0, 0.0]), np.diag([1.0, 2.0]))
        np.testing.assert_allclose(theta, [0.5, 0.0], atol=1e-15)
        np.testing.assert_allclose(omega, [0.5, 1.0], atol=1e-15)
        np.testing.assert_allclose(np.abs(P), np.eye(2) / np.sqrt(2), atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        L=st.integers(1, 3),
        s2=st.sampled_from([1e-3, 0.1, 1.0, 10.0]),
        k=st.integers(1, 2),
    )
    def test_pair_identities(self, seed, L, s2, k):
        A, B = build_pair(random_set(seed, L, s2), k)
        P, theta, omega = simultaneous_diagonalize(A, B)
        assert np.linalg.norm(herm(P) @ A @ P - np.diag(theta)) <= 1e-8 * np.linalg.norm(A)
        assert np.linalg.norm(herm(P) @ B @ P - np.diag(omega)) <= 1e-8 * np.linalg.norm(B)
        assert np.max(np.abs(theta + omega - 1)) <= 1e-10
        assert np.all(np.diff(theta) <= 0)
        assert 1 > theta[0] and theta[2] > 0
        assert np.all(np.abs(theta[3:]) <= 1e-10)
        _, lam = ged_diagonalize(A, B)
        gap = np.abs(lam[:3] - theta[:3] / omega[:3]) / np.maximum(1, lam[:3])
        assert np.max(gap) <= 1e-8


class TestPrecoders:
    def test_original_orthogonal_users(self):
        H = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        cs = ChannelSet(SystemDims(2, 1, 2, 1), H, 1.0)
        p = original_precoder(cs, 1)
        np.testing.assert_allclose(np.abs(p.matrix[:, 0]), [1.0, 0.0], atol=1e-15)
        A, B = build_pair(cs, 1)
        f = p.matrix[:, 0]
        lam = p.stream_gains[0]
        assert np.linalg.norm(A @ f - lam * (B @ f)) <= 1e-12

    def test_proposed_scalar(self):
        p = proposed_precoder(scalar_set(), 1)
        np.testing.assert_allclose(np.abs(p.matrix), [[1.0]])
        np.testing.assert_allclose(p.scale, np.sqrt(6))
        np.testing.assert_allclose(p.stream_gains, [1 / 6])

    @pytest.mark.parametrize("scheme", list(Scheme))
    @pytest.mark.parametrize("L", [1, 2, 3])
    def test_power(self, scheme, L):
        for p in all_precoders(random_set(L, L), scheme):
            assert p.matrix.shape == (8, L)
            assert abs(np.trace(p.matrix @ herm(p.matrix)).real - L) <= 1e-10 * L

    def test_single_stream_parallel(self):
        for seed in range(20):
            cs = random_set(seed, L=1, s2=[1e-3, 0.1, 1.0, 10.0][seed % 4])
            for k in (1, 2):
                f = original_precoder(cs, k).matrix[:, 0]
                g = proposed_precoder(cs, k).matrix[:, 0]
                assert parallel_gap(f, g) <= 1e-8

    def test_user_index_checked(self):
        with pytest.raises(IndexError):
            original_precoder(random_set(0), 3)


class TestSlnr:
    @pytest.mark.parametrize("L", [1, 2, 3])
    def test_closed_forms(self, L):
        cs = random_set(30 + L, L, 0.1)
        for k in (1, 2):
            A, B = build_pair(cs, k)
            _, lam = ged_diagonalize(A, B)
            _, theta, _ = simultaneous_diagonalize(A, B)
            s_orig = slnr_value(cs, k, original_precoder(cs, k).matrix)
            s_prop = slnr_value(cs, k, proposed_precoder(cs, k).matrix)
            want = lam[:L].sum() / L
            assert abs(s_orig - want) <= 1e-8 * want
            want = theta[:L].sum() / (1 - theta[:L]).sum()
            assert abs(s_prop - want) <= 1e-8 * want
            assert s_prop <= s_orig * (1 + 1e-12)
            if L >= 2:
                assert s_prop < s_orig

    def test_scalar_value(self):
        cs = scalar_set()
        assert slnr_value(cs, 1, original_precoder(cs, 1).matrix) == pytest.approx(0.2, rel=1e-12)
        assert slnr_value(cs, 1, proposed_precoder(cs, 1).matrix) == pytest.approx(0.2, rel=1e-12)

    def test_random_search_never_wins(self):
        rng = np.random.default_rng(77)
        for i in range(5):
            L = 1 + i % 3
            cs = random_set(100 + i, L, 0.1)
            best = slnr_value(cs, 1, original_precoder(cs, 1).matrix)
            for _ in range(200):
                F = rng.standard_normal((8, L)) + 1j * rng.standard_normal((8, L))
                F *= np.sqrt(L) / np.linalg.norm(F)
                assert slnr_value(cs, 1, F) <= best + 1e-8

    def test_scale_invariant(self):
        cs = random_set(3)
        F = original_precoder(cs, 1).matrix
        assert slnr_value(cs, 1, 3 * F) == pytest.approx(slnr_value(cs, 1, F), rel=1e-12)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            slnr_value(random_set(0), 1, np.ones((7, 2)))

    def test_zero_precoder(self):
        with pytest.raises(DegenerateDenominator):
            slnr_value(random_set(0), 1, np.zeros((8, 2)))
