import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chansep.channel import global_channel, realize
from chansep.metrics import DIRECT, MetricKind, sum_rate
from chansep.numerics import RankDeficiencyError
from chansep.separation import (
    PhaseVector,
    S_of_Q,
    metric_from_w,
    separate,
    separated_metric,
    w_of_phases,
)
from conftest import small_config

seeds = st.integers(0, 2 ** 32 - 1)


def unitary_from(a_b):
    """Unitary whose first column is a_b/sqrt(M): the left singular basis of H_br."""
    M = a_b.size
    X = np.eye(M, dtype=complex)
    X[:, 0] = a_b / np.sqrt(M)
    U, _ = np.linalg.qr(X)
    return U * (X[:, 0] @ U[:, 0].conj() / abs(X[:, 0] @ U[:, 0].conj()))


def test_unitary_helper():
    a = np.exp(1j * np.arange(4))
    U = unitary_from(a)
    np.testing.assert_allclose(U[:, 0], a / 2, atol=1e-14)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(4), atol=1e-14)


class TestSeparate:
    def test_zero_direct_channel(self):
        cfg = small_config()
        real = dataclasses.replace(realize(cfg, seed=1), H_d=np.zeros((cfg.M, cfg.K)))
        sep = separate(real, cfg.sigma2)
        assert np.all(sep.Q_zf == 0) and np.all(sep.w1 == 0)
        np.testing.assert_allclose(sep.Q_sum, cfg.sigma2 * np.eye(cfg.K))

    def test_single_antenna(self):
        cfg = small_config().replace(M_y=1, M_z=1)
        sep = separate(realize(cfg, seed=2), cfg.sigma2)
        assert np.max(np.abs(sep.Q_zf)) <= 1e-30
        with pytest.raises(RankDeficiencyError):
            sep.P(MetricKind.ZfRate)

    def test_svd_oracle(self):
        cfg = small_config(N_y=4, N_z=4, K=3).replace(M_y=4, M_z=2)
        real = realize(cfg, seed=3)
        sep = separate(real, cfg.sigma2)
        U = unitary_from(real.a_b)
        H1 = (U.conj().T @ real.H_d)[1:]
        ref = cfg.sigma2 * np.eye(3) + H1.conj().T @ H1
        assert np.linalg.norm(sep.Q_sum - ref) <= 1e-10 * np.linalg.norm(ref)
        np.testing.assert_allclose(sep.Q_sum - sep.Q_zf, cfg.sigma2 * np.eye(3), atol=1e-12 * cfg.sigma2)
        assert sep.Q_mmse is sep.Q_sum

    def test_requires_pure_los(self):
        cfg = small_config(kappa_br=1.0)
        real = realize(cfg, seed=1)
        with pytest.raises(ValueError, match="rank-1"):
            separate(real, cfg.sigma2)
        assert separate(real, cfg.sigma2, force=True).forced

    def test_definiteness(self):
        cfg = small_config(K=3)
        sep = separate(realize(cfg, seed=4), cfg.sigma2)
        assert np.linalg.eigvalsh(sep.Q_sum).min() > 0
        assert np.linalg.eigvalsh(sep.Q_zf).min() >= -1e-12 * np.linalg.norm(sep.Q_zf)

    def test_projector_idempotent(self):
        real = realize(small_config(), seed=5)
        M = real.M
        Pr = np.eye(M) - np.outer(real.a_b, real.a_b.conj()) / M
        assert np.max(np.abs(Pr @ Pr - Pr)) <= 1e-12


class TestW:
    def test_zero_phase_start(self):
        cfg = small_config()
        sep = separate(realize(cfg, seed=6), cfg.sigma2)
        x = PhaseVector.continuous(np.zeros(cfg.N))
        np.testing.assert_allclose(w_of_phases(sep, x), sep.w1 + sep.A1.conj().T @ np.ones(cfg.N))

    def test_disconnected_ris(self, rng):
        cfg = small_config()
        sep = separate(realize(cfg, seed=6), cfg.sigma2)
        sep = dataclasses.replace(sep, A1=np.zeros_like(sep.A1))
        x = PhaseVector.continuous(rng.uniform(0, 6, cfg.N))
        np.testing.assert_array_equal(w_of_phases(sep, x), sep.w1)

    @given(seeds)
    def test_first_row_identity(self, seed):
        cfg = small_config(K=3)
        real = realize(cfg, seed=seed)
        sep = separate(real, cfg.sigma2)
        x = PhaseVector.continuous(np.random.default_rng(seed).uniform(0, 7, cfg.N))
        H = global_channel(real, x)
        U = unitary_from(real.a_b)
        Ht = U.conj().T @ H
        w = w_of_phases(sep, x)
        assert np.linalg.norm(Ht[0].conj() - w) <= 1e-10 * np.linalg.norm(w)
        # every phase-dependent entry sits in the first row
        H0 = U.conj().T @ real.H_d
        assert np.linalg.norm(Ht[1:] - H0[1:]) <= 1e-10 * np.linalg.norm(H0)
        for Q, alpha in ((sep.Q_sum, cfg.sigma2), (sep.Q_zf, 0.0)):
            lhs = Q + np.outer(w, w.conj())
            rhs = alpha * np.eye(3) + H.conj().T @ H
            assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)

    def test_length_checked(self):
        cfg = small_config()
        sep = separate(realize(cfg, seed=6), cfg.sigma2)
        with pytest.raises(ValueError):
            w_of_phases(sep, np.ones(cfg.N - 1))


class TestSeparatedMetric:
    def test_no_ris_matches_direct(self):
        cfg = small_config()
        real = realize(cfg, seed=7)
        real = dataclasses.replace(real, H_br=np.zeros_like(real.H_br), beta_br=0.0)
        sep = separate(real, cfg.sigma2)
        x = PhaseVector.continuous(np.ones(cfg.N))
        assert separated_metric(MetricKind.SumRate, sep, x) == pytest.approx(
            sum_rate(real.H_d, cfg.sigma2), rel=1e-12)

    def test_scalar_mse(self):
        cfg = small_config(K=1)
        real = realize(cfg, seed=8)
        real = dataclasses.replace(real, H_d=np.zeros((cfg.M, 1)))
        sep = separate(real, cfg.sigma2)
        x = PhaseVector.continuous(np.zeros(cfg.N))
        w = w_of_phases(sep, x)
        s2 = cfg.sigma2
        expected = s2 * 1.0 / (s2 + abs(w[0]) ** 2)  # sigma2 * (1/(sigma2 + |w|^2))
        assert separated_metric(MetricKind.MseTot, sep, x) == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("N_y,N_z", [(2, 2), (4, 4)])
    @pytest.mark.parametrize("K", [1, 2, 5])
    def test_matches_direct(self, N_y, N_z, K):
        cfg = small_config(N_y=N_y, N_z=N_z, K=K)
        rng = np.random.default_rng(K)
        for t in range(100):
            real = realize(cfg, seed=99, key=(t,))
            sep = separate(real, cfg.sigma2)
            x = PhaseVector.continuous(rng.uniform(0, 2 * np.pi, cfg.N))
            H = global_channel(real, x)
            for kind in MetricKind:
                d = DIRECT[kind](H, cfg.sigma2)
                assert separated_metric(kind, sep, x) == pytest.approx(d, rel=1e-8)

    def test_determinant_lemma_form(self):
        cfg = small_config(K=3)
        sep = separate(realize(cfg, seed=9), cfg.sigma2)
        x = PhaseVector.continuous(np.linspace(0, 5, cfg.N))
        S = S_of_Q(sep, MetricKind.SumRate, w_of_phases(sep, x))
        matrix_form = -np.linalg.slogdet(S)[1] / np.log(2) - 3 * np.log2(cfg.sigma2)
        assert separated_metric(MetricKind.SumRate, sep, x) == pytest.approx(matrix_form, rel=1e-9)

    def test_batch_matches_single(self):
        cfg = small_config(K=2)
        sep = separate(realize(cfg, seed=10), cfg.sigma2)
        rng = np.random.default_rng(0)
        W = np.stack([w_of_phases(sep, rng.uniform(0, 6, cfg.N)) for _ in range(5)], axis=1)
        for kind in MetricKind:
            batch = metric_from_w(kind, sep, W)
            single = [metric_from_w(kind, sep, W[:, i]) for i in range(5)]
            np.testing.assert_allclose(batch, single, rtol=1e-13)


class TestPhaseVector:
    def test_discrete_grid(self):
        a_r = np.exp(1j * np.array([0.3, -1.0, 2.0]))
        pv = PhaseVector.discrete([0, 1, 3], 2, a_r)
        assert pv.representation == "Discrete(2)"
        gamma = np.mod(pv.phases - np.angle(a_r), 2 * np.pi)
        np.testing.assert_allclose(np.exp(1j * gamma), np.exp(1j * np.pi / 2 * np.array([0, 1, 3])), atol=1e-15)

    def test_grid_bounds(self):
        with pytest.raises(ValueError):
            PhaseVector.discrete([4], 2, np.ones(1))

    @given(st.lists(st.floats(-50, 50), min_size=0, max_size=8))
    def test_continuous_wrapped_unit_modulus(self, phases):
        pv = PhaseVector.continuous(phases)
        assert np.all((pv.phases >= 0) & (pv.phases < 2 * np.pi))
        np.testing.assert_allclose(np.abs(pv.coefficients), 1.0)
        assert len(pv) == len(phases) and pv.representation == "Continuous"
