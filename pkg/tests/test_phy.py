import math

import numpy as np
import pytest

from mimosim.analysis import sinr_av_b
from mimosim.numerics import RngStream, sample_cscg
from mimosim.phy import (
    P_AV,
    CombinedBlock,
    ReceivedBlock,
    SystemConfig,
    combine_retransmissions,
    decompose_block,
    demap_llr,
    effective_noise_var_per_dim,
    map_qpsk,
    sigma_w_to_snr,
    snr_to_sigma_w,
    stack_blocks,
    transmit_block,
)


def loop_decomposition(H, S):
    """Gain and interference terms by explicit sums over antennas."""
    n_r, n_t = H.shape
    F = np.zeros((n_r, n_r), dtype=complex)
    for i in range(n_r):
        for j in range(n_r):
            F[i, j] = sum(H[i, l] * np.conj(H[j, l]) for l in range(n_t))
    gains = np.array([sum(abs(H[i, j]) ** 2 for j in range(n_t)) for i in range(n_r)])
    interference = np.array([sum(F[i, j] * S[j] for j in range(n_r) if j != i) for i in range(n_r)])
    return gains, interference


def random_qpsk(gen, shape):
    return map_qpsk(gen.integers(0, 2, shape + (2,)))


class TestConfig:
    def test_derived_quantities(self):
        cfg = SystemConfig(25, 7, 2)
        assert cfg.n_tot == 32
        assert cfg.p_av == 2.0

    @pytest.mark.parametrize("kwargs", [dict(n_t=0, n_r=1), dict(n_t=1, n_r=0), dict(n_t=1, n_r=1, n_rt=0),
                                        dict(n_t=1, n_r=1, sigma_w_sq=-1.0)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SystemConfig(**kwargs)


class TestQpsk:
    def test_mapping(self):
        assert map_qpsk([0, 0]) == 1 + 1j
        assert map_qpsk([1, 0]) == -1 + 1j
        assert map_qpsk([0, 1]) == 1 - 1j
        assert map_qpsk([1, 1]) == -1 - 1j

    def test_unit_power(self, gen):
        s = random_qpsk(gen, (1000,))
        assert np.allclose(np.abs(s) ** 2, P_AV)

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            map_qpsk([[0, 2]])


class TestTransmit:
    def test_scalar_channel(self):
        cfg = SystemConfig(1, 1)
        s = np.array([1 - 1j])
        rx = transmit_block(s, cfg, RngStream(3))
        h = rx.channel[0, 0]
        assert rx.received[0] == pytest.approx(abs(h) ** 2 * s[0])

    def test_identity_channel_hook(self, gen):
        cfg = SystemConfig(3, 3)
        s = random_qpsk(gen, (3,))
        rx = transmit_block(s, cfg, RngStream(1), channel=np.eye(3))
        assert np.allclose(rx.received, s)

    def test_matches_decomposition_oracle(self, gen):
        cfg = SystemConfig(5, 4, sigma_w_sq=0.3)
        s = random_qpsk(gen, (4,))
        rng = RngStream(9, (0,))
        rx = transmit_block(s, cfg, rng)
        W = sample_cscg((4,), math.sqrt(0.3), rng.child(2))  # the NOISE child, replayed
        gains, interference = loop_decomposition(rx.channel, s)
        assert np.max(np.abs(rx.received - (gains * s + interference + W))) < 1e-10

    def test_decomposition_residual_batched(self, gen):
        cfg = SystemConfig(6, 5)
        S = random_qpsk(gen, (2000, 5))
        rx = transmit_block(S, cfg, gen)
        f_diag, interference = decompose_block(rx.channel, S)
        assert np.max(np.abs(rx.received - f_diag * S - interference)) < 1e-10

    def test_rejects_wrong_block_size(self):
        with pytest.raises(ValueError):
            transmit_block(np.ones(3), SystemConfig(2, 2), RngStream(0))

    def test_reproducible(self, gen):
        cfg = SystemConfig(2, 2, sigma_w_sq=1.0)
        s = random_qpsk(gen, (2,))
        a = transmit_block(s, cfg, RngStream(4, (1, 0)))
        b = transmit_block(s, cfg, RngStream(4, (1, 0)))
        assert np.array_equal(a.received, b.received)


class TestDecompose:
    def test_zero_channel(self):
        f, i = decompose_block(np.zeros((3, 2)), np.ones(3))
        assert not f.any() and not i.any()

    def test_single_receive_antenna(self, gen):
        H = gen.standard_normal((1, 4)) + 1j * gen.standard_normal((1, 4))
        _, i = decompose_block(H, np.array([1 + 1j]))
        assert np.array_equal(i, [0])

    def test_matches_loops(self, gen):
        H = gen.standard_normal((4, 3)) + 1j * gen.standard_normal((4, 3))
        S = random_qpsk(gen, (4,))
        f, i = decompose_block(H, S)
        f_ref, i_ref = loop_decomposition(H, S)
        assert np.allclose(f, f_ref, atol=1e-12)
        assert np.allclose(i, i_ref, atol=1e-12)

    def test_mean_gain(self):
        H = sample_cscg((100_000, 3, 4), math.sqrt(0.5), RngStream(12))
        f, _ = decompose_block(H, np.ones(3))
        assert f[:, 0].mean() == pytest.approx(4.0, rel=0.01)


class TestCombine:
    def test_single_copy_is_identity(self, gen):
        cfg = SystemConfig(3, 2, sigma_w_sq=1.0)
        rx = transmit_block(random_qpsk(gen, (2,)), cfg, gen)
        c = combine_retransmissions([rx])
        assert np.array_equal(c.y, rx.received)
        assert np.array_equal(c.gains, rx.gains)

    def test_noise_free_single_antenna(self, gen):
        cfg = SystemConfig(3, 1, n_rt=2)
        s = np.array([-1 + 1j])
        c = combine_retransmissions([transmit_block(s, cfg, gen) for _ in range(2)])
        assert c.y[0] == pytest.approx(c.gains[0] * s[0], abs=1e-12)

    def test_gains_real_and_positive(self, gen):
        cfg = SystemConfig(1, 3, n_rt=3)
        S = random_qpsk(gen, (5000, 3))
        c = combine_retransmissions([transmit_block(S, cfg, gen) for _ in range(3)])
        assert c.gains.dtype.kind == "f"
        assert np.all(c.gains > 0)

    def test_second_moment_of_combined_gain(self):
        cfg = SystemConfig(4, 1, n_rt=2)
        S = np.ones((100_000, 1), dtype=complex)
        rng = RngStream(13)
        c = combine_retransmissions([transmit_block(S, cfg, rng.child(k)) for k in range(2)])
        assert np.mean(c.gains**2) == pytest.approx(18.0, rel=0.01)

    def test_rejects_inconsistent_blocks(self):
        a = ReceivedBlock(np.zeros(2), np.zeros((2, 1)))
        b = ReceivedBlock(np.zeros(3), np.zeros((3, 1)))
        with pytest.raises(ValueError):
            combine_retransmissions([a, b])

    def test_noise_free_interference_free_hard_decisions(self, gen):
        cfg = SystemConfig(4, 1, n_rt=3)
        bits = gen.integers(0, 2, (3000, 1, 2))
        S = map_qpsk(bits)
        c = combine_retransmissions([transmit_block(S, cfg, gen) for _ in range(3)])
        decided = np.stack([c.y.real < 0, c.y.imag < 0], axis=-1)
        assert np.array_equal(decided, bits == 1)


class TestNoiseVariance:
    def test_single_receive_antenna(self):
        cfg = SystemConfig(7, 1, n_rt=3, sigma_w_sq=0.9)
        assert effective_noise_var_per_dim(cfg) == pytest.approx(0.9 / 3)

    def test_substitution(self):
        cfg = SystemConfig(4, 3, n_rt=2, sigma_w_sq=1.0)
        assert effective_noise_var_per_dim(cfg) == pytest.approx(4.5)

    def test_monte_carlo(self, gen):
        cfg = SystemConfig(4, 3, n_rt=2, sigma_w_sq=1.0)
        S = random_qpsk(gen, (100_000, 3))
        rng = RngStream(14)
        c = combine_retransmissions([transmit_block(S, cfg, rng.child(k)) for k in range(2)])
        u = (c.y - c.gains * S)[:, 0]
        per_dim = 0.5 * (u.real.var() + u.imag.var())
        assert per_dim == pytest.approx(4.5, rel=0.02)


class TestDemap:
    def test_erasure(self):
        llr = demap_llr(CombinedBlock(np.zeros(1, dtype=complex), np.array([2.0])), 1.0)
        assert np.array_equal(llr, [[0.0, 0.0]])

    def test_substitution(self):
        llr = demap_llr(CombinedBlock(np.array([2 * (1 + 1j)]), np.array([2.0])), 1.0)
        assert np.allclose(llr, [[8.0, 8.0]])

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            demap_llr(CombinedBlock(np.zeros(1, dtype=complex), np.ones(1)), 0.0)

    def test_llr_consistency(self, gen):
        # For a matched Gaussian LLR, E[L | bit 0] = var(L) / 2.
        var, F = 0.8, 1.3
        n = 100_000
        y = F * (1 + 1j) + math.sqrt(var) * (gen.standard_normal(n) + 1j * gen.standard_normal(n))
        llr = demap_llr(CombinedBlock(y, np.full(n, F)), var)[:, 0]
        assert llr.mean() == pytest.approx(llr.var() / 2, rel=0.05)


class TestSnr:
    def test_siso_equals_sinr(self):
        cfg = SystemConfig(1, 1, n_rt=4)
        sw = snr_to_sigma_w(3.5, cfg)
        assert 10 * math.log10(sinr_av_b(cfg.with_noise(sw))) == pytest.approx(3.5, abs=1e-12)

    def test_substitution(self):
        # 8 * 0.25 * 1 * 2 * 8 = 32 over 2 * 10^0.35
        cfg = SystemConfig(1, 1, n_rt=4)
        assert snr_to_sigma_w(3.5, cfg) == pytest.approx(32 / (2 * 10**0.35), rel=1e-12)
        assert snr_to_sigma_w(3.5, cfg) == pytest.approx(7.1469, abs=1e-4)

    @pytest.mark.parametrize("sw", [1e-3, 0.37, 5.0, 250.0])
    def test_round_trip(self, sw):
        cfg = SystemConfig(16, 16, n_rt=2)
        assert snr_to_sigma_w(sigma_w_to_snr(sw, cfg), cfg) == pytest.approx(sw, rel=1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            snr_to_sigma_w(float("nan"), SystemConfig(1, 1))


def test_stack_blocks():
    assert stack_blocks(np.arange(12), 4).shape == (3, 4)
    with pytest.raises(ValueError):
        stack_blocks(np.arange(10), 4)
