"""
Physical layer: QPSK mapping, precoded Rayleigh transmission, retransmission
combining and soft demapping.

One channel use carries a block of ``N_r`` QPSK symbols ``S``. The transmitter
sends ``H^H S`` over the ``N_r x N_t`` channel ``H``, so antenna ``i`` receives

    R[i] = F[i, i] S[i] + sum_{j != i} F[i, j] S[j] + W[i],   F = H H^H.

Functions accept a single block (``S`` of shape ``(N_r,)``, ``H`` of shape
``(N_r, N_t)``) or a stack of blocks along leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import CHANNEL, NOISE, RngStream, hermitian_product, row_energy, sample_cscg

P_AV = 2.0


@dataclass(frozen=True)
class SystemConfig:
    n_t: int
    n_r: int
    n_rt: int = 1
    sigma_h_sq: float = 0.5
    sigma_w_sq: float = 0.0

    def __post_init__(self):
        for name in ("n_t", "n_r", "n_rt"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.sigma_h_sq < 0 or self.sigma_w_sq < 0:
            raise ValueError("variances must be nonnegative")

    @property
    def n_tot(self) -> int:
        return self.n_t + self.n_r

    @property
    def p_av(self) -> float:
        return P_AV

    def with_noise(self, sigma_w_sq: float) -> SystemConfig:
        return SystemConfig(self.n_t, self.n_r, self.n_rt, self.sigma_h_sq, sigma_w_sq)


@dataclass(frozen=True)
class ReceivedBlock:
    """Received samples of one transmission together with the channel used."""

    received: np.ndarray  # (..., N_r)
    channel: np.ndarray  # (..., N_r, N_t)

    @property
    def gains(self) -> np.ndarray:
        """Direct-path gains ``F[i, i] = sum_l |H[i, l]|^2``."""
        return row_energy(self.channel)


@dataclass(frozen=True)
class CombinedBlock:
    y: np.ndarray  # (..., N_r) complex
    gains: np.ndarray  # (..., N_r) real


def map_qpsk(bit_pairs) -> np.ndarray:
    """Map ``(i_bit, q_bit)`` pairs to ``±1 ± j``; bit 0 -> +1, bit 1 -> -1."""
    bits = np.asarray(bit_pairs)
    if bits.shape[-1] != 2:
        raise ValueError(f"expected trailing axis of size 2, got shape {bits.shape}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0 or 1")
    rails = 1.0 - 2.0 * bits.astype(np.float64)
    return rails[..., 0] + 1j * rails[..., 1]


def precode_and_propagate(H: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Noise-free ``H H^H S`` without forming the Gram matrix."""
    x = np.einsum("...ji,...j->...i", np.conj(H), S)  # H^H S, length N_t
    return np.einsum("...ij,...j->...i", H, x)


def transmit_block(S, cfg: SystemConfig, rng, channel: np.ndarray | None = None) -> ReceivedBlock:
    """One precoded transmission ``R = H H^H S + W``.

    ``H`` and ``W`` are drawn fresh; ``rng`` may be an :class:`RngStream`, in
    which case channel and noise come from its ``CHANNEL`` and ``NOISE``
    children. ``channel`` overrides the drawn ``H`` (test hook).
    """
    S = np.asarray(S, dtype=np.complex128)
    if S.shape[-1] != cfg.n_r:
        raise ValueError(f"block must hold {cfg.n_r} symbols, got shape {S.shape}")
    batch = S.shape[:-1]
    if isinstance(rng, RngStream):
        h_rng, w_rng = rng.child(CHANNEL), rng.child(NOISE)
    else:
        h_rng = w_rng = rng
    if channel is None:
        H = sample_cscg(batch + (cfg.n_r, cfg.n_t), math.sqrt(cfg.sigma_h_sq), h_rng)
    else:
        H = np.asarray(channel, dtype=np.complex128)
        if H.shape[-2:] != (cfg.n_r, cfg.n_t):
            raise ValueError(f"channel must be {cfg.n_r}x{cfg.n_t}, got shape {H.shape}")
    W = sample_cscg(batch + (cfg.n_r,), math.sqrt(cfg.sigma_w_sq), w_rng)
    return ReceivedBlock(precode_and_propagate(H, S) + W, H)


def decompose_block(H, S) -> tuple[np.ndarray, np.ndarray]:
    """Split ``H H^H S`` into direct gains and inter-antenna interference.

    Returns ``(F_diag, I_vec)`` with ``F_diag[i] = sum_j |H[i, j]|^2`` and
    ``I_vec[i] = sum_{j != i} F[i, j] S[j]``.
    """
    H = np.asarray(H, dtype=np.complex128)
    S = np.asarray(S, dtype=np.complex128)
    G = hermitian_product(H)
    f_diag = np.real(np.diagonal(G, axis1=-2, axis2=-1)).copy()
    interference = np.einsum("...ij,...j->...i", G, S) - f_diag * S
    return f_diag, interference


def combine_retransmissions(blocks: Sequence[ReceivedBlock]) -> CombinedBlock:
    """Average the received copies and their direct-path gains."""
    if len(blocks) == 0:
        raise ValueError("need at least one received block")
    shape = blocks[0].received.shape
    if any(b.received.shape != shape for b in blocks):
        raise ValueError("received blocks disagree in shape")
    y = np.mean([b.received for b in blocks], axis=0)
    gains = np.mean([b.gains for b in blocks], axis=0)
    return CombinedBlock(y, gains)


def disturbance_power(cfg: SystemConfig) -> float:
    """``E|I + W|^2 = 8 sigma_H^4 N_t (N_r - 1) + 2 sigma_W^2`` for one copy."""
    return 8 * cfg.sigma_h_sq**2 * cfg.n_t * (cfg.n_r - 1) + 2 * cfg.sigma_w_sq


def effective_noise_var_per_dim(cfg: SystemConfig) -> float:
    """Per-dimension variance of the combined disturbance, interference
    treated as Gaussian noise."""
    return disturbance_power(cfg) / (2 * cfg.n_rt)


def demap_llr(block: CombinedBlock, noise_var_per_dim: float) -> np.ndarray:
    """Bit LLRs for gain-scaled QPSK in Gaussian noise.

    Returns an array of shape ``(..., N_r, 2)``: ``2 F Re(Y) / var`` and
    ``2 F Im(Y) / var``. Positive values favour bit 0.
    """
    if not noise_var_per_dim > 0:
        raise ValueError(f"noise variance must be positive, got {noise_var_per_dim}")
    scale = 2.0 * block.gains / noise_var_per_dim
    return np.stack([scale * block.y.real, scale * block.y.imag], axis=-1)


def _snr_numerator(cfg: SystemConfig) -> float:
    # E|F S|^2 * 2 N_rt
    return 8 * cfg.sigma_h_sq**2 * cfg.n_t * (cfg.n_t + 1) * 2 * cfg.n_rt


def snr_to_sigma_w(snr_av_b_db: float, cfg: SystemConfig) -> float:
    """Noise variance per dimension for a requested average SNR per bit.

    The SNR per bit is the signal term of the SINR per bit over the noise
    term alone: ``8 sigma_H^4 N_t (N_t+1) 2 N_rt / (2 sigma_W^2)``.
    """
    if not math.isfinite(snr_av_b_db):
        raise ValueError(f"SNR must be finite, got {snr_av_b_db}")
    return _snr_numerator(cfg) / (2 * 10 ** (snr_av_b_db / 10))


def sigma_w_to_snr(sigma_w_sq: float, cfg: SystemConfig) -> float:
    """Inverse of :func:`snr_to_sigma_w`, in dB."""
    if not sigma_w_sq > 0:
        return math.inf
    return 10 * math.log10(_snr_numerator(cfg) / (2 * sigma_w_sq))


def stack_blocks(symbols: np.ndarray, n_r: int) -> np.ndarray:
    """Partition a symbol stream into consecutive blocks of ``n_r``."""
    symbols = np.asarray(symbols)
    if symbols.shape[-1] % n_r:
        raise ValueError(f"stream length {symbols.shape[-1]} not a multiple of {n_r}")
    return symbols.reshape(symbols.shape[:-1] + (-1, n_r))

