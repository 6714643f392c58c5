"""
End-to-end frame simulation, BER sweeps and the moment validation suite.

A frame is: random data bits -> turbo encode -> QPSK -> blocks of ``N_r``
symbols -> ``N_rt`` independent precoded transmissions per block -> average
-> soft demap -> turbo decode. Every frame draws from its own random streams
keyed on the frame index, so the result of a sweep does not depend on how
frames are spread over worker processes.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .numerics import CHANNEL, DATA, NOISE, SYMBOLS, RngStream, hermitian_product, row_energy, sample_cscg
from .phy import (
    ReceivedBlock,
    SystemConfig,
    combine_retransmissions,
    decompose_block,
    demap_llr,
    disturbance_power,
    effective_noise_var_per_dim,
    map_qpsk,
    precode_and_propagate,
    snr_to_sigma_w,
    stack_blocks,
)
from .turbo import InterleaverPerm, TurboSpec, turbo_decode, turbo_encode

logger = logging.getLogger(__name__)

# Frames per scheduling unit. Early stopping is checked at chunk boundaries,
# so it is part of the result's definition and must not depend on workers.
CHUNK_FRAMES = 25
# Moment-suite streams live above any realistic frame index.
MOMENT_STREAM_BASE = 2**40
# Floor for the demapper variance when the channel is noise- and interference-free.
MIN_NOISE_VAR = 1e-12


@dataclass(frozen=True)
class SimulationPlan:
    cfg: SystemConfig
    snr_points_db: tuple[float, ...]
    frames: int = 1000
    master_seed: int = 0
    workers: int = 1
    turbo: TurboSpec | None = None
    early_stop_errors: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "snr_points_db", tuple(float(s) for s in self.snr_points_db))
        if self.turbo is None:
            object.__setattr__(self, "turbo", TurboSpec.for_receive_antennas(self.cfg.n_r))
        if self.frames < 1:
            raise ValueError(f"frames must be positive, got {self.frames}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        if self.turbo.coded_length % self.cfg.n_r:
            raise ValueError(
                f"coded length {self.turbo.coded_length} is not a multiple of N_r={self.cfg.n_r}"
            )

    @property
    def data_length(self) -> int:
        return self.turbo.data_length

    @property
    def blocks_per_frame(self) -> int:
        return self.turbo.coded_length // self.cfg.n_r

    def interleaver(self) -> InterleaverPerm:
        return InterleaverPerm.random(self.data_length, self.master_seed)


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    bits_sent: int
    bit_errors: int
    frames: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent


@dataclass(frozen=True)
class FrameResult:
    bit_errors: int
    diagnostics: dict = field(default_factory=dict, compare=False)


def run_frame(
    plan: SimulationPlan,
    frame_idx: int,
    sigma_w_sq: float,
    perm: InterleaverPerm | None = None,
) -> FrameResult:
    cfg = plan.cfg.with_noise(sigma_w_sq)
    spec = plan.turbo
    perm = plan.interleaver() if perm is None else perm
    root = RngStream(plan.master_seed, (frame_idx,))

    data = root.child(DATA).generator.integers(0, 2, spec.data_length, dtype=np.int8)
    pairs = turbo_encode(data, spec, perm)
    blocks = stack_blocks(map_qpsk(pairs), cfg.n_r)  # (B, N_r)

    sigma_h = math.sqrt(cfg.sigma_h_sq)
    sigma_w = math.sqrt(cfg.sigma_w_sq)
    received = []
    for k in range(cfg.n_rt):
        H = sample_cscg(blocks.shape + (cfg.n_t,), sigma_h, root.child(k, CHANNEL))
        W = sample_cscg(blocks.shape, sigma_w, root.child(k, NOISE))
        received.append(ReceivedBlock(precode_and_propagate(H, blocks) + W, H))
    combined = combine_retransmissions(received)

    noise_var = max(effective_noise_var_per_dim(cfg), MIN_NOISE_VAR)
    llrs = demap_llr(combined, noise_var).reshape(-1, 2)
    decoded = turbo_decode(llrs, spec, perm)
    errors = int(np.count_nonzero(decoded != data))

    raw = int(np.count_nonzero((llrs[: spec.data_length, 0] < 0) != data))
    return FrameResult(
        errors,
        {
            "blocks": blocks.shape[0],
            "symbols_sent": blocks.size * cfg.n_rt,
            "raw_errors": raw,
            "noise_var_per_dim": noise_var,
        },
    )


def _run_frames(plan: SimulationPlan, sigma_w_sq: float, frame_indices: Sequence[int]) -> np.ndarray:
    perm = plan.interleaver()
    return np.array(
        [run_frame(plan, i, sigma_w_sq, perm).bit_errors for i in frame_indices],
        dtype=np.int64,
    )


def _chunks(frames: int) -> list[range]:
    return [range(s, min(s + CHUNK_FRAMES, frames)) for s in range(0, frames, CHUNK_FRAMES)]


def _sweep_point(plan: SimulationPlan, snr_db: float, pool: ProcessPoolExecutor | None) -> BerRecord:
    start = time.perf_counter()
    sigma_w_sq = snr_to_sigma_w(snr_db, plan.cfg)
    chunks = _chunks(plan.frames)
    wave = max(plan.workers, 1) if plan.early_stop_errors else len(chunks)

    frames = errors = 0
    for w in range(0, len(chunks), wave):
        batch = chunks[w : w + wave]
        if pool is None:
            results = [_run_frames(plan, sigma_w_sq, c) for c in batch]
        else:
            results = list(pool.map(_run_frames, [plan] * len(batch), [sigma_w_sq] * len(batch), batch))
        stop = False
        # Reduce in frame order so early stopping lands on the same chunk
        # regardless of wave size.
        for chunk, errs in zip(batch, results):
            frames += len(chunk)
            errors += int(errs.sum())
            if plan.early_stop_errors and errors >= plan.early_stop_errors:
                stop = True
                break
        if stop:
            break

    record = BerRecord(
        snr_db=snr_db,
        bits_sent=frames * plan.data_length,
        bit_errors=errors,
        frames=frames,
        wall_time=time.perf_counter() - start,
    )
    logger.info(
        "snr=%.2f dB frames=%d errors=%d ber=%.3e (%.1fs)",
        snr_db, frames, errors, record.ber, record.wall_time,
    )
    return record


def run_sweep(plan: SimulationPlan) -> list[BerRecord]:
    """BER at every SNR point of ``plan``.

    Frame ``i`` uses the same data, channels and unit-variance noise draws at
    every SNR point; only the noise scale changes.
    """
    if not plan.snr_points_db:
        raise ValueError("plan has no SNR points")
    if plan.workers == 1:
        return [_sweep_point(plan, s, None) for s in plan.snr_points_db]
    with ProcessPoolExecutor(max_workers=plan.workers) as pool:
        return [_sweep_point(plan, s, pool) for s in plan.snr_points_db]


_WILSON_Z = NormalDist().inv_cdf(0.975)


def ber_confidence(record: BerRecord, z: float = _WILSON_Z) -> tuple[float, float]:
    """Wilson score interval (95% by default) on the bit error probability."""
    n = record.bits_sent
    if n <= 0:
        raise ValueError("record has no bits")
    p = record.bit_errors / n
    z2 = z * z
    centre = (p + z2 / (2 * n)) / (1 + z2 / n)
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    lo = 0.0 if record.bit_errors == 0 else max(0.0, centre - half)
    hi = 1.0 if record.bit_errors == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class MomentCheck:
    name: str
    analytic: float
    estimate: float
    stderr: float
    tolerance_se: float = 4.0

    @property
    def z_score(self) -> float:
        if self.stderr == 0:
            return 0.0 if math.isclose(self.estimate, self.analytic, abs_tol=1e-12) else math.inf
        return (self.estimate - self.analytic) / self.stderr

    @property
    def passed(self) -> bool:
        return abs(self.z_score) <= self.tolerance_se


@dataclass(frozen=True)
class MomentReport:
    cfg: SystemConfig
    draws: int
    checks: tuple[MomentCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> MomentCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def analytic_moments(cfg: SystemConfig) -> dict[str, float]:
    s4 = cfg.sigma_h_sq**2
    nt, nr, nrt = cfg.n_t, cfg.n_r, cfg.n_rt
    out = {
        "E[F_kii]": 2 * cfg.sigma_h_sq * nt,
        "E[F_kii^2]": 4 * s4 * nt * (nt + 1),
        "E[|F_kij|^2]": 4 * s4 * nt,
        "E[|I_ki|^2]": 8 * s4 * nt * (nr - 1),
        "E[|I_ki+W_ki|^2]": disturbance_power(cfg),
        "E[F_i^2]": 4 * s4 * nt * (nt * nrt + 1) / nrt,
        "E[|U_i|^2]": disturbance_power(cfg) / nrt,
    }
    if nr == 1:
        del out["E[|F_kij|^2]"]
    return out


def validate_moments(
    cfg: SystemConfig,
    num_draws: int,
    seed: int = 0,
    analytic_cfg: SystemConfig | None = None,
    batch: int = 5000,
    tolerance_se: float = 4.0,
) -> MomentReport:
    """Compare Monte Carlo moments of the gain, interference and combined
    disturbance with their closed forms.

    Each draw is one block of random QPSK symbols sent ``N_rt`` times; the
    per-draw statistic is averaged over receive antennas, and standard errors
    are taken across draws. ``analytic_cfg`` replaces ``cfg`` on the closed-form
    side only (negative-control hook).
    """
    if num_draws < 10_000:
        raise ValueError(f"need at least 10^4 draws, got {num_draws}")
    nt, nr, nrt = cfg.n_t, cfg.n_r, cfg.n_rt
    sigma_h = math.sqrt(cfg.sigma_h_sq)
    sigma_w = math.sqrt(cfg.sigma_w_sq)
    off_diag = ~np.eye(nr, dtype=bool)

    samples: dict[str, list[np.ndarray]] = {}

    def add(name, values):
        samples.setdefault(name, []).append(values)

    for b, start in enumerate(range(0, num_draws, batch)):
        n = min(batch, num_draws - start)
        stream = RngStream(seed, (MOMENT_STREAM_BASE + b,))
        bits = stream.child(SYMBOLS).generator.integers(0, 2, (n, nr, 2))
        S = map_qpsk(bits)  # (n, N_r)
        H = sample_cscg((n, nrt, nr, nt), sigma_h, stream.child(CHANNEL))
        W = sample_cscg((n, nrt, nr), sigma_w, stream.child(NOISE))

        f_diag, interference = decompose_block(H, S[:, None, :])  # (n, N_rt, N_r)
        disturbance = interference + W

        add("E[F_kii]", f_diag[:, 0].mean(axis=-1))
        add("E[F_kii^2]", (f_diag[:, 0] ** 2).mean(axis=-1))
        if nr > 1:
            G0 = hermitian_product(H[:, 0])
            add("E[|F_kij|^2]", (np.abs(G0[:, off_diag]) ** 2).mean(axis=-1))
        add("E[|I_ki|^2]", (np.abs(interference[:, 0]) ** 2).mean(axis=-1))
        add("E[|I_ki+W_ki|^2]", (np.abs(disturbance[:, 0]) ** 2).mean(axis=-1))
        gains = row_energy(H).mean(axis=1)  # combined F_i
        add("E[F_i^2]", (gains**2).mean(axis=-1))
        add("E[|U_i|^2]", (np.abs(disturbance.mean(axis=1)) ** 2).mean(axis=-1))

    closed = analytic_moments(analytic_cfg or cfg)
    checks = []
    for name, value in closed.items():
        x = np.concatenate(samples[name])
        checks.append(
            MomentCheck(
                name=name,
                analytic=value,
                estimate=float(x.mean()),
                stderr=float(x.std(ddof=1) / math.sqrt(x.size)),
                tolerance_se=tolerance_se,
            )
        )
    return MomentReport(cfg, num_draws, tuple(checks))
