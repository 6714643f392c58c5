"""
Parallel-concatenated turbo code with a log-MAP BCJR decoder.

Layout of one codeword (``L_d = 2 * L_d1`` bit pairs, each pair later riding
on the in-phase and quadrature rails of one QPSK symbol)::

    pairs[0 : L_d1]        = (data[i],       parity1[i])
    pairs[L_d1 : 2 * L_d1] = (data[perm[i]], parity2[i])

``parity1`` comes from the first RSC encoder on the data and ``parity2`` from
the second on the interleaved data. There is no trellis termination.

LLRs follow ``L = ln P(bit=0) / P(bit=1)`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

from .numerics import INTERLEAVER, RngStream

LLR_CLIP = 50.0
DATA_LENGTH_FLOOR = 1000


def data_length_for(n_r: int) -> int:
    """Smallest integer strictly above 1000 that is a multiple of ``n_r``."""
    if n_r < 1:
        raise ValueError(f"n_r must be positive, got {n_r}")
    return (DATA_LENGTH_FLOOR // n_r + 1) * n_r


def _tap_vector(taps: int, constraint_length: int) -> np.ndarray:
    # Octal convention: the most significant bit is the D^0 coefficient.
    if not 0 < taps < 2**constraint_length:
        raise ValueError(f"taps {taps:o} do not fit constraint length {constraint_length}")
    return np.array(
        [(taps >> (constraint_length - 1 - j)) & 1 for j in range(constraint_length)],
        dtype=np.int64,
    )


@dataclass(frozen=True)
class Trellis:
    """State tables of a rate-1 recursive convolutional parity encoder.

    State bit ``j`` holds the feedback register value ``a[t-1-j]``.
    """

    next_state: np.ndarray  # (num_states, 2)
    parity: np.ndarray  # (num_states, 2)

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @classmethod
    def from_taps(cls, constraint_length: int, feedforward: int, feedback: int) -> Trellis:
        ff = _tap_vector(feedforward, constraint_length)
        fb = _tap_vector(feedback, constraint_length)
        if fb[0] != 1:
            raise ValueError("feedback polynomial must have a nonzero D^0 term")
        memory = constraint_length - 1
        num_states = 1 << memory
        next_state = np.zeros((num_states, 2), dtype=np.int64)
        parity = np.zeros((num_states, 2), dtype=np.int64)
        for s in range(num_states):
            past = [(s >> j) & 1 for j in range(memory)]  # a[t-1], a[t-2], ...
            for u in (0, 1):
                a = u
                for j in range(1, constraint_length):
                    a ^= fb[j] & past[j - 1]
                p = ff[0] & a
                for j in range(1, constraint_length):
                    p ^= ff[j] & past[j - 1]
                regs = [a] + past[:-1]
                next_state[s, u] = sum(bit << j for j, bit in enumerate(regs))
                parity[s, u] = p
        next_state.setflags(write=False)
        parity.setflags(write=False)
        return cls(next_state, parity)


@dataclass(frozen=True)
class TurboSpec:
    """Turbo code parameters.

    The defaults give the 4-state constituent code ``[1, (1+D^2)/(1+D+D^2)]``
    (feedforward 5, feedback 7 in octal).
    """

    data_length: int
    constraint_length: int = 3
    feedforward_taps: int = 0o5
    feedback_taps: int = 0o7
    num_iterations: int = 8

    def __post_init__(self):
        if self.data_length < 1:
            raise ValueError(f"data_length must be positive, got {self.data_length}")
        if self.constraint_length < 2:
            raise ValueError("constraint_length must be at least 2")
        if self.num_iterations < 1:
            raise ValueError("num_iterations must be at least 1")
        # Validates the taps eagerly.
        self.trellis

    @classmethod
    def for_receive_antennas(cls, n_r: int, **kwargs) -> TurboSpec:
        return cls(data_length=data_length_for(n_r), **kwargs)

    @property
    def coded_length(self) -> int:
        """Number of bit pairs (QPSK symbols) per codeword, ``2 * L_d1``."""
        return 2 * self.data_length

    @cached_property
    def trellis(self) -> Trellis:
        return Trellis.from_taps(self.constraint_length, self.feedforward_taps, self.feedback_taps)


@dataclass(frozen=True)
class InterleaverPerm:
    length: int
    seed: int
    permutation: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=np.int64)
        if perm.shape != (self.length,) or not np.array_equal(np.sort(perm), np.arange(self.length)):
            raise ValueError("permutation must be a bijection on range(length)")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    @classmethod
    def random(cls, length: int, seed: int) -> InterleaverPerm:
        """Uniformly random permutation, deterministic in ``(seed, length)``."""
        gen = RngStream(seed, (INTERLEAVER, length)).generator
        return cls(length, seed, gen.permutation(length))

    def interleave(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.permutation]

    def deinterleave(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        out = np.empty_like(x)
        out[self.permutation] = x
        return out


@numba.njit(cache=True)
def _rsc_kernel(data, next_state, parity):
    out = np.empty(data.shape[0], dtype=np.int8)
    s = 0
    for t in range(data.shape[0]):
        u = data[t]
        out[t] = parity[s, u]
        s = next_state[s, u]
    return out


def _check_bits(data, length: int, what: str = "data") -> np.ndarray:
    data = np.asarray(data)
    if data.shape != (length,):
        raise ValueError(f"{what} must have length {length}, got shape {data.shape}")
    if data.size and (data.min() < 0 or data.max() > 1):
        raise ValueError(f"{what} must contain only 0/1")
    return data.astype(np.int64)


def rsc_encode(data, spec: TurboSpec) -> np.ndarray:
    """Parity stream of one constituent encoder started in the zero state."""
    bits = _check_bits(data, spec.data_length)
    tr = spec.trellis
    return _rsc_kernel(bits, tr.next_state, tr.parity)


def turbo_encode(data, spec: TurboSpec, perm: InterleaverPerm) -> np.ndarray:
    """Encode ``L_d1`` data bits into an ``(L_d, 2)`` array of bit pairs."""
    if perm.length != spec.data_length:
        raise ValueError(f"interleaver length {perm.length} != data length {spec.data_length}")
    bits = _check_bits(data, spec.data_length)
    permuted = perm.interleave(bits)
    pairs = np.empty((spec.coded_length, 2), dtype=np.int8)
    n = spec.data_length
    pairs[:n, 0] = bits
    pairs[:n, 1] = rsc_encode(bits, spec)
    pairs[n:, 0] = permuted
    pairs[n:, 1] = rsc_encode(permuted, spec)
    return pairs


@numba.njit(cache=True, inline="always")
def _maxstar(a, b):
    if a < b:
        a, b = b, a
    if b == -np.inf:
        return a
    return a + np.log1p(np.exp(b - a))


@numba.njit(cache=True)
def _bcjr_kernel(sys_llr, par_llr, apriori, next_state, parity):
    n = sys_llr.shape[0]
    S = next_state.shape[0]
    alpha = np.full((n + 1, S), -np.inf)
    beta = np.zeros((n + 1, S))
    alpha[0, 0] = 0.0

    for t in range(n):
        lu = 0.5 * (sys_llr[t] + apriori[t])
        lp = 0.5 * par_llr[t]
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            for u in range(2):
                g = (1 - 2 * u) * lu + (1 - 2 * parity[s, u]) * lp
                ns = next_state[s, u]
                alpha[t + 1, ns] = _maxstar(alpha[t + 1, ns], a + g)
        m = alpha[t + 1, 0]
        for s in range(1, S):
            if alpha[t + 1, s] > m:
                m = alpha[t + 1, s]
        for s in range(S):
            alpha[t + 1, s] -= m

    for t in range(n - 1, -1, -1):
        lu = 0.5 * (sys_llr[t] + apriori[t])
        lp = 0.5 * par_llr[t]
        m = -np.inf
        for s in range(S):
            acc = -np.inf
            for u in range(2):
                g = (1 - 2 * u) * lu + (1 - 2 * parity[s, u]) * lp
                acc = _maxstar(acc, g + beta[t + 1, next_state[s, u]])
            beta[t, s] = acc
            if acc > m:
                m = acc
        for s in range(S):
            beta[t, s] -= m

    extrinsic = np.empty(n)
    for t in range(n):
        lp = 0.5 * par_llr[t]
        num = -np.inf
        den = -np.inf
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            m0 = a + (1 - 2 * parity[s, 0]) * lp + beta[t + 1, next_state[s, 0]]
            m1 = a + (1 - 2 * parity[s, 1]) * lp + beta[t + 1, next_state[s, 1]]
            num = _maxstar(num, m0)
            den = _maxstar(den, m1)
        extrinsic[t] = num - den
    return extrinsic


def _clip(x) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=np.float64), -LLR_CLIP, LLR_CLIP)


def bcjr_decode(sys_llr, par_llr, apriori, spec: TurboSpec) -> tuple[np.ndarray, np.ndarray]:
    """Exact log-MAP forward-backward pass over one constituent trellis.

    Returns ``(extrinsic, aposteriori)`` with
    ``aposteriori = sys_llr + apriori + extrinsic``. The forward recursion
    starts in state 0; the backward recursion starts uniform.
    """
    n = spec.data_length
    arrays = [_clip(v) for v in (sys_llr, par_llr, apriori)]
    for name, v in zip(("sys_llr", "par_llr", "apriori"), arrays):
        if v.shape != (n,):
            raise ValueError(f"{name} must have length {n}, got shape {v.shape}")
    sys_llr, par_llr, apriori = arrays
    tr = spec.trellis
    extrinsic = _bcjr_kernel(sys_llr, par_llr, apriori, tr.next_state, tr.parity)
    return extrinsic, sys_llr + apriori + extrinsic


def turbo_decode(llrs, spec: TurboSpec, perm: InterleaverPerm, *, soft: bool = False) -> np.ndarray:
    """Iterative decoding of an ``(L_d, 2)`` array of channel LLRs.

    Each constituent decoder also receives, as a priori input, the systematic
    observation the other decoder holds, so both copies of every data bit
    contribute to the final decision. Hard decisions come from decoder 2's
    a posteriori LLRs, de-interleaved. With ``soft=True`` the de-interleaved
    LLRs are returned instead.
    """
    n = spec.data_length
    llrs = _clip(llrs)
    if llrs.shape != (2 * n, 2):
        raise ValueError(f"llrs must have shape {(2 * n, 2)}, got {llrs.shape}")
    if perm.length != n:
        raise ValueError(f"interleaver length {perm.length} != data length {n}")
    tr = spec.trellis
    p = perm.permutation
    sys1, par1 = llrs[:n, 0].copy(), llrs[:n, 1].copy()
    sys2, par2 = llrs[n:, 0].copy(), llrs[n:, 1].copy()
    sys2_deint = perm.deinterleave(sys2)
    sys1_int = sys1[p]

    to_dec1 = np.zeros(n)
    app2 = sys2.copy()
    for _ in range(spec.num_iterations):
        apr1 = _clip(to_dec1 + sys2_deint)
        ext1 = _bcjr_kernel(sys1, par1, apr1, tr.next_state, tr.parity)
        apr2 = _clip(ext1[p] + sys1_int)
        ext2 = _bcjr_kernel(sys2, par2, apr2, tr.next_state, tr.parity)
        app2 = sys2 + apr2 + ext2
        to_dec1 = perm.deinterleave(ext2)

    soft_out = perm.deinterleave(app2)
    if soft:
        return soft_out
    return (soft_out < 0).astype(np.int8)
