"""
Complex Gaussian sampling, the Gram product used by the precoder, and
reproducible random streams.

Matrices are plain ``complex128`` numpy arrays. Every function that takes a
matrix also accepts a stack of them (leading batch axes), which is how the
simulator pushes a whole frame of channel uses through in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ComplexMatrix = np.ndarray

# Substream tags, the last element of a stream id.
DATA = 0
CHANNEL = 1
NOISE = 2
SYMBOLS = 3
INTERLEAVER = 4


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed on ``(master_seed, stream_id)``.

    The key goes through :class:`numpy.random.SeedSequence` (with the stream
    id as its spawn key) into a Philox generator, so the draws depend only on
    the key and never on which worker consumes them or in what order.
    """

    master_seed: int
    stream_id: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        ids = tuple(int(i) for i in self.stream_id)
        if any(i < 0 for i in ids):
            raise ValueError(f"stream_id entries must be nonnegative, got {ids}")
        object.__setattr__(self, "stream_id", ids)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=ids)
        object.__setattr__(self, "_gen", np.random.Generator(np.random.Philox(seq)))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, *ids: int) -> RngStream:
        return RngStream(self.master_seed, self.stream_id + tuple(ids))

    def fresh(self) -> RngStream:
        """A new stream with the same key, rewound to the start."""
        return RngStream(self.master_seed, self.stream_id)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def sample_cscg(shape, sigma_per_dim: float, rng) -> np.ndarray:
    """Array of i.i.d. circularly symmetric complex Gaussians.

    Real and imaginary parts are independent, zero mean, with variance
    ``sigma_per_dim**2`` each, so ``E|x|^2 = 2 * sigma_per_dim**2``.
    """
    if sigma_per_dim < 0:
        raise ValueError(f"sigma_per_dim must be nonnegative, got {sigma_per_dim}")
    gen = _as_generator(rng)
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    # Draw unit-variance first so that the same key yields scaled copies of one
    # realization for every sigma.
    z = gen.standard_normal(shape + (2,))
    out = np.empty(shape, dtype=np.complex128)
    out.real = z[..., 0]
    out.imag = z[..., 1]
    out *= sigma_per_dim
    return out


def sample_cscg_matrix(rows: int, cols: int, sigma_per_dim: float, rng) -> ComplexMatrix:
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return sample_cscg((rows, cols), sigma_per_dim, rng)


def hermitian(H: ComplexMatrix) -> ComplexMatrix:
    return np.conj(np.swapaxes(H, -1, -2))


def hermitian_product(H: ComplexMatrix) -> ComplexMatrix:
    """Gram matrix ``G = H H^H`` with ``G[i, j] = sum_l H[i, l] conj(H[j, l])``.

    For an ``N_r x N_t`` channel this is the ``N_r x N_r`` effective channel
    seen after conjugate-transpose precoding. Batched over leading axes. The
    diagonal is returned exactly real.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim < 2 or H.shape[-1] < 1 or H.shape[-2] < 1:
        raise ValueError(f"expected a nonempty matrix, got shape {H.shape}")
    G = H @ hermitian(H)
    G = 0.5 * (G + hermitian(G))
    idx = np.arange(H.shape[-2])
    G[..., idx, idx] = row_energy(H)
    return G


def row_energy(H: ComplexMatrix) -> np.ndarray:
    """``sum_l |H[i, l]|^2`` per row, i.e. the real diagonal of ``H H^H``."""
    return np.sum(H.real**2 + H.imag**2, axis=-1)
