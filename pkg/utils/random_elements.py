"""
Seeded random generation for matrices, unitaries and scalars.

Every random draw in the toolkit goes through a SeededGenerator so that a run
is reproducible from a single integer seed. Parallel tasks get independent
children from spawn() rather than sharing one generator.
"""

import logging

import numpy as np
from numpy.typing import NDArray

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42


class SeededGenerator:
    """Thin wrapper around numpy's PCG64 generator with complex helpers."""

    def __init__(self, seed: int | np.random.SeedSequence = DEFAULT_SEED):
        if isinstance(seed, np.random.SeedSequence):
            self._sequence = seed
        else:
            self._sequence = np.random.SeedSequence(int(seed))
        self._rng = np.random.default_rng(self._sequence)

    def spawn(self, count: int) -> list["SeededGenerator"]:
        return [SeededGenerator(child) for child in self._sequence.spawn(count)]

    def complex_gaussian(self, shape) -> NDArray[np.complex128]:
        """I.i.d. standard complex Gaussian entries (E|z|² = 1)."""
        re = self._rng.standard_normal(shape)
        im = self._rng.standard_normal(shape)
        return (re + 1j * im) / np.sqrt(2.0)

    def unit_vector(self, n: int) -> NDArray[np.complex128]:
        v = self.complex_gaussian(n)
        return v / np.linalg.norm(v)

    def unitary(self, n: int) -> NDArray[np.complex128]:
        """Haar-distributed unitary via QR with the phase correction on R's diagonal."""
        q, r = np.linalg.qr(self.complex_gaussian((n, n)))
        d = np.diag(r)
        phases = d / np.where(np.abs(d) > 0, np.abs(d), 1.0)
        return q * phases

    def real_scalar(self, low: float = -2.0, high: float = 2.0) -> float:
        return float(self._rng.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        return int(self._rng.integers(low, high))


def as_generator(rng: "SeededGenerator | int | None") -> SeededGenerator:
    if isinstance(rng, SeededGenerator):
        return rng
    return SeededGenerator(DEFAULT_SEED if rng is None else rng)
