"""
Finite-dimensional C*/H*-algebra layer.

An algebra is a direct sum of full matrix blocks M_{n_1} ⊕ ... ⊕ M_{n_k}. The
flavor decides the norm: CompactOperator uses the largest singular value over
all blocks, HilbertSchmidt uses the Frobenius norm of the whole tuple.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConvergenceError, DescriptorMismatchError, NotHermitianError

logger = logging.getLogger(__name__)

CMatrix = NDArray[np.complex128]

JACOBI_OFFDIAG_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = 1e-10


class Flavor(str, Enum):
    COMPACT = "CompactOperator"
    HILBERT_SCHMIDT = "HilbertSchmidt"


def as_cmatrix(data: ArrayLike) -> CMatrix:
    """Convert to a finite complex 2-D array (copy)."""
    arr = np.array(data, dtype=np.complex128)
    if arr.ndim != 2:
        raise DescriptorMismatchError(f"Expected a matrix, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DescriptorMismatchError("Matrix entries must be finite")
    return arr


def rank_one(xi: ArrayLike, eta: ArrayLike) -> CMatrix:
    """Rank-one operator ξ ⊗ η, i.e. ν ↦ (ν, η)ξ; entry (i, j) is ξ_i·conj(η_j)."""
    xi = np.asarray(xi, dtype=np.complex128).reshape(-1)
    eta = np.asarray(eta, dtype=np.complex128).reshape(-1)
    if xi.size == 0 or xi.shape != eta.shape:
        raise DescriptorMismatchError(
            f"rank_one needs two vectors of equal positive length, got {xi.size} and {eta.size}"
        )
    return np.outer(xi, eta.conj())


@dataclass(frozen=True)
class AlgebraDescriptor:
    blocks: tuple[int, ...]
    flavor: Flavor = Flavor.COMPACT

    def __post_init__(self):
        blocks = tuple(int(n) for n in self.blocks)
        if not blocks:
            raise DescriptorMismatchError("An algebra needs at least one block")
        if any(n < 1 for n in blocks):
            raise DescriptorMismatchError(f"Block dimensions must be >= 1, got {blocks}")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "flavor", Flavor(self.flavor))

    @property
    def dimension(self) -> int:
        """Number of matrix units (complex dimension of the algebra)."""
        return sum(n * n for n in self.blocks)

    def same_blocks(self, other: "AlgebraDescriptor") -> bool:
        return self.blocks == other.blocks

    @classmethod
    def matrix(cls, n: int, flavor: Flavor = Flavor.COMPACT) -> "AlgebraDescriptor":
        return cls((n,), flavor)

    @classmethod
    def direct_sum(cls, parts: Sequence["AlgebraDescriptor"]) -> "AlgebraDescriptor":
        blocks = tuple(n for part in parts for n in part.blocks)
        flavors = {part.flavor for part in parts}
        # mixed children fall back to the sup norm
        flavor = flavors.pop() if len(flavors) == 1 else Flavor.COMPACT
        return cls(blocks, flavor)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Immutable block tuple (a_1, ..., a_k) with a_j ∈ M_{n_j}."""

    descriptor: AlgebraDescriptor
    blocks: tuple[CMatrix, ...]

    def __post_init__(self):
        blocks = tuple(as_cmatrix(b) for b in self.blocks)
        if len(blocks) != len(self.descriptor.blocks):
            raise DescriptorMismatchError(
                f"Expected {len(self.descriptor.blocks)} blocks, got {len(blocks)}"
            )
        for j, (blk, n) in enumerate(zip(blocks, self.descriptor.blocks)):
            if blk.shape != (n, n):
                raise DescriptorMismatchError(f"Block {j} must be {n}x{n}, got {blk.shape}")
            blk.flags.writeable = False
        object.__setattr__(self, "blocks", blocks)

    # construction helpers
    @classmethod
    def zero(cls, descriptor: AlgebraDescriptor) -> "AlgebraElement":
        return cls(descriptor, tuple(np.zeros((n, n), dtype=np.complex128) for n in descriptor.blocks))

    @classmethod
    def identity(cls, descriptor: AlgebraDescriptor) -> "AlgebraElement":
        return cls(descriptor, tuple(np.eye(n, dtype=np.complex128) for n in descriptor.blocks))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike, flavor: Flavor = Flavor.COMPACT) -> "AlgebraElement":
        m = as_cmatrix(matrix)
        return cls(AlgebraDescriptor.matrix(m.shape[0], flavor), (m,))

    @classmethod
    def from_coordinates(cls, descriptor: AlgebraDescriptor, coords: ArrayLike) -> "AlgebraElement":
        coords = np.asarray(coords, dtype=np.complex128).reshape(-1)
        if coords.size != descriptor.dimension:
            raise DescriptorMismatchError(
                f"Expected {descriptor.dimension} coordinates, got {coords.size}"
            )
        blocks, offset = [], 0
        for n in descriptor.blocks:
            blocks.append(coords[offset:offset + n * n].reshape(n, n))
            offset += n * n
        return cls(descriptor, tuple(blocks))

    def coordinates(self) -> NDArray[np.complex128]:
        return np.concatenate([b.ravel() for b in self.blocks])

    # arithmetic
    def _check(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement) or not self.descriptor.same_blocks(other.descriptor):
            raise DescriptorMismatchError("Algebra elements belong to different algebras")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.descriptor, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.descriptor, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.descriptor, tuple(-a for a in self.blocks))

    def __mul__(self, scalar: complex) -> "AlgebraElement":
        if isinstance(scalar, AlgebraElement):
            return self @ scalar
        return AlgebraElement(self.descriptor, tuple(complex(scalar) * a for a in self.blocks))

    __rmul__ = __mul__

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check(other)
        return AlgebraElement(self.descriptor, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.descriptor, tuple(a.conj().T for a in self.blocks))

    @property
    def H(self) -> "AlgebraElement":
        return self.adjoint()

    def max_abs_diff(self, other: "AlgebraElement") -> float:
        self._check(other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.blocks, other.blocks))

    def allclose(self, other: "AlgebraElement", atol: float = 1e-12) -> bool:
        return self.max_abs_diff(other) <= atol

    def __repr__(self):
        return f"AlgebraElement(blocks={self.descriptor.blocks}, flavor={self.descriptor.flavor.value})"


def matrix_unit(descriptor: AlgebraDescriptor, block: int, p: int, q: int) -> AlgebraElement:
    blocks = [np.zeros((n, n), dtype=np.complex128) for n in descriptor.blocks]
    blocks[block][p, q] = 1.0
    return AlgebraElement(descriptor, tuple(blocks))


def matrix_units(descriptor: AlgebraDescriptor) -> Iterable[tuple[int, int, int]]:
    """All (block, p, q) index triples in coordinate order."""
    for j, n in enumerate(descriptor.blocks):
        for p in range(n):
            for q in range(n):
                yield j, p, q


@dataclass(frozen=True)
class EigenDecomposition:
    values: NDArray[np.float64]
    vectors: CMatrix

    def reconstruct(self) -> CMatrix:
        return (self.vectors * self.values) @ self.vectors.conj().T


def _off_norm(a: CMatrix) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _rotate(work: CMatrix, vectors: CMatrix, p: int, q: int):
    """Zero work[p, q] with a 2x2 unitary acting on rows/columns p, q."""
    apq = work[p, q]
    r = abs(apq)
    phase = apq / r
    theta = 0.5 * math.atan2(2.0 * r, work[q, q].real - work[p, p].real)
    c, s = math.cos(theta), math.sin(theta)
    # phase removal diag(1, conj(phase)) followed by a real Givens rotation
    j = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=np.complex128)
    idx = [p, q]
    work[:, idx] = work[:, idx] @ j
    work[idx, :] = j.conj().T @ work[idx, :]
    work[p, q] = work[q, p] = 0.0
    work[p, p] = work[p, p].real
    work[q, q] = work[q, q].real
    vectors[:, idx] = vectors[:, idx] @ j


def hermitian_eig(
    a: ArrayLike, tol: float = JACOBI_OFFDIAG_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> EigenDecomposition:
    """Cyclic Jacobi diagonalization of a Hermitian matrix.

    Sweeps over the upper triangle until the off-diagonal Frobenius norm drops
    below tol·‖A‖_F. Eigenvalues come back ascending, eigenvectors as columns.
    """
    a = as_cmatrix(a)
    n, m = a.shape
    if n != m:
        raise DescriptorMismatchError(f"Matrix must be square, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and float(np.max(np.abs(a - a.conj().T))) > HERMITIAN_TOL * scale:
        raise NotHermitianError("hermitian_eig requires a Hermitian matrix")

    work = 0.5 * (a + a.conj().T)
    vectors = np.eye(n, dtype=np.complex128)
    threshold = tol * float(np.linalg.norm(work))
    skip = threshold / max(n, 1)

    sweeps = 0
    while _off_norm(work) > threshold:
        if sweeps >= max_sweeps:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (n={n})")
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(work[p, q]) > skip:
                    _rotate(work, vectors, p, q)
        sweeps += 1

    values = np.real(np.diag(work)).copy()
    order = np.argsort(values, kind="stable")
    logger.debug(f"Jacobi converged after {sweeps} sweeps (n={n})")
    return EigenDecomposition(values=values[order], vectors=vectors[:, order])


def operator_norm(a: AlgebraElement) -> float:
    """Flavor norm: sup of block spectral norms (C*) or Hilbert-Schmidt norm (H*)."""
    if a.descriptor.flavor is Flavor.HILBERT_SCHMIDT:
        return float(np.sqrt(sum(np.sum(np.abs(b) ** 2) for b in a.blocks)))
    largest = 0.0
    for b in a.blocks:
        top = hermitian_eig(b.conj().T @ b).values[-1]
        largest = max(largest, math.sqrt(max(top, 0.0)))
    return largest


def is_positive(a: AlgebraElement, tol: float = POSITIVITY_TOL) -> bool:
    for b in a.blocks:
        if float(np.max(np.abs(b - b.conj().T))) > tol:
            return False
        if hermitian_eig(0.5 * (b + b.conj().T)).values[0] < -tol:
            return False
    return True


def _spectral_parts(h: CMatrix) -> tuple[CMatrix, CMatrix]:
    eig = hermitian_eig(h)
    plus = np.clip(eig.values, 0.0, None)
    minus = np.clip(-eig.values, 0.0, None)
    q = eig.vectors
    return (q * plus) @ q.conj().T, (q * minus) @ q.conj().T


def four_positive_decomposition(
    a: AlgebraElement,
) -> tuple[AlgebraElement, AlgebraElement, AlgebraElement, AlgebraElement]:
    """Split a = b1 − b2 + i(b3 − b4) with every b_k positive."""
    parts: list[list[CMatrix]] = [[], [], [], []]
    for b in a.blocks:
        real_part = 0.5 * (b + b.conj().T)
        imag_part = (b - b.conj().T) / 2j
        b1, b2 = _spectral_parts(real_part)
        b3, b4 = _spectral_parts(imag_part)
        for bucket, piece in zip(parts, (b1, b2, b3, b4)):
            bucket.append(piece)
    b1, b2, b3, b4 = (AlgebraElement(a.descriptor, tuple(bucket)) for bucket in parts)
    return b1, b2, b3, b4


def hs_inner(a: AlgebraElement, b: AlgebraElement) -> complex:
    """Σ_j trace(b_j* a_j)."""
    a._check(b)
    return complex(sum(np.trace(y.conj().T @ x) for x, y in zip(a.blocks, b.blocks)))


def is_projection(a: AlgebraElement, tol: float = 1e-12) -> bool:
    return (a.H).allclose(a, tol) and (a @ a).allclose(a, tol)


def is_minimal_projection(a: AlgebraElement, tol: float = 1e-12) -> bool:
    """Rank-one projection in exactly one block (eAe = Ce)."""
    if not is_projection(a, tol):
        return False
    traces = [np.trace(b).real for b in a.blocks]
    return abs(sum(traces) - 1.0) <= tol and sum(1 for t in traces if abs(t) > tol) == 1


def random_algebra_element(descriptor: AlgebraDescriptor, rng) -> AlgebraElement:
    return AlgebraElement(descriptor, tuple(rng.complex_gaussian((n, n)) for n in descriptor.blocks))
