"""
Concrete Hilbert modules over finite matrix algebras.

Every single-block kind is realized as a space of row matrices over M_n:

    AlgebraAsModule(n)  n×n matrices
    Rectangular(m, n)   m×n matrices
    VectorModule(n)     a vector ξ seen as the 1×n row ξᵀ
    PairModule(n)       (ξ1, ξ2) seen as the 2×n matrix with rows ξ1ᵀ, ξ2ᵀ

with ⟨x, y⟩ = x*y and x·a = xa. For VectorModule this reads ⟨ξ, η⟩ = (η⊗ξ)ᵀ
and ξ·a = aᵀξ, which is the only way to get ⟨ξ, η·a⟩ = ⟨ξ, η⟩a.
DiagonalModule(n) is n copies of C over the diagonal algebra, and DirectSum
stacks single-block children, child j paired with algebra block j.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from utils.random_elements import SeededGenerator

from .algebra import (
    AlgebraDescriptor,
    AlgebraElement,
    Flavor,
    matrix_unit,
    operator_norm,
    rank_one,
)
from .errors import DescriptorMismatchError, HypothesisViolation, InvariantBreach

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-12
UNITARY_TOL = 1e-10


class ModuleKind(str, Enum):
    ALGEBRA = "AlgebraAsModule"
    RECTANGULAR = "Rectangular"
    VECTOR = "VectorModule"
    PAIR = "PairModule"
    DIAGONAL = "DiagonalModule"
    DIRECT_SUM = "DirectSum"


ROW_KINDS = frozenset({ModuleKind.ALGEBRA, ModuleKind.RECTANGULAR, ModuleKind.VECTOR, ModuleKind.PAIR})


@dataclass(frozen=True)
class ModuleDescriptor:
    kind: ModuleKind
    n: int = 0
    m: int = 0
    flavor: Flavor = Flavor.COMPACT
    children: tuple["ModuleDescriptor", ...] = ()

    def __post_init__(self):
        kind = ModuleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "flavor", Flavor(self.flavor))
        object.__setattr__(self, "children", tuple(self.children))
        if kind is ModuleKind.DIRECT_SUM:
            if len(self.children) < 2:
                raise DescriptorMismatchError(f"DirectSum needs at least two children, got {len(self.children)}")
            for child in self.children:
                if child.kind not in ROW_KINDS:
                    raise DescriptorMismatchError(
                        f"DirectSum children must be single-block modules, got {child.kind.value}"
                    )
            return
        if int(self.n) < 1:
            raise DescriptorMismatchError(f"{kind.value} needs n >= 1, got {self.n}")
        if kind is ModuleKind.RECTANGULAR and int(self.m) < 1:
            raise DescriptorMismatchError(f"Rectangular needs m >= 1, got {self.m}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m) if kind is ModuleKind.RECTANGULAR else 0)

    @classmethod
    def algebra_as_module(cls, n: int, flavor: Flavor = Flavor.COMPACT) -> "ModuleDescriptor":
        return cls(ModuleKind.ALGEBRA, n=n, flavor=flavor)

    @classmethod
    def rectangular(cls, m: int, n: int, flavor: Flavor = Flavor.COMPACT) -> "ModuleDescriptor":
        return cls(ModuleKind.RECTANGULAR, n=n, m=m, flavor=flavor)

    @classmethod
    def vector(cls, n: int, flavor: Flavor = Flavor.COMPACT) -> "ModuleDescriptor":
        return cls(ModuleKind.VECTOR, n=n, flavor=flavor)

    @classmethod
    def pair(cls, n: int, flavor: Flavor = Flavor.COMPACT) -> "ModuleDescriptor":
        return cls(ModuleKind.PAIR, n=n, flavor=flavor)

    @classmethod
    def diagonal(cls, n: int, flavor: Flavor = Flavor.COMPACT) -> "ModuleDescriptor":
        return cls(ModuleKind.DIAGONAL, n=n, flavor=flavor)

    @classmethod
    def direct_sum(cls, children: Sequence["ModuleDescriptor"]) -> "ModuleDescriptor":
        return cls(ModuleKind.DIRECT_SUM, children=tuple(children))

    @property
    def is_row_kind(self) -> bool:
        return self.kind in ROW_KINDS

    @property
    def rows(self) -> int:
        """Row count of the payload matrix for single-block kinds."""
        return {
            ModuleKind.ALGEBRA: self.n,
            ModuleKind.RECTANGULAR: self.m,
            ModuleKind.VECTOR: 1,
            ModuleKind.PAIR: 2,
        }[self.kind]

    @property
    def payload_shape(self) -> tuple[int, ...]:
        if self.kind is ModuleKind.VECTOR or self.kind is ModuleKind.DIAGONAL:
            return (self.n,)
        return (self.rows, self.n)

    @property
    def algebra(self) -> AlgebraDescriptor:
        if self.kind is ModuleKind.DIRECT_SUM:
            return AlgebraDescriptor.direct_sum([c.algebra for c in self.children])
        if self.kind is ModuleKind.DIAGONAL:
            return AlgebraDescriptor((1,) * self.n, self.flavor)
        return AlgebraDescriptor((self.n,), self.flavor)

    @property
    def complex_dim(self) -> int:
        if self.kind is ModuleKind.DIRECT_SUM:
            return sum(c.complex_dim for c in self.children)
        return int(np.prod(self.payload_shape))

    @property
    def block_dims(self) -> tuple[int, ...]:
        """dim of each block submodule over its algebra block."""
        if self.kind is ModuleKind.DIRECT_SUM:
            return tuple(c.rows for c in self.children)
        if self.kind is ModuleKind.DIAGONAL:
            return (1,) * self.n
        return (self.rows,)

    @property
    def label(self) -> str:
        if self.kind is ModuleKind.DIRECT_SUM:
            return "DirectSum(" + ", ".join(c.label for c in self.children) + ")"
        if self.kind is ModuleKind.RECTANGULAR:
            return f"Rectangular({self.m},{self.n})"
        return f"{self.kind.value}({self.n})"


def dim_A(W: ModuleDescriptor) -> int:
    """Orthogonal dimension: the length of an orthonormal basis."""
    return sum(W.block_dims)


@dataclass(frozen=True, eq=False)
class ModuleElement:
    descriptor: ModuleDescriptor
    payload: object

    def __post_init__(self):
        W = self.descriptor
        if W.kind is ModuleKind.DIRECT_SUM:
            parts = tuple(self.payload)
            if len(parts) != len(W.children) or any(
                not isinstance(p, ModuleElement) or p.descriptor != c for p, c in zip(parts, W.children)
            ):
                raise DescriptorMismatchError(f"DirectSum payload does not match {W.label}")
            object.__setattr__(self, "payload", parts)
            return
        arr = np.array(self.payload, dtype=np.complex128)
        if arr.shape != W.payload_shape:
            raise DescriptorMismatchError(
                f"{W.label} expects payload of shape {W.payload_shape}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DescriptorMismatchError("Module element entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "payload", arr)

    def _combine(self, other: "ModuleElement", op: Callable) -> "ModuleElement":
        if not isinstance(other, ModuleElement) or other.descriptor != self.descriptor:
            raise DescriptorMismatchError("Module elements belong to different modules")
        if self.descriptor.kind is ModuleKind.DIRECT_SUM:
            return ModuleElement(
                self.descriptor, tuple(a._combine(b, op) for a, b in zip(self.payload, other.payload))
            )
        return ModuleElement(self.descriptor, op(self.payload, other.payload))

    def __add__(self, other: "ModuleElement") -> "ModuleElement":
        return self._combine(other, np.add)

    def __sub__(self, other: "ModuleElement") -> "ModuleElement":
        return self._combine(other, np.subtract)

    def __mul__(self, scalar: complex) -> "ModuleElement":
        scalar = complex(scalar)
        if self.descriptor.kind is ModuleKind.DIRECT_SUM:
            return ModuleElement(self.descriptor, tuple(p * scalar for p in self.payload))
        return ModuleElement(self.descriptor, scalar * self.payload)

    __rmul__ = __mul__

    def __neg__(self) -> "ModuleElement":
        return self * -1.0

    def __repr__(self):
        return f"ModuleElement({self.descriptor.label})"


def zero_element(W: ModuleDescriptor) -> ModuleElement:
    if W.kind is ModuleKind.DIRECT_SUM:
        return ModuleElement(W, tuple(zero_element(c) for c in W.children))
    return ModuleElement(W, np.zeros(W.payload_shape, dtype=np.complex128))


def coordinates(x: ModuleElement) -> NDArray[np.complex128]:
    if x.descriptor.kind is ModuleKind.DIRECT_SUM:
        return np.concatenate([coordinates(p) for p in x.payload])
    return np.asarray(x.payload).ravel()


def from_coordinates(W: ModuleDescriptor, coords: ArrayLike) -> ModuleElement:
    coords = np.asarray(coords, dtype=np.complex128).reshape(-1)
    if coords.size != W.complex_dim:
        raise DescriptorMismatchError(f"{W.label} has {W.complex_dim} coordinates, got {coords.size}")
    if W.kind is ModuleKind.DIRECT_SUM:
        parts, offset = [], 0
        for child in W.children:
            parts.append(from_coordinates(child, coords[offset:offset + child.complex_dim]))
            offset += child.complex_dim
        return ModuleElement(W, tuple(parts))
    return ModuleElement(W, coords.reshape(W.payload_shape))


def unit_directions(W: ModuleDescriptor) -> list[tuple[ModuleElement, ModuleElement]]:
    """Pairs (E_u, iE_u) over the complex coordinates; together they span W over R."""
    eye = np.eye(W.complex_dim, dtype=np.complex128)
    return [(from_coordinates(W, eye[u]), from_coordinates(W, 1j * eye[u])) for u in range(W.complex_dim)]


def embed_block(W: ModuleDescriptor, j: int, xj: ModuleElement) -> ModuleElement:
    if W.kind is not ModuleKind.DIRECT_SUM:
        raise DescriptorMismatchError("embed_block needs a DirectSum module")
    parts = [zero_element(c) for c in W.children]
    if xj.descriptor != W.children[j]:
        raise DescriptorMismatchError(f"Element does not belong to block {j} of {W.label}")
    parts[j] = xj
    return ModuleElement(W, tuple(parts))


def _rows(x: ModuleElement) -> NDArray[np.complex128]:
    return np.asarray(x.payload).reshape(x.descriptor.rows, x.descriptor.n)


def _from_rows(W: ModuleDescriptor, rows: NDArray[np.complex128]) -> ModuleElement:
    return ModuleElement(W, rows.reshape(W.payload_shape))


def inner_product(x: ModuleElement, y: ModuleElement) -> AlgebraElement:
    """Algebra-valued inner product ⟨x, y⟩, conjugate-linear in x."""
    W = x.descriptor
    if y.descriptor != W:
        raise DescriptorMismatchError(f"Inner product of {W.label} with {y.descriptor.label}")
    if W.kind is ModuleKind.DIRECT_SUM:
        blocks = tuple(inner_product(a, b).blocks[0] for a, b in zip(x.payload, y.payload))
        return AlgebraElement(W.algebra, blocks)
    if W.kind is ModuleKind.DIAGONAL:
        vals = np.conj(x.payload) * y.payload
        return AlgebraElement(W.algebra, tuple(v.reshape(1, 1) for v in vals))
    return AlgebraElement(W.algebra, (_rows(x).conj().T @ _rows(y),))


def module_action(x: ModuleElement, a: AlgebraElement) -> ModuleElement:
    """Right action x·a."""
    W = x.descriptor
    if not W.algebra.same_blocks(a.descriptor):
        raise DescriptorMismatchError(
            f"{W.label} is a module over blocks {W.algebra.blocks}, got {a.descriptor.blocks}"
        )
    if W.kind is ModuleKind.DIRECT_SUM:
        parts = tuple(
            module_action(p, AlgebraElement(c.algebra, (blk,)))
            for p, c, blk in zip(x.payload, W.children, a.blocks)
        )
        return ModuleElement(W, parts)
    if W.kind is ModuleKind.DIAGONAL:
        scalars = np.array([blk[0, 0] for blk in a.blocks])
        return ModuleElement(W, x.payload * scalars)
    return _from_rows(W, _rows(x) @ a.blocks[0])


def module_norm(x: ModuleElement) -> float:
    return math.sqrt(operator_norm(inner_product(x, x)))


def is_orthogonal(x: ModuleElement, y: ModuleElement, tol: float = ORTHOGONALITY_TOL) -> bool:
    return operator_norm(inner_product(x, y)) <= tol


@dataclass(frozen=True)
class OrthonormalBasis:
    module: ModuleDescriptor
    elements: tuple[ModuleElement, ...]
    projections: tuple[AlgebraElement, ...]
    frame: NDArray[np.complex128] | None = field(default=None, repr=False)
    pivot: int | None = None

    def __len__(self) -> int:
        return len(self.elements)

    def is_uniform(self, tol: float = ORTHOGONALITY_TOL) -> bool:
        """All ⟨w_i, w_i⟩ equal one projection."""
        first = self.projections[0]
        return all(p.allclose(first, tol) for p in self.projections[1:])


def _check_frame(frame: ArrayLike | None, n: int) -> NDArray[np.complex128]:
    if frame is None:
        return np.eye(n, dtype=np.complex128)
    frame = np.asarray(frame, dtype=np.complex128)
    if frame.shape != (n, n):
        raise DescriptorMismatchError(f"Frame must be {n}x{n}, got {frame.shape}")
    if float(np.max(np.abs(frame.conj().T @ frame - np.eye(n)))) > UNITARY_TOL:
        raise HypothesisViolation("Frame columns must be orthonormal")
    return frame


def _row_basis(W: ModuleDescriptor, pivot: int, frame: ArrayLike | None) -> OrthonormalBasis:
    frame = _check_frame(frame, W.n)
    if not 0 <= pivot < W.n:
        raise DescriptorMismatchError(f"Pivot {pivot} out of range for n={W.n}")
    xi = frame[:, pivot]
    elements = []
    for i in range(W.rows):
        rows = np.zeros((W.rows, W.n), dtype=np.complex128)
        rows[i] = xi.conj()
        elements.append(_from_rows(W, rows))
    e = AlgebraElement(W.algebra, (rank_one(xi, xi),))
    return OrthonormalBasis(W, tuple(elements), (e,) * W.rows, frame=frame, pivot=pivot)


def _embed_basis(W: ModuleDescriptor, j: int, basis: OrthonormalBasis) -> OrthonormalBasis:
    elements = tuple(embed_block(W, j, g) for g in basis.elements)
    projections = []
    for p in basis.projections:
        blocks = [np.zeros((n, n), dtype=np.complex128) for n in W.algebra.blocks]
        blocks[j] = np.array(p.blocks[0])
        projections.append(AlgebraElement(W.algebra, tuple(blocks)))
    return OrthonormalBasis(W, elements, tuple(projections), frame=basis.frame, pivot=basis.pivot)


def block_bases(W: ModuleDescriptor, pivot: int = 0) -> list[OrthonormalBasis]:
    """One uniform basis per algebra block, embedded in W."""
    if W.is_row_kind:
        return [_row_basis(W, pivot, None)]
    if W.kind is ModuleKind.DIAGONAL:
        out = []
        for k in range(W.n):
            payload = np.zeros(W.n, dtype=np.complex128)
            payload[k] = 1.0
            out.append(OrthonormalBasis(W, (ModuleElement(W, payload),), (matrix_unit(W.algebra, k, 0, 0),)))
        return out
    return [_embed_basis(W, j, _row_basis(c, min(pivot, c.n - 1), None)) for j, c in enumerate(W.children)]


def build_orthonormal_basis(
    W: ModuleDescriptor, pivot: int = 0, frame: ArrayLike | None = None
) -> OrthonormalBasis:
    """Orthonormal basis with ⟨g_i, g_i⟩ = ξ_pivot⊗ξ_pivot, ξ the columns of frame.

    For single-block kinds g_i is the row matrix whose row i is ξ_pivotᴴ; with
    the identity frame this is the matrix unit E_{i,pivot}.
    """
    if W.is_row_kind:
        return _row_basis(W, pivot, frame)
    if frame is not None:
        raise DescriptorMismatchError("A frame is only supported on single-block modules")
    parts = block_bases(W, pivot)
    elements = tuple(g for b in parts for g in b.elements)
    projections = tuple(p for b in parts for p in b.projections)
    return OrthonormalBasis(W, elements, projections, pivot=pivot)


def rebase_basis(
    basis: OrthonormalBasis, j0: int, frame: ArrayLike | None = None
) -> OrthonormalBasis:
    """Rebase a uniform basis so that ⟨w_i, w_i⟩ = ξ_i⊗ξ_i.

    w_i = g_i·(ξ_j0 ⊗ ξ_i). Needs dim_A W ≤ n so that every basis element gets
    its own frame vector.
    """
    W = basis.module
    if not W.is_row_kind:
        raise HypothesisViolation(f"Rebase is defined on single-block modules, got {W.label}")
    if frame is None:
        frame = basis.frame
    frame = _check_frame(frame, W.n)
    if len(basis) > W.n:
        raise HypothesisViolation(f"dim_A W = {len(basis)} exceeds dim H = {W.n}")
    xi0 = frame[:, j0]
    target = rank_one(xi0, xi0)
    for p in basis.projections:
        if float(np.max(np.abs(p.blocks[0] - target))) > ORTHOGONALITY_TOL:
            raise HypothesisViolation(f"Basis projections are not ξ_{j0}⊗ξ_{j0}")

    elements, projections = [], []
    for i, g in enumerate(basis.elements):
        xi = frame[:, i]
        elements.append(module_action(g, AlgebraElement(W.algebra, (rank_one(xi0, xi),))))
        projections.append(AlgebraElement(W.algebra, (rank_one(xi, xi),)))
    logger.debug(f"Rebased {len(elements)} basis elements of {W.label} from pivot {j0}")
    return OrthonormalBasis(W, tuple(elements), tuple(projections), frame=frame)


def basis_expand(
    x: ModuleElement, basis: OrthonormalBasis
) -> tuple[list[AlgebraElement], ModuleElement]:
    coefficients = [inner_product(w, x) for w in basis.elements]
    reconstruction = zero_element(x.descriptor)
    for w, c in zip(basis.elements, coefficients):
        reconstruction = reconstruction + module_action(w, c)
    return coefficients, reconstruction


def module_series(basis: OrthonormalBasis, a: AlgebraElement) -> ModuleElement:
    """Σ_i w_i·a; ⟨s, s⟩ = a*a when the projections sum to the identity."""
    total = basis.projections[0]
    for p in basis.projections[1:]:
        total = total + p
    if not total.allclose(AlgebraElement.identity(total.descriptor), 1e-10):
        logger.warning(
            f"Basis projections of {basis.module.label} do not sum to the identity; "
            f"⟨s,s⟩ will be a*Pa rather than a*a"
        )
    s = zero_element(basis.module)
    for w in basis.elements:
        s = s + module_action(w, a)
    return s


def random_element(W: ModuleDescriptor, rng: SeededGenerator, normalize: bool = False) -> ModuleElement:
    if W.kind is ModuleKind.DIRECT_SUM:
        x = ModuleElement(W, tuple(random_element(c, rng) for c in W.children))
    else:
        x = ModuleElement(W, rng.complex_gaussian(W.payload_shape))
    if normalize:
        norm = module_norm(x)
        if norm > 0:
            x = x * (1.0 / norm)
    return x


def supports_orthogonal_pair(W: ModuleDescriptor) -> bool:
    if W.kind is ModuleKind.DIRECT_SUM:
        return True
    if W.kind is ModuleKind.DIAGONAL:
        return W.n >= 2
    return W.rows >= 2


def _row_pair(W: ModuleDescriptor, rng: SeededGenerator) -> tuple[ModuleElement, ModuleElement]:
    m, n = W.rows, W.n
    if W.kind is ModuleKind.PAIR:
        zero = np.zeros(n, dtype=np.complex128)
        x = np.vstack([rng.complex_gaussian(n), zero])
        y = np.vstack([zero, rng.complex_gaussian(n)])
        return _from_rows(W, x), _from_rows(W, y)
    k = (m + 1) // 2
    q, _ = np.linalg.qr(rng.complex_gaussian((m, k)))
    proj = q @ q.conj().T
    x = proj @ rng.complex_gaussian((m, n))
    y = (np.eye(m) - proj) @ rng.complex_gaussian((m, n))
    return _from_rows(W, x), _from_rows(W, y)


def _diagonal_pair(W: ModuleDescriptor, rng: SeededGenerator) -> tuple[ModuleElement, ModuleElement]:
    h = (W.n + 1) // 2
    x = np.zeros(W.n, dtype=np.complex128)
    y = np.zeros(W.n, dtype=np.complex128)
    x[:h] = rng.complex_gaussian(h)
    y[h:] = rng.complex_gaussian(W.n - h)
    return ModuleElement(W, x), ModuleElement(W, y)


def random_orthogonal_pair(W: ModuleDescriptor, rng: SeededGenerator) -> tuple[ModuleElement, ModuleElement]:
    """Nonzero x, y with ⟨x, y⟩ = 0 built by complement projection or disjoint support."""
    if not supports_orthogonal_pair(W):
        raise HypothesisViolation(f"{W.label} has no nontrivial orthogonal pairs")

    if W.kind is ModuleKind.DIAGONAL:
        x, y = _diagonal_pair(W, rng)
    elif W.is_row_kind:
        x, y = _row_pair(W, rng)
    else:
        xs, ys = [], []
        for j, child in enumerate(W.children):
            if supports_orthogonal_pair(child):
                xj, yj = _row_pair(child, rng)
            else:
                # children without inner pairs alternate between x and y
                zero = zero_element(child)
                xj, yj = (random_element(child, rng), zero) if j % 2 == 0 else (zero, random_element(child, rng))
            xs.append(xj)
            ys.append(yj)
        x, y = ModuleElement(W, tuple(xs)), ModuleElement(W, tuple(ys))

    nx, ny = module_norm(x), module_norm(y)
    if nx == 0.0 or ny == 0.0:
        raise InvariantBreach(f"Degenerate orthogonal pair drawn on {W.label}")
    gap = operator_norm(inner_product(x, y))
    if gap > ORTHOGONALITY_TOL * max(1.0, nx * ny):
        raise InvariantBreach(f"Constructed pair on {W.label} is not orthogonal (|<x,y>| = {gap:.3e})")
    return x, y
