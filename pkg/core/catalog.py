"""
Catalog of maps: representable ones with a known (T0, Φ0), the three
counterexamples and perturbed variants used to test residual sensitivity.
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from utils.random_elements import SeededGenerator, as_generator

from .algebra import AlgebraDescriptor, AlgebraElement, operator_norm, rank_one
from .decomposition import GVector, OAMap, PhiTable, phi_assemble, sesquilinear_S
from .errors import DescriptorMismatchError
from .module import ModuleDescriptor, ModuleElement, ModuleKind, coordinates, inner_product
from .verify import PROPERTY_NAMES

logger = logging.getLogger(__name__)

HARMONIC_N = 64


class MapKind(str, Enum):
    PURE_QUADRATIC = "PureQuadratic"
    ADDITIVE_PLUS_QUADRATIC = "AdditivePlusQuadratic"
    RANK_ONE_CUBIC = "RankOneCubic"
    PAIR_NORM_SQUARE = "PairNormSquare"
    DIAGONAL_CUBIC = "DiagonalCubic"
    PERTURBED = "Perturbed"


class Perturbation(str, Enum):
    QUARTIC = "quartic"  # even: ε|x₀|⁴
    CUBIC = "cubic"  # odd: ε|x₀|²x₀


def realify(x: ModuleElement) -> NDArray[np.float64]:
    c = coordinates(x)
    return np.concatenate([c.real, c.imag])


@dataclass(frozen=True, eq=False)
class GroundTruth:
    phi0: PhiTable
    t0: NDArray[np.complex128] | None = None

    def T(self, x: ModuleElement) -> GVector:
        if self.t0 is None:
            return np.zeros(self.phi0.codomain_dim, dtype=np.complex128)
        return self.t0 @ realify(x)


@dataclass(frozen=True, eq=False)
class MapSpec:
    kind: MapKind
    module: ModuleDescriptor
    phi0: PhiTable | None = None
    t0: NDArray[np.complex128] | None = None
    eta0: NDArray[np.complex128] | None = None
    base: "MapSpec | None" = None
    epsilon: float = 0.0
    perturbation: Perturbation = Perturbation.QUARTIC

    def __post_init__(self):
        kind = MapKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "perturbation", Perturbation(self.perturbation))
        W = self.module
        if kind in (MapKind.PURE_QUADRATIC, MapKind.ADDITIVE_PLUS_QUADRATIC):
            if self.phi0 is None:
                raise DescriptorMismatchError(f"{kind.value} needs a Φ0 table")
            if not self.phi0.algebra.same_blocks(W.algebra):
                raise DescriptorMismatchError(
                    f"Φ0 is defined on blocks {self.phi0.algebra.blocks}, module has {W.algebra.blocks}"
                )
        if kind is MapKind.ADDITIVE_PLUS_QUADRATIC:
            t0 = np.asarray(self.t0, dtype=np.complex128) if self.t0 is not None else None
            expected = (self.phi0.codomain_dim, 2 * W.complex_dim)
            if t0 is None or t0.shape != expected:
                raise DescriptorMismatchError(f"T0 must have shape {expected}")
            object.__setattr__(self, "t0", t0)
        if kind is MapKind.RANK_ONE_CUBIC:
            if W.kind is not ModuleKind.VECTOR:
                raise DescriptorMismatchError("RankOneCubic lives on a VectorModule")
            eta0 = np.zeros(W.n, dtype=np.complex128) if self.eta0 is None else np.asarray(self.eta0, dtype=np.complex128)
            if self.eta0 is None:
                eta0[0] = 1.0
            if eta0.shape != (W.n,):
                raise DescriptorMismatchError(f"η0 must have length {W.n}")
            object.__setattr__(self, "eta0", eta0)
        if kind is MapKind.PAIR_NORM_SQUARE and W.kind is not ModuleKind.PAIR:
            raise DescriptorMismatchError("PairNormSquare lives on a PairModule")
        if kind is MapKind.DIAGONAL_CUBIC and W.kind is not ModuleKind.DIAGONAL:
            raise DescriptorMismatchError("DiagonalCubic lives on a DiagonalModule")
        if kind is MapKind.PERTURBED:
            if self.base is None or self.base.module != W:
                raise DescriptorMismatchError("Perturbed needs a base map on the same module")
            if not np.isfinite(self.epsilon):
                raise DescriptorMismatchError("epsilon must be finite")

    @property
    def codomain_dim(self) -> int:
        if self.kind in (MapKind.PURE_QUADRATIC, MapKind.ADDITIVE_PLUS_QUADRATIC):
            return self.phi0.codomain_dim
        if self.kind is MapKind.RANK_ONE_CUBIC:
            return self.module.n ** 2
        if self.kind is MapKind.PAIR_NORM_SQUARE:
            return 1
        if self.kind is MapKind.DIAGONAL_CUBIC:
            return self.module.n
        return self.base.codomain_dim

    @property
    def ground_truth(self) -> GroundTruth | None:
        if self.kind is MapKind.PURE_QUADRATIC:
            return GroundTruth(self.phi0)
        if self.kind is MapKind.ADDITIVE_PLUS_QUADRATIC:
            return GroundTruth(self.phi0, self.t0)
        if self.kind is MapKind.PAIR_NORM_SQUARE:
            return GroundTruth(PhiTable.trace(self.module.algebra))
        return None

    @property
    def representable(self) -> bool:
        return self.ground_truth is not None

    @property
    def expected_failures(self) -> frozenset[str]:
        """Suite properties allowed to fail for this map."""
        if self.kind in (MapKind.RANK_ONE_CUBIC, MapKind.DIAGONAL_CUBIC):
            # odd maps: B and S vanish, the odd part itself is not additive
            return frozenset({"t_additivity", "t_real_homogeneity"})
        if self.kind is MapKind.PERTURBED:
            return frozenset(PROPERTY_NAMES)
        return frozenset()

    @property
    def name(self) -> str:
        if self.kind is MapKind.PERTURBED:
            return f"{self.base.name}+{self.epsilon:g}·{self.perturbation.value}"
        return self.kind.value


def _perturbation(kind: Perturbation, epsilon: float, d: int):
    def g(x: ModuleElement) -> GVector:
        c0 = coordinates(x)[0]
        out = np.zeros(d, dtype=np.complex128)
        out[0] = epsilon * (abs(c0) ** 4 if kind is Perturbation.QUARTIC else abs(c0) ** 2 * c0)
        return out

    return g


def _evaluator(spec: MapSpec):
    if spec.kind is MapKind.PURE_QUADRATIC:
        phi0 = spec.phi0
        return lambda x: phi0.apply(inner_product(x, x))
    if spec.kind is MapKind.ADDITIVE_PLUS_QUADRATIC:
        phi0, t0 = spec.phi0, spec.t0
        return lambda x: t0 @ realify(x) + phi0.apply(inner_product(x, x))
    if spec.kind is MapKind.RANK_ONE_CUBIC:
        eta0 = spec.eta0
        # f(ξ) = (ξ, η0)·ξ⊗ξ flattened row-major
        return lambda x: np.vdot(eta0, x.payload) * rank_one(x.payload, x.payload).ravel()
    if spec.kind is MapKind.PAIR_NORM_SQUARE:
        return lambda x: np.array([np.sum(np.abs(np.asarray(x.payload)) ** 2)])
    if spec.kind is MapKind.DIAGONAL_CUBIC:
        # x(x*)² entrywise on the diagonal
        return lambda x: np.asarray(x.payload) * np.conj(x.payload) ** 2
    base = _evaluator(spec.base)
    g = _perturbation(spec.perturbation, spec.epsilon, spec.codomain_dim)
    return lambda x: base(x) + g(x)


def instantiate_map(spec: MapSpec) -> OAMap:
    return OAMap(
        _evaluator(spec),
        spec.codomain_dim,
        name=spec.name,
        module=spec.module,
        ground_truth=spec.ground_truth,
    )


def random_phi_table(algebra: AlgebraDescriptor, codomain_dim: int, rng: SeededGenerator) -> PhiTable:
    return PhiTable(algebra, tuple(rng.complex_gaussian((codomain_dim, n, n)) for n in algebra.blocks))


def random_map_spec(
    W: ModuleDescriptor,
    rng: SeededGenerator | int | None = None,
    codomain_dim: int = 2,
    with_additive: bool = True,
) -> MapSpec:
    """Random representable map T0 + Φ0(⟨x, x⟩) with a general R-linear T0."""
    rng = as_generator(rng)
    phi0 = random_phi_table(W.algebra, codomain_dim, rng)
    if not with_additive:
        return MapSpec(MapKind.PURE_QUADRATIC, W, phi0=phi0)
    t0 = rng.complex_gaussian((codomain_dim, 2 * W.complex_dim))
    return MapSpec(MapKind.ADDITIVE_PLUS_QUADRATIC, W, phi0=phi0, t0=t0)


def additivity_gap(f: OAMap, x: ModuleElement, y: ModuleElement) -> float:
    """‖f(x + y) − f(x) − f(y)‖ with no orthogonality assumed."""
    return float(np.linalg.norm(f(x + y) - f(x) - f(y)))


def witness_pair(spec: MapSpec) -> tuple[ModuleElement, ModuleElement] | None:
    """Fixed pair on which a counterexample map visibly fails additivity."""
    W = spec.module
    e = np.eye(W.n, dtype=np.complex128)
    if spec.kind is MapKind.RANK_ONE_CUBIC and W.n >= 2:
        return ModuleElement(W, e[0]), ModuleElement(W, e[1])
    if spec.kind is MapKind.DIAGONAL_CUBIC:
        return ModuleElement(W, e[0]), ModuleElement(W, e[0])
    return None


@dataclass(frozen=True)
class HarmonicRow:
    n: int
    phi_value: float
    operator_norm: float
    partial_sum: float


def harmonic_demo(N: int = HARMONIC_N) -> list[HarmonicRow]:
    """Φ(T_n) for T_n = Σ_{k≤n} E_kk/k on PairModule(N), with Φ recovered from f by the pipeline.

    f(ξ1, ξ2) = ‖ξ1‖² + ‖ξ2‖² is orthogonally additive but Φ(T_n) grows like
    log n while ‖T_n‖ stays 1, so no bounded Φ exists in the limit.
    """
    if N < 1:
        raise DescriptorMismatchError(f"N must be >= 1, got {N}")
    W = ModuleDescriptor.pair(N)
    f = instantiate_map(MapSpec(MapKind.PAIR_NORM_SQUARE, W))
    phi = phi_assemble(sesquilinear_S(f), W, check_spread=False)
    weights = np.zeros(N)
    rows, partial = [], 0.0
    for n in range(1, N + 1):
        weights[n - 1] = 1.0 / n
        partial += 1.0 / n
        t_n = AlgebraElement(W.algebra, (np.diag(weights).astype(np.complex128),))
        rows.append(HarmonicRow(n, float(phi.apply(t_n)[0].real), operator_norm(t_n), partial))
    logger.info(f"Harmonic demo on {W.label}: Φ(T_N) = {rows[-1].phi_value:.6f} with {f.eval_count} evaluations")
    return rows


def harmonic_frame(rows: list[HarmonicRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in rows], columns=["n", "phi_value", "operator_norm", "partial_sum"])
