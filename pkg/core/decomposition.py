"""
Decomposition of orthogonally additive maps f : W → C^d.

A continuous map with f(x + y) = f(x) + f(y) whenever ⟨x, y⟩ = 0 splits as
f(x) = T(x) + Φ(⟨x, x⟩) with T additive and Φ linear on the algebra. The
pipeline only evaluates f:

    odd/even split      T = ½(f(x) − f(−x)),  F = ½(f(x) + f(−x))
    polarization        B from four evaluations, S from eight
    local functionals   Φ_i(a) = S(w_k·a, w_k) over a uniform basis
    assembly            Φ(a) = Σ_i Φ_i(e_i·a) on every matrix unit
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from utils.random_elements import SeededGenerator, as_generator

from .algebra import AlgebraDescriptor, AlgebraElement, matrix_unit, operator_norm
from .errors import DescriptorMismatchError, HypothesisViolation, InvariantBreach
from .module import (
    ModuleDescriptor,
    ModuleElement,
    ModuleKind,
    OrthonormalBasis,
    block_bases,
    coordinates,
    embed_block,
    inner_product,
    module_action,
    random_element,
    unit_directions,
    zero_element,
)

logger = logging.getLogger(__name__)

GVector = NDArray[np.complex128]

RESIDUAL_WARN = 1e-6
SPREAD_WARN = 1e-9
RELATION_TOL = 1e-12
UNITARY_TOL = 1e-10


class OAMap:
    """Black-box evaluator f : W → C^d with an exact evaluation counter."""

    def __init__(
        self,
        evaluate: Callable[[ModuleElement], Any],
        codomain_dim: int,
        name: str = "f",
        module: ModuleDescriptor | None = None,
        ground_truth: Any = None,
    ):
        if codomain_dim < 1:
            raise DescriptorMismatchError(f"codomain_dim must be >= 1, got {codomain_dim}")
        self._evaluate = evaluate
        self.codomain_dim = int(codomain_dim)
        self.name = name
        self.module = module
        self.ground_truth = ground_truth
        self._count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self) -> int:
        return self._count

    def __call__(self, x: ModuleElement) -> GVector:
        with self._lock:
            self._count += 1
        value = np.asarray(self._evaluate(x), dtype=np.complex128).reshape(-1)
        if value.size != self.codomain_dim:
            raise DescriptorMismatchError(
                f"{self.name} returned {value.size} components, expected {self.codomain_dim}"
            )
        if not np.all(np.isfinite(value)):
            raise InvariantBreach(f"{self.name} returned non-finite values")
        return value

    def __repr__(self):
        return f"OAMap({self.name}, d={self.codomain_dim}, evals={self._count})"


def odd_part(f: OAMap) -> OAMap:
    return OAMap(lambda x: 0.5 * (f(x) - f(-x)), f.codomain_dim, name=f"odd({f.name})", module=f.module)


def even_part(f: OAMap) -> OAMap:
    return OAMap(lambda x: 0.5 * (f(x) + f(-x)), f.codomain_dim, name=f"even({f.name})", module=f.module)


# (coefficient, sign on x, sign on y); the sum is divided by 8
_B_TERMS = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
_S_TERMS = (
    (1, 1, 1), (1j, 1, 1j), (-1, 1, -1), (-1j, 1, -1j),
    (1, -1, -1), (1j, -1, -1j), (-1, -1, 1), (-1j, -1, 1j),
)


@dataclass(frozen=True)
class PolarizedForm:
    """Two-argument map built from evaluations of f at x·sx + y·sy."""

    f: OAMap
    terms: tuple[tuple[complex, complex, complex], ...]
    name: str

    def __call__(self, x: ModuleElement, y: ModuleElement) -> GVector:
        total = np.zeros(self.f.codomain_dim, dtype=np.complex128)
        for coef, sx, sy in self.terms:
            total += coef * self.f(x * sx + y * sy)
        return total / 8.0


def polarize_B(f: OAMap) -> PolarizedForm:
    """B(x, y) = ⅛(f(x+y) + f(−x−y) − f(x−y) − f(−x+y))."""
    return PolarizedForm(f, _B_TERMS, f"B[{f.name}]")


def sesquilinear_S(f: OAMap) -> PolarizedForm:
    """Eight-term closed form of S(x, y) = B(x, y) + iB(x, iy)."""
    return PolarizedForm(f, _S_TERMS, f"S[{f.name}]")


@dataclass(frozen=True)
class PhiTable:
    """Linear map Φ : A → C^d stored as Φ(E_pq) for every matrix unit."""

    algebra: AlgebraDescriptor
    values: tuple[NDArray[np.complex128], ...]

    def __post_init__(self):
        values = tuple(np.array(v, dtype=np.complex128) for v in self.values)
        if len(values) != len(self.algebra.blocks):
            raise DescriptorMismatchError("PhiTable needs one value array per algebra block")
        dims = {v.shape[0] for v in values}
        if len(dims) != 1:
            raise DescriptorMismatchError("PhiTable blocks disagree on the codomain dimension")
        for v, n in zip(values, self.algebra.blocks):
            if v.shape[1:] != (n, n):
                raise DescriptorMismatchError(f"PhiTable block must be (d, {n}, {n}), got {v.shape}")
            v.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def codomain_dim(self) -> int:
        return self.values[0].shape[0]

    @classmethod
    def zeros(cls, algebra: AlgebraDescriptor, codomain_dim: int) -> "PhiTable":
        return cls(algebra, tuple(np.zeros((codomain_dim, n, n), dtype=np.complex128) for n in algebra.blocks))

    @classmethod
    def trace(cls, algebra: AlgebraDescriptor) -> "PhiTable":
        return cls(algebra, tuple(np.eye(n, dtype=np.complex128)[None, :, :] for n in algebra.blocks))

    @classmethod
    def concatenate(cls, algebra: AlgebraDescriptor, tables: Sequence["PhiTable"]) -> "PhiTable":
        return cls(algebra, tuple(v for t in tables for v in t.values))

    def apply(self, a: AlgebraElement) -> GVector:
        if not self.algebra.same_blocks(a.descriptor):
            raise DescriptorMismatchError("PhiTable applied to an element of another algebra")
        return sum(np.einsum("dpq,pq->d", v, blk) for v, blk in zip(self.values, a.blocks))

    def entry(self, block: int, p: int, q: int) -> GVector:
        return self.values[block][:, p, q]

    def max_abs_diff(self, other: "PhiTable") -> float:
        if not self.algebra.same_blocks(other.algebra) or self.codomain_dim != other.codomain_dim:
            raise DescriptorMismatchError("PhiTables have different shapes")
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.values, other.values))

    def to_frame(self) -> pd.DataFrame:
        records = []
        for j, v in enumerate(self.values):
            d, n, _ = v.shape
            for p in range(n):
                for q in range(n):
                    for c in range(d):
                        z = v[c, p, q]
                        records.append({"block": j, "p": p, "q": q, "component": c, "re": z.real, "im": z.imag})
        return pd.DataFrame.from_records(records, columns=["block", "p", "q", "component", "re", "im"])


def phi_local(S: PolarizedForm, basis: OrthonormalBasis, k: int, a: AlgebraElement) -> GVector:
    """Φ_i(a) = S(w_k·a, w_k) for a basis whose ⟨w_i, w_i⟩ all equal e_i."""
    if len(basis) < 2:
        raise HypothesisViolation(f"phi_local needs dim_A W >= 2, basis has {len(basis)} element(s)")
    if not basis.is_uniform():
        raise HypothesisViolation("phi_local needs a basis with one common projection")
    if not 0 <= k < len(basis):
        raise DescriptorMismatchError(f"Basis index {k} out of range")
    w = basis.elements[k]
    return S(module_action(w, a), w)


def _require_dim(W: ModuleDescriptor):
    if min(W.block_dims) < 2:
        raise HypothesisViolation(
            f"{W.label} has block dimensions {W.block_dims}; the decomposition needs dim_A >= 2 per block"
        )


def _assemble(S: PolarizedForm, W: ModuleDescriptor, check_spread: bool) -> tuple[PhiTable, float]:
    _require_dim(W)
    algebra = W.algebra
    d = S.f.codomain_dim
    values = [np.zeros((d, n, n), dtype=np.complex128) for n in algebra.blocks]
    spread = 0.0
    for j, n in enumerate(algebra.blocks):
        for p in range(n):
            # e_i·E_pq vanishes unless i = p, so Φ(E_pq) = Φ_p(E_pq)
            basis = block_bases(W, pivot=p)[j]
            for q in range(n):
                unit = matrix_unit(algebra, j, p, q)
                value = phi_local(S, basis, 0, unit)
                if check_spread:
                    other = phi_local(S, basis, 1, unit)
                    spread = max(spread, float(np.linalg.norm(value - other)))
                values[j][:, p, q] = value
    if spread > SPREAD_WARN:
        logger.warning(f"phi_local depends on the basis index (spread {spread:.3e}); f may not be o.a.")
    logger.info(f"Assembled Φ on {W.label}: {algebra.dimension} matrix units, d={d}")
    return PhiTable(algebra, tuple(values)), spread


def phi_assemble(S: PolarizedForm, W: ModuleDescriptor, check_spread: bool = True) -> PhiTable:
    table, _ = _assemble(S, W, check_spread)
    return table


@dataclass(frozen=True)
class TTable:
    """Real-linear additive part: T(E_u) and T(iE_u) for every coordinate u."""

    module: ModuleDescriptor
    real: NDArray[np.complex128]
    imag: NDArray[np.complex128]

    def __call__(self, x: ModuleElement) -> GVector:
        c = coordinates(x)
        return self.real @ c.real + self.imag @ c.imag

    def realified(self) -> NDArray[np.complex128]:
        """d×2N matrix acting on [Re x; Im x]."""
        return np.hstack([self.real, self.imag])

    @classmethod
    def concatenate(cls, W: ModuleDescriptor, tables: Sequence["TTable"]) -> "TTable":
        return cls(W, np.hstack([t.real for t in tables]), np.hstack([t.imag for t in tables]))


def tabulate_T(f: OAMap, W: ModuleDescriptor) -> TTable:
    odd = odd_part(f)
    N = W.complex_dim
    real = np.zeros((f.codomain_dim, N), dtype=np.complex128)
    imag = np.zeros((f.codomain_dim, N), dtype=np.complex128)
    for u, (e, ie) in enumerate(unit_directions(W)):
        real[:, u] = odd(e)
        imag[:, u] = odd(ie)
    return TTable(W, real, imag)


@dataclass(frozen=True)
class ResidualStats:
    count: int
    max: float | None = None
    mean: float | None = None
    p50: float | None = None
    p95: float | None = None

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "ResidualStats":
        s = pd.Series(list(values), dtype=float)
        if s.empty:
            return cls(count=0)
        q = s.quantile([0.5, 0.95])
        return cls(
            count=int(s.size),
            max=float(s.max()),
            mean=float(s.mean()),
            p50=float(q.loc[0.5]),
            p95=float(q.loc[0.95]),
        )

    def to_dict(self) -> dict:
        return {"count": self.count, "max": self.max, "mean": self.mean, "p50": self.p50, "p95": self.p95}


@dataclass
class Decomposition:
    module: ModuleDescriptor
    f: OAMap = field(repr=False)
    phi: PhiTable
    t_table: TTable
    residual_stats: ResidualStats
    odd_gap_stats: ResidualStats
    k_spread: float
    eval_budget_used: int
    samples: int

    def quadratic(self, x: ModuleElement) -> GVector:
        return self.phi.apply(inner_product(x, x))

    def T(self, x: ModuleElement) -> GVector:
        """f(x) − Φ(⟨x, x⟩)."""
        return self.f(x) - self.quadratic(x)

    def linear_T(self, x: ModuleElement) -> GVector:
        return self.t_table(x)

    def predict(self, x: ModuleElement) -> GVector:
        return self.linear_T(x) + self.quadratic(x)

    def summary(self) -> dict:
        return {
            "module": self.module.label,
            "codomain_dim": self.phi.codomain_dim,
            "residual": self.residual_stats.to_dict(),
            "odd_gap": self.odd_gap_stats.to_dict(),
            "k_spread": self.k_spread,
            "eval_budget_used": self.eval_budget_used,
            "samples": self.samples,
        }


def _relative(diff: GVector, fx: GVector) -> float:
    return float(np.linalg.norm(diff) / (1.0 + np.linalg.norm(fx)))


def _sample_stats(
    f: OAMap, phi: PhiTable, t_table: TTable, xs: Sequence[ModuleElement]
) -> tuple[ResidualStats, ResidualStats]:
    residuals, gaps = [], []
    for x in xs:
        fx, fmx = f(x), f(-x)
        quad = phi.apply(inner_product(x, x))
        residuals.append(_relative(fx - t_table(x) - quad, fx))
        # (f − Φ(⟨x,x⟩)) − odd part = even part − Φ(⟨x,x⟩)
        gaps.append(_relative(0.5 * (fx + fmx) - quad, fx))
    return ResidualStats.from_values(residuals), ResidualStats.from_values(gaps)


def _finish(
    f: OAMap, W: ModuleDescriptor, phi: PhiTable, t_table: TTable, spread: float,
    samples: int, rng: SeededGenerator, start: int,
) -> Decomposition:
    xs = [random_element(W, rng) for _ in range(samples)]
    residual_stats, gap_stats = _sample_stats(f, phi, t_table, xs)
    used = f.eval_count - start
    if residual_stats.max is not None and residual_stats.max > RESIDUAL_WARN:
        logger.warning(
            f"Residual {residual_stats.max:.3e} on {W.label} exceeds {RESIDUAL_WARN:g}; "
            f"{f.name} is probably not orthogonally additive"
        )
    logger.info(f"Decomposed {f.name} on {W.label} with {used} evaluations")
    return Decomposition(
        module=W, f=f, phi=phi, t_table=t_table, residual_stats=residual_stats,
        odd_gap_stats=gap_stats, k_spread=spread, eval_budget_used=used, samples=samples,
    )


def decompose(
    f: OAMap,
    W: ModuleDescriptor,
    samples: int,
    rng: SeededGenerator | int | None = None,
    check_spread: bool = True,
) -> Decomposition:
    """Recover T and Φ with f(x) = T(x) + Φ(⟨x, x⟩) from evaluations of f."""
    if W.kind is ModuleKind.DIRECT_SUM:
        return blockwise_decompose(f, W, samples, rng, check_spread)
    _require_dim(W)
    rng = as_generator(rng)
    start = f.eval_count
    S = sesquilinear_S(f)
    phi, spread = _assemble(S, W, check_spread)
    t_table = tabulate_T(f, W)
    return _finish(f, W, phi, t_table, spread, samples, rng, start)


def restrict_map(f: OAMap, W: ModuleDescriptor, j: int, offset: GVector | None = None) -> OAMap:
    """f_j(x_j) = f(embed(x_j)) − f(0) on block j of a direct sum."""
    child = W.children[j]
    base = np.zeros(f.codomain_dim, dtype=np.complex128) if offset is None else offset
    return OAMap(lambda xj: f(embed_block(W, j, xj)) - base, f.codomain_dim, name=f"{f.name}|{j}", module=child)


def blockwise_decompose(
    f: OAMap,
    W: ModuleDescriptor,
    samples: int,
    rng: SeededGenerator | int | None = None,
    check_spread: bool = True,
) -> Decomposition:
    """Decompose each block restriction and assemble Φ(a) = Σ_j Φ_j(a_j)."""
    if W.kind is not ModuleKind.DIRECT_SUM:
        raise DescriptorMismatchError(f"blockwise_decompose needs a DirectSum, got {W.label}")
    _require_dim(W)
    rng = as_generator(rng)
    start = f.eval_count
    f0 = f(zero_element(W))
    parts = []
    for j, child in enumerate(W.children):
        fj = restrict_map(f, W, j, f0)
        parts.append(decompose(fj, child, samples=0, rng=rng, check_spread=check_spread))
    phi = PhiTable.concatenate(W.algebra, [d.phi for d in parts])
    t_table = TTable.concatenate(W, [d.t_table for d in parts])
    spread = max(d.k_spread for d in parts)
    return _finish(f, W, phi, t_table, spread, samples, rng, start)


def residual(f: OAMap, d: Decomposition, xs: Sequence[ModuleElement]) -> ResidualStats:
    """Relative residual ‖f(x) − T(x) − Φ(⟨x,x⟩)‖/(1 + ‖f(x)‖) with the tabulated T."""
    values = []
    for x in xs:
        fx = f(x)
        values.append(_relative(fx - d.predict(x), fx))
    return ResidualStats.from_values(values)


@dataclass(frozen=True)
class RowBlockMorphism:
    """V = Rectangular(m, n) as the top rows of Rectangular(2m, n); φ(A) = [0; UA]."""

    source: ModuleDescriptor
    target: ModuleDescriptor
    unitary: NDArray[np.complex128] = field(repr=False)

    def embed(self, x: ModuleElement) -> ModuleElement:
        m = self.source.rows
        rows = np.zeros((2 * m, self.source.n), dtype=np.complex128)
        rows[:m] = np.asarray(x.payload)
        return ModuleElement(self.target, rows)

    def __call__(self, x: ModuleElement) -> ModuleElement:
        m = self.source.rows
        rows = np.zeros((2 * m, self.source.n), dtype=np.complex128)
        rows[m:] = self.unitary @ np.asarray(x.payload)
        return ModuleElement(self.target, rows)


@dataclass(frozen=True)
class RelationReport:
    trials: int
    tolerance: float
    morphism: float
    orthogonality: float
    twisted_orthogonality: dict[str, float]

    @property
    def passed(self) -> bool:
        worst = max([self.morphism, self.orthogonality, *self.twisted_orthogonality.values()])
        return worst <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "tolerance": self.tolerance,
            "morphism": self.morphism,
            "orthogonality": self.orthogonality,
            "twisted_orthogonality": dict(self.twisted_orthogonality),
            "passed": self.passed,
        }


def doubling_construction(
    V: ModuleDescriptor,
    U,
    rng: SeededGenerator | int | None = None,
    trials: int = 10,
    tolerance: float = RELATION_TOL,
) -> tuple[RowBlockMorphism, RelationReport]:
    """Build φ(A) = UA into the complementary rows and check the relations it must satisfy.

    Checked on random x, y ∈ V: ⟨φx, φy⟩ = ⟨x, y⟩, φ(V) ⊥ V, and
    (φ + λι)(V) ⊥ (φ − λι)(V) for λ ∈ {1, i}, ι the inclusion of V.
    """
    if V.kind not in (ModuleKind.RECTANGULAR, ModuleKind.ALGEBRA):
        raise HypothesisViolation(f"Doubling needs a Rectangular module, got {V.label}")
    m = V.rows
    U = np.asarray(U, dtype=np.complex128)
    if U.shape != (m, m):
        raise DescriptorMismatchError(f"U must be {m}x{m}, got {U.shape}")
    if float(np.max(np.abs(U.conj().T @ U - np.eye(m)))) > UNITARY_TOL:
        raise HypothesisViolation("U is not unitary")

    source = ModuleDescriptor.rectangular(m, V.n, V.flavor)
    target = ModuleDescriptor.rectangular(2 * m, V.n, V.flavor)
    phi = RowBlockMorphism(source, target, U)
    rng = as_generator(rng)

    morph = ortho = 0.0
    cond = {"1": 0.0, "i": 0.0}
    for _ in range(trials):
        x = ModuleElement(source, rng.complex_gaussian((m, V.n)))
        y = ModuleElement(source, rng.complex_gaussian((m, V.n)))
        px, py, ix, iy = phi(x), phi(y), phi.embed(x), phi.embed(y)
        morph = max(morph, operator_norm(inner_product(px, py) - inner_product(x, y)))
        ortho = max(ortho, operator_norm(inner_product(ix, py)), operator_norm(inner_product(px, iy)))
        for label, lam in (("1", 1.0), ("i", 1j)):
            gap = operator_norm(inner_product(px + ix * lam, py - iy * lam))
            cond[label] = max(cond[label], gap)

    report = RelationReport(trials, tolerance, morph, ortho, cond)
    if not report.passed:
        logger.warning(f"Doubling relations exceed {tolerance:g}: {report.to_dict()}")
    return phi, report


def odd_plus_s_check(
    f: OAMap,
    phi: RowBlockMorphism,
    samples: int,
    rng: SeededGenerator | int | None = None,
) -> ResidualStats:
    """Relative gap ‖f(x) − odd(x) − S(x, x)‖ on W0 = V ⊕ φ(V)."""
    rng = as_generator(rng)
    S = sesquilinear_S(f)
    values = []
    m, n = phi.source.rows, phi.source.n
    for _ in range(samples):
        v1 = ModuleElement(phi.source, rng.complex_gaussian((m, n)))
        v2 = ModuleElement(phi.source, rng.complex_gaussian((m, n)))
        x = phi.embed(v1) + phi(v2)
        fx, fmx = f(x), f(-x)
        values.append(_relative(fx - 0.5 * (fx - fmx) - S(x, x), fx))
    return ResidualStats.from_values(values)
