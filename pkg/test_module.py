#!/usr/bin/env python3
"""
Tests for the module layer: inner products, the right action, orthonormal
bases, rebasing and orthogonal pair construction.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.algebra import AlgebraElement, Flavor, is_positive, operator_norm, random_algebra_element, rank_one
from core.errors import DescriptorMismatchError, HypothesisViolation
from core.module import (
    ModuleDescriptor,
    ModuleElement,
    ModuleKind,
    basis_expand,
    build_orthonormal_basis,
    coordinates,
    dim_A,
    from_coordinates,
    inner_product,
    is_orthogonal,
    module_action,
    module_norm,
    module_series,
    random_element,
    random_orthogonal_pair,
    rebase_basis,
    supports_orthogonal_pair,
    unit_directions,
    zero_element,
)
from utils.random_elements import SeededGenerator

seeds = st.integers(min_value=0, max_value=2**32 - 1)

MODULES = [
    ModuleDescriptor.algebra_as_module(3),
    ModuleDescriptor.rectangular(4, 2),
    ModuleDescriptor.rectangular(2, 3, Flavor.HILBERT_SCHMIDT),
    ModuleDescriptor.vector(3),
    ModuleDescriptor.pair(3),
    ModuleDescriptor.diagonal(4),
    ModuleDescriptor.direct_sum([ModuleDescriptor.rectangular(2, 2), ModuleDescriptor.vector(2)]),
]


def unit(m, n, i, j):
    out = np.zeros((m, n), dtype=np.complex128)
    out[i, j] = 1.0
    return out


def test_matrix_unit_inner_product():
    W = ModuleDescriptor.rectangular(2, 2)
    e11 = ModuleElement(W, unit(2, 2, 0, 0))
    assert_allclose(inner_product(e11, e11).blocks[0], unit(2, 2, 0, 0))
    assert module_norm(e11) == pytest.approx(1.0)
    assert module_norm(zero_element(W)) == 0.0


def test_vector_module_inner_product_unit():
    # ⟨ξ, η⟩ = ξ̄ηᵀ under the row realization, so ⟨e1, e2⟩ is the unit at (1, 2)
    W = ModuleDescriptor.vector(2)
    e1, e2 = ModuleElement(W, [1, 0]), ModuleElement(W, [0, 1])
    assert_allclose(inner_product(e1, e2).blocks[0], unit(2, 2, 0, 1))
    assert dim_A(W) == 1


@pytest.mark.parametrize("W", MODULES, ids=lambda W: W.label)
def test_module_axioms(W):
    rng = SeededGenerator(21)
    x, y, z = random_element(W, rng), random_element(W, rng), random_element(W, rng)
    a, b = random_algebra_element(W.algebra, rng), random_algebra_element(W.algebra, rng)

    xy = inner_product(x, y)
    xz = inner_product(x, z)
    assert inner_product(x, y + z).max_abs_diff(xy + xz) < 1e-12 * (1 + operator_norm(xy) + operator_norm(xz))
    xx = inner_product(x, x)
    assert is_positive(xx, 1e-10)
    assert operator_norm(xx) > 1e-12
    assert operator_norm(inner_product(zero_element(W), zero_element(W))) == 0.0
    assert inner_product(x, module_action(y, a)).max_abs_diff(xy @ a) < 1e-12 * (1 + operator_norm(xy) * operator_norm(a))
    assert xy.H.max_abs_diff(inner_product(y, x)) < 1e-12 * (1 + operator_norm(xy))
    left = module_action(module_action(x, a), b)
    right = module_action(x, a @ b)
    assert np.max(np.abs(coordinates(left) - coordinates(right))) < 1e-12 * (1 + np.max(np.abs(coordinates(left))))
    assert np.allclose(coordinates(module_action(x, AlgebraElement.zero(W.algebra))), 0)


def test_action_by_support_projection_fixes_element():
    W = ModuleDescriptor.rectangular(3, 3)
    rng = SeededGenerator(2)
    xi = rng.unit_vector(3)
    rows = np.zeros((3, 3), dtype=np.complex128)
    rows[1] = xi.conj()
    x = ModuleElement(W, rows)
    e = inner_product(x, x)
    assert_allclose(coordinates(module_action(x, e)), coordinates(x), atol=1e-14)


def test_norm_is_top_singular_value():
    W = ModuleDescriptor.rectangular(4, 3)
    x = random_element(W, SeededGenerator(8))
    assert module_norm(x) == pytest.approx(np.linalg.svd(x.payload, compute_uv=False)[0], rel=1e-9)


def test_is_orthogonal():
    W = ModuleDescriptor.rectangular(2, 2)
    e11, e22 = ModuleElement(W, unit(2, 2, 0, 0)), ModuleElement(W, unit(2, 2, 1, 1))
    assert is_orthogonal(e11, e22, tol=0.0)
    assert not is_orthogonal(e11, e11)


@pytest.mark.parametrize("W", [ModuleDescriptor.diagonal(4), ModuleDescriptor.pair(3)], ids=lambda W: W.label)
def test_is_orthogonal_symmetric_and_scale_stable(W):
    rng = SeededGenerator(17)
    for _ in range(10):
        # disjoint supports give an exactly vanishing inner product
        x, y = random_orthogonal_pair(W, rng)
        u, v = random_element(W, rng), random_element(W, rng)
        for lam in (1.0, -2.5, 1e-3j, 1e3 + 1e3j):
            assert is_orthogonal(x, y) and is_orthogonal(y, x)
            assert is_orthogonal(x * lam, y) and is_orthogonal(x, y * lam)
            assert not is_orthogonal(u * lam, v) and not is_orthogonal(v, u * lam)


def test_unit_directions_span_coordinates():
    W = ModuleDescriptor.direct_sum([ModuleDescriptor.rectangular(2, 2), ModuleDescriptor.vector(3)])
    directions = unit_directions(W)
    assert len(directions) == W.complex_dim
    for u, (e, ie) in enumerate(directions):
        expected = np.zeros(W.complex_dim, dtype=np.complex128)
        expected[u] = 1.0
        assert_allclose(coordinates(e), expected)
        assert_allclose(coordinates(ie), 1j * expected)


def test_rectangular_canonical_basis():
    W = ModuleDescriptor.rectangular(2, 2)
    basis = build_orthonormal_basis(W)
    assert len(basis) == 2
    assert_allclose(basis.elements[0].payload, unit(2, 2, 0, 0))
    assert_allclose(basis.elements[1].payload, unit(2, 2, 1, 0))
    for p in basis.projections:
        assert_allclose(p.blocks[0], unit(2, 2, 0, 0))
    assert basis.is_uniform()


def test_basis_lengths():
    assert len(build_orthonormal_basis(ModuleDescriptor.vector(4))) == 1
    assert len(build_orthonormal_basis(ModuleDescriptor.pair(4))) == 2
    assert len(build_orthonormal_basis(ModuleDescriptor.diagonal(3))) == 3


def test_rebase_canonical():
    W = ModuleDescriptor.rectangular(2, 2)
    rebased = rebase_basis(build_orthonormal_basis(W, pivot=0), j0=0)
    for i, (w, p) in enumerate(zip(rebased.elements, rebased.projections)):
        assert_allclose(w.payload, unit(2, 2, i, i))
        assert_allclose(p.blocks[0], unit(2, 2, i, i))


def test_rebase_single_element_basis():
    W = ModuleDescriptor.vector(3)
    rng = SeededGenerator(4)
    frame = rng.unitary(3)
    basis = build_orthonormal_basis(W, pivot=2, frame=frame)
    rebased = rebase_basis(basis, j0=2)
    xi0 = frame[:, 0]
    assert_allclose(inner_product(rebased.elements[0], rebased.elements[0]).blocks[0], rank_one(xi0, xi0), atol=1e-12)


@given(seed=seeds, m=st.integers(2, 4), extra=st.integers(0, 2))
@settings(max_examples=10, deadline=None)
def test_rebase_random_frame(seed, m, extra):
    n = min(m + extra, 4)
    W = ModuleDescriptor.rectangular(m, n)
    rng = SeededGenerator(seed)
    frame = rng.unitary(n)
    rebased = rebase_basis(build_orthonormal_basis(W, pivot=0, frame=frame), j0=0)
    for i, w in enumerate(rebased.elements):
        xi = frame[:, i]
        assert inner_product(w, w).max_abs_diff(AlgebraElement(W.algebra, (rank_one(xi, xi),))) < 1e-12
        for v in rebased.elements[i + 1:]:
            assert operator_norm(inner_product(w, v)) < 1e-12
    for _ in range(5):
        a = random_algebra_element(W.algebra, rng)
        s = module_series(rebased, a)
        if m == n:
            assert inner_product(s, s).max_abs_diff(a.H @ a) < 1e-10 * (1 + operator_norm(a) ** 2)


def test_rebase_rejects_too_many_elements():
    W = ModuleDescriptor.rectangular(3, 2)
    with pytest.raises(HypothesisViolation):
        rebase_basis(build_orthonormal_basis(W), j0=0)


def test_basis_expand():
    W = ModuleDescriptor.rectangular(3, 3)
    basis = build_orthonormal_basis(W)
    coefs, rec = basis_expand(basis.elements[1], basis)
    assert coefs[0].allclose(AlgebraElement.zero(W.algebra))
    assert coefs[1].allclose(basis.projections[1])
    assert_allclose(coordinates(rec), coordinates(basis.elements[1]))

    coefs, _ = basis_expand(zero_element(W), basis)
    assert all(c.allclose(AlgebraElement.zero(W.algebra)) for c in coefs)

    rebased = rebase_basis(basis, j0=0)
    x = random_element(W, SeededGenerator(6))
    _, rec = basis_expand(x, rebased)
    assert np.max(np.abs(coordinates(rec) - coordinates(x))) < 1e-10


def test_module_series_simple_cases():
    W = ModuleDescriptor.rectangular(3, 3)
    rebased = rebase_basis(build_orthonormal_basis(W), j0=0)
    assert np.allclose(coordinates(module_series(rebased, AlgebraElement.zero(W.algebra))), 0)
    e1 = rebased.projections[1]
    s = module_series(rebased, e1)
    assert_allclose(coordinates(s), coordinates(module_action(rebased.elements[1], e1)), atol=1e-14)


def test_orthogonal_pairs():
    rng = SeededGenerator(13)
    D = ModuleDescriptor.diagonal(4)
    x, y = random_orthogonal_pair(D, rng)
    assert np.all(x.payload[2:] == 0) and np.all(y.payload[:2] == 0)

    for W in [ModuleDescriptor.rectangular(4, 2), ModuleDescriptor.pair(3), MODULES[-1]]:
        for _ in range(10):
            x, y = random_orthogonal_pair(W, rng)
            assert is_orthogonal(x, y, tol=1e-12 * max(1.0, module_norm(x) * module_norm(y)))

    P = ModuleDescriptor.pair(2)
    x, y = random_orthogonal_pair(P, rng)
    assert np.all(x.payload[1] == 0) and np.all(y.payload[0] == 0)


def test_orthogonal_pair_unsupported():
    W = ModuleDescriptor.vector(3)
    assert not supports_orthogonal_pair(W)
    with pytest.raises(HypothesisViolation):
        random_orthogonal_pair(W, SeededGenerator(1))


def test_descriptor_validation():
    with pytest.raises(DescriptorMismatchError):
        ModuleDescriptor.rectangular(0, 2)
    with pytest.raises(DescriptorMismatchError):
        ModuleDescriptor.direct_sum([ModuleDescriptor.diagonal(2), ModuleDescriptor.vector(2)])
    with pytest.raises(DescriptorMismatchError):
        ModuleDescriptor.direct_sum([ModuleDescriptor.rectangular(2, 2)])
    W = ModuleDescriptor.direct_sum([ModuleDescriptor.rectangular(3, 2), ModuleDescriptor.pair(2)])
    assert W.kind is ModuleKind.DIRECT_SUM
    assert W.block_dims == (3, 2)
    assert W.algebra.blocks == (2, 2)
    x = from_coordinates(W, np.arange(W.complex_dim))
    assert_allclose(coordinates(x), np.arange(W.complex_dim))
    with pytest.raises(DescriptorMismatchError):
        ModuleElement(ModuleDescriptor.vector(2), [1, 2, 3])


def main():
    """Run all tests."""
    print("=== Hilbert modules - Module Test ===\n")
    sys.exit(pytest.main([__file__, "-q"]))


if __name__ == "__main__":
    main()
