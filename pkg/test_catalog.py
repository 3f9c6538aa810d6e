#!/usr/bin/env python3
"""
Tests for the map catalog, the counterexample witnesses, the harmonic growth
table and the property suite.
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from core.algebra import Flavor, rank_one
from core.catalog import (
    MapKind,
    MapSpec,
    Perturbation,
    additivity_gap,
    harmonic_demo,
    harmonic_frame,
    instantiate_map,
    random_map_spec,
    witness_pair,
)
from core.decomposition import OAMap, PhiTable
from core.errors import DescriptorMismatchError
from core.module import ModuleDescriptor, ModuleElement, module_norm
from core.verify import PROPERTY_NAMES, check_orthogonal_additivity, property_suite
from utils.random_elements import SeededGenerator


def test_instantiate_examples():
    R = ModuleDescriptor.rectangular(2, 2)
    f = instantiate_map(MapSpec(MapKind.PURE_QUADRATIC, R, phi0=PhiTable.trace(R.algebra)))
    assert_allclose(f(ModuleElement(R, [[1, 0], [0, 0]])), [1.0])

    D = ModuleDescriptor.diagonal(3)
    g = instantiate_map(MapSpec(MapKind.DIAGONAL_CUBIC, D))
    assert_allclose(g(ModuleElement(D, [2, 0, 0])), [8, 0, 0])

    V = ModuleDescriptor.vector(3)
    h = instantiate_map(MapSpec(MapKind.RANK_ONE_CUBIC, V, eta0=np.array([1, 0, 0])))
    assert_allclose(h(ModuleElement(V, [1, 0, 0])), rank_one([1, 0, 0], [1, 0, 0]).ravel())

    P = ModuleDescriptor.pair(2)
    k = instantiate_map(MapSpec(MapKind.PAIR_NORM_SQUARE, P))
    assert_allclose(k(ModuleElement(P, [[1, 1j], [2, 0]])), [6.0])


def test_map_spec_validation():
    R = ModuleDescriptor.rectangular(2, 2)
    with pytest.raises(DescriptorMismatchError):
        MapSpec(MapKind.DIAGONAL_CUBIC, R)
    with pytest.raises(DescriptorMismatchError):
        MapSpec(MapKind.PURE_QUADRATIC, R, phi0=PhiTable.trace(ModuleDescriptor.rectangular(2, 3).algebra))
    with pytest.raises(DescriptorMismatchError):
        MapSpec(MapKind.ADDITIVE_PLUS_QUADRATIC, R, phi0=PhiTable.trace(R.algebra), t0=np.zeros((1, 3)))
    with pytest.raises(DescriptorMismatchError):
        MapSpec(MapKind.RANK_ONE_CUBIC, ModuleDescriptor.vector(2), eta0=np.ones(3))


def test_ground_truth_and_expected_failures():
    R = ModuleDescriptor.rectangular(2, 2)
    spec = random_map_spec(R, 1)
    assert spec.representable
    assert spec.expected_failures == frozenset()
    assert MapSpec(MapKind.PAIR_NORM_SQUARE, ModuleDescriptor.pair(2)).representable
    assert not MapSpec(MapKind.DIAGONAL_CUBIC, ModuleDescriptor.diagonal(2)).representable
    perturbed = MapSpec(MapKind.PERTURBED, R, base=spec, epsilon=0.1, perturbation=Perturbation.CUBIC)
    assert perturbed.expected_failures == frozenset(PROPERTY_NAMES)
    assert perturbed.codomain_dim == spec.codomain_dim
    assert not perturbed.representable


def test_diagonal_cubic_witness():
    D = ModuleDescriptor.diagonal(4)
    spec = MapSpec(MapKind.DIAGONAL_CUBIC, D)
    x, y = witness_pair(spec)
    assert additivity_gap(instantiate_map(spec), x, y) >= 6 - 1e-9


def test_rank_one_cubic_witness():
    V = ModuleDescriptor.vector(3)
    spec = MapSpec(MapKind.RANK_ONE_CUBIC, V, eta0=np.array([1, 0, 0]))
    x, y = witness_pair(spec)
    gap = additivity_gap(instantiate_map(spec), x, y)
    assert gap >= 1.0
    assert gap == pytest.approx(np.sqrt(3.0))


def test_harmonic_demo():
    rows = harmonic_demo(16)
    assert rows[0].phi_value == pytest.approx(1.0, abs=1e-9)
    assert rows[3].phi_value == pytest.approx(25 / 12, abs=1e-9)
    for r in rows:
        assert abs(r.phi_value - r.partial_sum) < 1e-9
        assert r.operator_norm == pytest.approx(1.0, abs=1e-12)
    for n in range(1, len(rows) // 2 + 1):
        assert rows[2 * n - 1].phi_value - rows[n - 1].phi_value >= 0.5 - 1e-9

    frame = harmonic_frame(rows)
    assert list(frame.columns) == ["n", "phi_value", "operator_norm", "partial_sum"]
    assert frame["phi_value"].is_monotonic_increasing

    with pytest.raises(DescriptorMismatchError):
        harmonic_demo(0)


def test_orthogonal_additivity_checks():
    rng = SeededGenerator(3)
    D = ModuleDescriptor.diagonal(4)
    result = check_orthogonal_additivity(instantiate_map(MapSpec(MapKind.DIAGONAL_CUBIC, D)), D, 100, rng)
    assert result.max_violation < 1e-12

    P = ModuleDescriptor.pair(3)
    result = check_orthogonal_additivity(instantiate_map(MapSpec(MapKind.PAIR_NORM_SQUARE, P)), P, 50, rng)
    assert result.max_violation < 1e-12

    V = ModuleDescriptor.vector(3)
    result = check_orthogonal_additivity(instantiate_map(MapSpec(MapKind.RANK_ONE_CUBIC, V)), V, 50, rng)
    assert result.vacuous and result.passed and result.outcome == "VACUOUS"


def test_norm_map_is_not_orthogonally_additive():
    R = ModuleDescriptor.rectangular(2, 2)
    norm = OAMap(lambda x: [module_norm(x)], 1, name="norm")
    e11 = ModuleElement(R, [[1, 0], [0, 0]])
    e22 = ModuleElement(R, [[0, 0], [0, 1]])
    fxy = norm(e11 + e22)
    assert np.linalg.norm(fxy - norm(e11) - norm(e22)) / (1 + np.linalg.norm(fxy)) == pytest.approx(0.5)

    result = check_orthogonal_additivity(norm, R, 50, SeededGenerator(4))
    assert result.max_violation > 0.1
    assert not result.passed


def test_suite_representable():
    R = ModuleDescriptor.rectangular(3, 2)
    spec = random_map_spec(R, 8)
    report = property_suite(instantiate_map(spec), R, samples=30, rng=8)
    assert report.verdict == "PASS"
    assert [r.name for r in report.results] == list(PROPERTY_NAMES)
    assert all(r.outcome == "PASS" for r in report.results)


POLARIZATION = [
    "even_quadratic_law",
    "b_symmetry",
    "b_biadditivity",
    "b_i_invariance",
    "s_sesquilinearity",
    "s_symmetrization",
    "s_orthogonality_preserving",
]
REPRESENTABLE_MODULES = [
    ModuleDescriptor.rectangular(2, 2),
    ModuleDescriptor.rectangular(3, 2),
    ModuleDescriptor.rectangular(2, 3, Flavor.HILBERT_SCHMIDT),
    ModuleDescriptor.algebra_as_module(2),
    ModuleDescriptor.pair(2),
]


@pytest.mark.parametrize("seed", range(10))
def test_polarization_laws_on_representable_maps(seed):
    W = REPRESENTABLE_MODULES[seed % len(REPRESENTABLE_MODULES)]
    spec = random_map_spec(W, seed, with_additive=seed % 2 == 0)
    report = property_suite(
        instantiate_map(spec), W, samples=200, rng=seed,
        tolerances={name: 1e-8 for name in POLARIZATION}, properties=POLARIZATION,
    )
    assert report.verdict == "PASS"
    assert all(r.samples == 200 and r.max_violation <= 1e-8 for r in report.results)


def test_local_bound_detects_nonlinear_phi():
    R = ModuleDescriptor.rectangular(2, 2)
    trace = MapSpec(MapKind.PURE_QUADRATIC, R, phi0=PhiTable.trace(R.algebra))
    quartic = MapSpec(MapKind.PERTURBED, R, base=trace, epsilon=1.0, perturbation=Perturbation.QUARTIC)

    bad = property_suite(instantiate_map(quartic), R, samples=80, rng=17, properties=["local_bound"])
    assert bad.get("local_bound").outcome == "FAIL"

    good = property_suite(instantiate_map(trace), R, samples=80, rng=17, properties=["local_bound"])
    assert good.get("local_bound").outcome == "PASS"
    assert good.get("local_bound").max_violation == 0.0


def test_suite_diagonal_cubic():
    D = ModuleDescriptor.diagonal(4)
    spec = MapSpec(MapKind.DIAGONAL_CUBIC, D)
    report = property_suite(instantiate_map(spec), D, samples=30, rng=9, expected_failures=spec.expected_failures)
    assert report.verdict == "PASS"
    for name in ("b_symmetry", "b_biadditivity", "even_quadratic_law", "s_sesquilinearity", "orthogonal_additivity"):
        assert report.get(name).max_violation < 1e-10
    assert report.get("t_additivity").outcome == "EXPECTED_FAIL"
    assert report.get("local_bound").vacuous


def test_suite_rank_one_cubic():
    V = ModuleDescriptor.vector(3)
    spec = MapSpec(MapKind.RANK_ONE_CUBIC, V)
    report = property_suite(instantiate_map(spec), V, samples=20, rng=10, expected_failures=spec.expected_failures)
    assert report.verdict == "PASS"
    assert report.get("orthogonal_additivity").vacuous
    assert report.get("s_orthogonality_preserving").vacuous
    assert report.get("t_additivity").outcome == "EXPECTED_FAIL"

    strict = property_suite(instantiate_map(spec), V, samples=20, rng=10)
    assert strict.verdict == "FAIL"
    assert "t_additivity" in strict.unexpected_failures


def test_suite_pair_norm_square_and_subsets():
    P = ModuleDescriptor.pair(3)
    f = instantiate_map(MapSpec(MapKind.PAIR_NORM_SQUARE, P))
    report = property_suite(f, P, samples=20, rng=11)
    assert report.verdict == "PASS"

    subset = property_suite(f, P, samples=20, rng=11, properties=["b_symmetry", "local_bound"])
    assert [r.name for r in subset.results] == ["b_symmetry", "local_bound"]
    assert subset.get("b_symmetry").max_violation == report.get("b_symmetry").max_violation

    with pytest.raises(KeyError):
        property_suite(f, P, samples=1, properties=["nope"])


def test_suite_parallel_matches_serial():
    R = ModuleDescriptor.rectangular(2, 2)
    spec = random_map_spec(R, 12)
    serial = property_suite(instantiate_map(spec), R, samples=15, rng=12)
    parallel = property_suite(instantiate_map(spec), R, samples=15, rng=12, workers=4)
    assert serial.to_dict() == parallel.to_dict()
    assert len(serial.to_frame()) == len(PROPERTY_NAMES)


def test_suite_perturbed_allows_failures():
    R = ModuleDescriptor.rectangular(2, 2)
    base = random_map_spec(R, 13)
    spec = MapSpec(MapKind.PERTURBED, R, base=base, epsilon=0.5, perturbation=Perturbation.QUARTIC)
    report = property_suite(instantiate_map(spec), R, samples=20, rng=13, expected_failures=spec.expected_failures)
    assert report.verdict == "PASS"
    assert report.get("orthogonal_additivity").outcome == "EXPECTED_FAIL"


def main():
    """Run all tests."""
    print("=== Map catalog and property suite - Test ===\n")
    sys.exit(pytest.main([__file__, "-q"]))


if __name__ == "__main__":
    main()
