"""
Core packages for decomposing orthogonally additive maps on Hilbert modules
over finite matrix algebras.

The layers build on each other: algebra (matrix blocks, Hermitian
eigensolver), module (row-matrix modules, orthonormal bases, orthogonal
pairs), decomposition (polarization, Φ assembly, residuals), catalog (known
maps and counterexamples) and verify (the property suite).
"""

__version__ = "0.1.0"

from .algebra import AlgebraDescriptor, AlgebraElement, Flavor, hermitian_eig
from .catalog import MapKind, MapSpec, instantiate_map, random_map_spec
from .decomposition import Decomposition, OAMap, PhiTable, decompose
from .errors import ToolkitError
from .module import ModuleDescriptor, ModuleElement, ModuleKind
from .verify import SuiteReport, property_suite

__all__ = [
    "__version__",
    "AlgebraDescriptor",
    "AlgebraElement",
    "Flavor",
    "hermitian_eig",
    "MapKind",
    "MapSpec",
    "instantiate_map",
    "random_map_spec",
    "Decomposition",
    "OAMap",
    "PhiTable",
    "decompose",
    "ToolkitError",
    "ModuleDescriptor",
    "ModuleElement",
    "ModuleKind",
    "SuiteReport",
    "property_suite",
]
