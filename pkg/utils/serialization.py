"""
JSON codecs for the run config and report.

Complex numbers travel as [re, im] pairs and matrices as nested row arrays.
"""

import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from core.algebra import Flavor
from core.decomposition import PhiTable
from core.errors import ConfigError, DescriptorMismatchError
from core.module import ModuleDescriptor, ModuleKind

logger = logging.getLogger(__name__)


def complex_to_pair(z: complex) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def parse_complex(value: Any) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(value[0], value[1])
    raise ConfigError(f"Expected a number or [re, im] pair, got {value!r}")


def vector_to_json(v) -> list[list[float]]:
    return [complex_to_pair(z) for z in np.asarray(v).reshape(-1)]


def matrix_to_json(m) -> list[list[list[float]]]:
    return [vector_to_json(row) for row in np.atleast_2d(np.asarray(m))]


def parse_vector(value: Any) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"Expected a non-empty list of complex entries, got {value!r}")
    return np.array([parse_complex(v) for v in value], dtype=np.complex128)


def _positive_int(obj: dict, key: str, context: str) -> int:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}: '{key}' must be an integer, got {value!r}")
    if value < 1:
        raise ConfigError(f"{context}: '{key}' must be >= 1, got {value}")
    return value


def descriptor_from_json(obj: Any) -> ModuleDescriptor:
    if not isinstance(obj, dict):
        raise ConfigError(f"Module must be an object, got {obj!r}")
    try:
        kind = ModuleKind(obj.get("kind"))
    except ValueError:
        raise ConfigError(f"Unknown module kind {obj.get('kind')!r}; expected one of {[k.value for k in ModuleKind]}")
    try:
        flavor = Flavor(obj.get("flavor", Flavor.COMPACT.value))
    except ValueError:
        raise ConfigError(f"Unknown algebra flavor {obj.get('flavor')!r}")

    try:
        if kind is ModuleKind.DIRECT_SUM:
            children = obj.get("children")
            if not isinstance(children, list) or len(children) < 2:
                raise ConfigError("DirectSum needs a 'children' list with at least two modules")
            return ModuleDescriptor.direct_sum([descriptor_from_json(c) for c in children])
        n = _positive_int(obj, "n", kind.value)
        if kind is ModuleKind.RECTANGULAR:
            return ModuleDescriptor.rectangular(_positive_int(obj, "m", kind.value), n, flavor)
        return ModuleDescriptor(kind, n=n, flavor=flavor)
    except DescriptorMismatchError as e:
        raise ConfigError(str(e)) from e


def descriptor_to_json(W: ModuleDescriptor) -> dict:
    if W.kind is ModuleKind.DIRECT_SUM:
        return {"kind": W.kind.value, "children": [descriptor_to_json(c) for c in W.children]}
    out = {"kind": W.kind.value, "n": W.n, "flavor": W.flavor.value}
    if W.kind is ModuleKind.RECTANGULAR:
        out["m"] = W.m
    return out


def phi_table_to_json(table: PhiTable) -> list[dict]:
    """Block → matrix unit (p, q) → complex vector Φ(E_pq)."""
    out = []
    for j, values in enumerate(table.values):
        n = values.shape[1]
        out.append({
            "block": j,
            "n": n,
            "values": [[vector_to_json(table.entry(j, p, q)) for q in range(n)] for p in range(n)],
        })
    return out


def _default(obj: Any):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return complex_to_pair(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def _clean(obj: Any):
    # NaN/Inf are not valid JSON
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(_clean(payload), indent=2, ensure_ascii=False, default=_default)


def write_json(payload: dict, path: str | Path | None = None) -> str:
    text = dumps(payload)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding="utf-8")
        logger.info(f"Report written to {path}")
    return text


def load_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config is not valid JSON: {e}")
