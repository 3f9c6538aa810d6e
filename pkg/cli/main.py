"""
Config-driven runner: build a module, instantiate a catalog map, decompose
it, run the property suite and the demos, and emit a JSON report.

Exit codes: 0 success (expected failures included), 1 invariant breach
(the partial report is still written), 2 invalid config.
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from core import __version__
from core.catalog import (
    MapKind,
    MapSpec,
    Perturbation,
    additivity_gap,
    harmonic_demo,
    instantiate_map,
    random_map_spec,
    random_phi_table,
    witness_pair,
)
from core.decomposition import PhiTable, decompose, doubling_construction, odd_plus_s_check
from core.errors import ConfigError, ToolkitError
from core.module import ModuleDescriptor, ModuleKind, coordinates, random_element
from core.verify import DEFAULT_TOLERANCES, property_suite
from utils.random_elements import SeededGenerator
from utils.serialization import (
    descriptor_from_json,
    descriptor_to_json,
    load_json,
    matrix_to_json,
    parse_vector,
    phi_table_to_json,
    vector_to_json,
    write_json,
)
from utils.settings import Settings, configure_logging

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0.0"

RUN_TOLERANCES: dict[str, float] = {
    "residual": 1e-9,
    "phi_ground_truth": 1e-9,
    "t_ground_truth": 1e-9,
    "harmonic": 1e-9,
    "doubling": 1e-12,
    "odd_plus_s": 1e-9,
}
KNOWN_DEMOS = ("harmonic", "doubling")
WITNESS_THRESHOLD = 0.1
CONFIG_KEYS = {"module", "map", "seed", "samples", "tolerances", "output", "demos", "harmonic_n", "workers"}


@dataclass
class RunConfig:
    module: ModuleDescriptor
    map: dict
    seed: int
    samples: int
    tolerances: dict[str, float] = field(default_factory=dict)
    output: str | None = None
    demos: tuple[str, ...] = ()
    harmonic_n: int = 64
    workers: int = 1

    def tolerance(self, name: str) -> float:
        return self.tolerances.get(name, RUN_TOLERANCES.get(name, DEFAULT_TOLERANCES.get(name)))

    def echo(self) -> dict:
        return {
            "module": descriptor_to_json(self.module),
            "map": self.map,
            "seed": self.seed,
            "samples": self.samples,
            "tolerances": dict(sorted(self.tolerances.items())),
            "output": self.output,
            "demos": list(self.demos),
            "harmonic_n": self.harmonic_n,
            "workers": self.workers,
        }


@dataclass
class RunReport:
    payload: dict
    breaches: list[str]
    phi: PhiTable | None = None

    @property
    def exit_code(self) -> int:
        return 1 if self.breaches else 0


def _int_field(obj: dict, key: str, default: int, low: int = 1, high: int | None = None) -> int:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    if value < low or (high is not None and value > high):
        raise ConfigError(f"'{key}' must lie in [{low}, {high if high is not None else 'inf'}), got {value}")
    return value


_MAP_MODULES = {
    MapKind.RANK_ONE_CUBIC: ModuleKind.VECTOR,
    MapKind.PAIR_NORM_SQUARE: ModuleKind.PAIR,
    MapKind.DIAGONAL_CUBIC: ModuleKind.DIAGONAL,
}


def _check_map(obj: Any, W: ModuleDescriptor, nested: bool = False) -> dict:
    """Structural validation of the map section; no random draws happen here."""
    if not isinstance(obj, dict):
        raise ConfigError(f"'map' must be an object, got {obj!r}")
    try:
        kind = MapKind(obj.get("kind"))
    except ValueError:
        raise ConfigError(f"Unknown map kind {obj.get('kind')!r}; expected one of {[k.value for k in MapKind]}")
    out = {"kind": kind.value}
    if kind in _MAP_MODULES and W.kind is not _MAP_MODULES[kind]:
        raise ConfigError(f"{kind.value} needs a {_MAP_MODULES[kind].value}, got {W.label}")
    if kind in (MapKind.PURE_QUADRATIC, MapKind.ADDITIVE_PLUS_QUADRATIC):
        phi = obj.get("phi", "trace")
        if phi not in ("trace", "random"):
            raise ConfigError(f"'phi' must be 'trace' or 'random', got {phi!r}")
        out["phi"] = phi
        out["codomain_dim"] = 1 if phi == "trace" else _int_field(obj, "codomain_dim", 2)
        if kind is MapKind.ADDITIVE_PLUS_QUADRATIC:
            t0 = obj.get("t0", "random")
            if t0 not in ("random", "zero"):
                raise ConfigError(f"'t0' must be 'random' or 'zero', got {t0!r}")
            out["t0"] = t0
    elif kind is MapKind.RANK_ONE_CUBIC:
        eta0 = obj.get("eta0", 0)
        if isinstance(eta0, int) and not isinstance(eta0, bool):
            if not 0 <= eta0 < W.n:
                raise ConfigError(f"'eta0' unit index must lie in [0, {W.n}), got {eta0}")
        elif parse_vector(eta0).shape != (W.n,):
            raise ConfigError(f"'eta0' must have {W.n} entries")
        out["eta0"] = eta0
    elif kind is MapKind.PERTURBED:
        if nested:
            raise ConfigError("Perturbed maps cannot be nested")
        out["base"] = _check_map(obj.get("base"), W, nested=True)
        epsilon = obj.get("epsilon", 0.1)
        if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)) or not np.isfinite(epsilon):
            raise ConfigError(f"'epsilon' must be a finite number, got {epsilon!r}")
        out["epsilon"] = float(epsilon)
        try:
            out["perturbation"] = Perturbation(obj.get("perturbation", "quartic")).value
        except ValueError:
            raise ConfigError(f"'perturbation' must be one of {[p.value for p in Perturbation]}")
    return out


def validate_config(obj: Any, settings: Settings | None = None) -> RunConfig:
    settings = settings or Settings()
    if not isinstance(obj, dict):
        raise ConfigError("Config must be a JSON object")
    unknown = set(obj) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"Unknown config keys: {sorted(unknown)}")
    if "module" not in obj or "map" not in obj:
        raise ConfigError("Config needs 'module' and 'map'")
    W = descriptor_from_json(obj["module"])
    map_obj = _check_map(obj["map"], W)

    tolerances = obj.get("tolerances", {}) or {}
    if not isinstance(tolerances, dict):
        raise ConfigError("'tolerances' must be an object")
    known = set(RUN_TOLERANCES) | set(DEFAULT_TOLERANCES)
    for name, value in tolerances.items():
        if name not in known:
            raise ConfigError(f"Unknown tolerance {name!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 0:
            raise ConfigError(f"Tolerance {name!r} must be a nonnegative number")

    demos = obj.get("demos", [])
    if not isinstance(demos, list) or any(d not in KNOWN_DEMOS for d in demos):
        raise ConfigError(f"'demos' must be a list drawn from {list(KNOWN_DEMOS)}")

    output = obj.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("'output' must be a path string or null")

    return RunConfig(
        module=W,
        map=map_obj,
        seed=_int_field(obj, "seed", settings.default_seed, low=0, high=2**64 - 1),
        samples=_int_field(obj, "samples", settings.default_samples, low=0),
        tolerances={k: float(v) for k, v in tolerances.items()},
        output=output,
        demos=tuple(dict.fromkeys(demos)),
        harmonic_n=_int_field(obj, "harmonic_n", settings.harmonic_n),
        workers=_int_field(obj, "workers", 1),
    )


def load_config(path: str | Path, settings: Settings | None = None) -> RunConfig:
    return validate_config(load_json(path), settings)


def build_map_spec(map_obj: dict, W: ModuleDescriptor, rng: SeededGenerator) -> MapSpec:
    kind = MapKind(map_obj["kind"])
    if kind in (MapKind.PURE_QUADRATIC, MapKind.ADDITIVE_PLUS_QUADRATIC):
        d = map_obj["codomain_dim"]
        phi0 = PhiTable.trace(W.algebra) if map_obj["phi"] == "trace" else random_phi_table(W.algebra, d, rng)
        if kind is MapKind.PURE_QUADRATIC:
            return MapSpec(kind, W, phi0=phi0)
        shape = (d, 2 * W.complex_dim)
        t0 = rng.complex_gaussian(shape) if map_obj["t0"] == "random" else np.zeros(shape, dtype=np.complex128)
        return MapSpec(kind, W, phi0=phi0, t0=t0)
    if kind is MapKind.RANK_ONE_CUBIC:
        eta0 = map_obj["eta0"]
        vec = np.eye(W.n, dtype=np.complex128)[eta0] if isinstance(eta0, int) else parse_vector(eta0)
        return MapSpec(kind, W, eta0=vec)
    if kind is MapKind.PERTURBED:
        base = build_map_spec(map_obj["base"], W, rng)
        return MapSpec(kind, W, base=base, epsilon=map_obj["epsilon"], perturbation=map_obj["perturbation"])
    return MapSpec(kind, W)


def _checked(value: float, tolerance: float) -> dict:
    return {"value": value, "tolerance": tolerance, "passed": bool(value <= tolerance)}


def _decomposition_section(config, spec, f, rng, breaches):
    W = config.module
    if min(W.block_dims) < 2:
        reason = f"{W.label} has block dimensions {list(W.block_dims)}; decomposition needs dim_A >= 2 per block"
        logger.info(f"Skipping decomposition: {reason}")
        return {"skipped": True, "reason": reason}, None

    d = decompose(f, W, config.samples, rng)
    section = d.summary()
    residual_max = d.residual_stats.max if d.residual_stats.max is not None else 0.0
    section["residual_check"] = _checked(residual_max, config.tolerance("residual"))
    section["phi_table"] = phi_table_to_json(d.phi)
    section["t_table"] = matrix_to_json(d.t_table.realified())

    truth = spec.ground_truth
    if truth is not None:
        t0 = truth.t0 if truth.t0 is not None else np.zeros_like(d.t_table.realified())
        section["ground_truth"] = {
            "phi": _checked(d.phi.max_abs_diff(truth.phi0), config.tolerance("phi_ground_truth")),
            "t": _checked(float(np.max(np.abs(d.t_table.realified() - t0))), config.tolerance("t_ground_truth")),
        }
    if spec.kind is not MapKind.PERTURBED and truth is not None:
        for name, check in [("residual", section["residual_check"]), *section["ground_truth"].items()]:
            if not check["passed"]:
                breaches.append(f"decomposition {name} check failed: {check['value']:.3e} > {check['tolerance']:g}")
    return section, d.phi


def _witness_section(spec, f):
    pair = witness_pair(spec)
    if pair is None:
        return {}
    x, y = pair
    gap = additivity_gap(f, x, y)
    return {
        "additivity": {
            "x": vector_to_json(coordinates(x)),
            "y": vector_to_json(coordinates(y)),
            "gap": gap,
            "threshold": WITNESS_THRESHOLD,
            "non_additive": bool(gap > WITNESS_THRESHOLD),
        }
    }


def _harmonic_section(config, breaches):
    rows = harmonic_demo(config.harmonic_n)
    error = max(abs(r.phi_value - r.partial_sum) for r in rows)
    increments = [rows[2 * n - 1].phi_value - rows[n - 1].phi_value for n in range(1, len(rows) // 2 + 1)]
    check = _checked(error, config.tolerance("harmonic"))
    if not check["passed"]:
        breaches.append(f"harmonic demo deviates from the partial sums by {error:.3e}")
    return {
        "N": config.harmonic_n,
        "rows": [{"n": r.n, "phi_value": r.phi_value, "operator_norm": r.operator_norm} for r in rows],
        "partial_sum_error": check,
        "min_doubling_increment": min(increments) if increments else None,
        "max_operator_norm": max(r.operator_norm for r in rows),
    }


def _doubling_section(config, rng, breaches):
    W = config.module
    V = ModuleDescriptor.rectangular(W.m, W.n, W.flavor) if W.kind is ModuleKind.RECTANGULAR else ModuleDescriptor.rectangular(2, 2)
    U = rng.unitary(V.rows)
    phi, relations = doubling_construction(V, U, rng, tolerance=config.tolerance("doubling"))
    target_map = instantiate_map(random_map_spec(phi.target, rng))
    stats = odd_plus_s_check(target_map, phi, max(config.samples // 10, 5), rng)
    check = _checked(stats.max or 0.0, config.tolerance("odd_plus_s"))
    if not relations.passed:
        breaches.append("doubling relations failed")
    if not check["passed"]:
        breaches.append(f"odd part + S(x,x) does not reproduce f on V ⊕ φ(V): {check['value']:.3e}")
    return {
        "source": descriptor_to_json(V),
        "target": descriptor_to_json(phi.target),
        "relations": relations.to_dict(),
        "odd_plus_s_residual": {**stats.to_dict(), "check": check},
    }


def run(config: RunConfig) -> RunReport:
    started = time.perf_counter()
    rng = SeededGenerator(config.seed)
    map_rng, decomp_rng, suite_rng, demo_rng = rng.spawn(4)
    breaches: list[str] = []
    payload: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "meta": {"version": __version__, "seed": config.seed, "wall_clock_seconds": None},
        "config": config.echo(),
        "decomposition": None,
        "suite": None,
        "witnesses": {},
        "demos": {},
        "verdict": None,
    }
    phi = None
    try:
        spec = build_map_spec(config.map, config.module, map_rng)
        f = instantiate_map(spec)
        payload["map"] = {"name": spec.name, "representable": spec.representable,
                          "codomain_dim": spec.codomain_dim, "expected_failures": sorted(spec.expected_failures)}
        payload["decomposition"], phi = _decomposition_section(config, spec, f, decomp_rng, breaches)

        suite_tolerances = {k: v for k, v in config.tolerances.items() if k in DEFAULT_TOLERANCES}
        suite = property_suite(f, config.module, config.samples, suite_rng, suite_tolerances,
                               spec.expected_failures, workers=config.workers)
        payload["suite"] = suite.to_dict()
        breaches.extend(f"unexpected failure of {name}" for name in suite.unexpected_failures)

        payload["witnesses"] = _witness_section(spec, f)
        payload["meta"]["evaluations"] = f.eval_count

        harmonic_rng, doubling_rng = demo_rng.spawn(2)
        if "harmonic" in config.demos:
            payload["demos"]["harmonic"] = _harmonic_section(config, breaches)
        if "doubling" in config.demos:
            payload["demos"]["doubling"] = _doubling_section(config, doubling_rng, breaches)
    except ToolkitError as e:
        logger.error(f"Run aborted: {type(e).__name__}: {e}")
        payload["error"] = {"type": type(e).__name__, "message": str(e)}
        breaches.append(f"{type(e).__name__}: {e}")

    payload["breaches"] = breaches
    payload["verdict"] = "PASS" if not breaches else "BREACH"
    payload["meta"]["wall_clock_seconds"] = round(time.perf_counter() - started, 3)
    logger.info(f"Run finished with verdict {payload['verdict']} in {payload['meta']['wall_clock_seconds']}s")
    return RunReport(payload, breaches, phi)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Decompose orthogonally additive maps on Hilbert modules")
    parser.add_argument("--config", required=True, help="Path to the JSON run config")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--out", help="Report path (default: stdout or the config 'output')")
    parser.add_argument("--csv", help="Also write the Φ table as a long CSV")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    args = parser.parse_args(argv)

    try:
        settings = Settings.from_env()
        configure_logging(settings.log_level, args.quiet)
        config = load_config(args.config, settings)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError(f"--seed must be a 64-bit unsigned integer, got {args.seed}")
            config.seed = args.seed
        if args.out:
            config.output = args.out
    except ConfigError as e:
        configure_logging(quiet=args.quiet)
        logger.error(f"Invalid configuration: {e}")
        return 2

    report = run(config)
    write_json(report.payload, config.output)
    if args.csv:
        if report.phi is None:
            logger.warning("No Φ table to export; decomposition was skipped")
        else:
            report.phi.to_frame().to_csv(args.csv, index=False)
            logger.info(f"Φ table written to {args.csv}")
    if report.breaches:
        for breach in report.breaches:
            logger.error(f"Invariant breach: {breach}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
