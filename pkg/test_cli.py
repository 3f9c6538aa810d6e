#!/usr/bin/env python3
"""
Tests for the config-driven runner: validation, report contents, exit codes
and determinism.
"""

import copy
import json
import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from cli.main import SCHEMA_VERSION, load_config, main, run, validate_config
from core.errors import ConfigError, InvariantBreach
from utils.serialization import dumps
from utils.settings import Settings

CONFIG_DIR = Path(__file__).parent / "examples_config"

TRACE_CONFIG = {
    "module": {"kind": "Rectangular", "m": 3, "n": 3, "flavor": "CompactOperator"},
    "map": {"kind": "PureQuadratic", "phi": "trace"},
    "seed": 42,
    "samples": 20,
}


def strip_clock(payload):
    out = copy.deepcopy(payload)
    out["meta"].pop("wall_clock_seconds")
    return out


def test_validate_defaults():
    config = validate_config({"module": {"kind": "PairModule", "n": 2}, "map": {"kind": "PairNormSquare"}}, Settings())
    assert config.seed == 42
    assert config.samples == 100
    assert config.demos == ()
    assert config.echo()["map"] == {"kind": "PairNormSquare"}


@pytest.mark.parametrize(
    "patch",
    [
        {"module": {"kind": "Rectangular", "m": -1, "n": 3}},
        {"module": {"kind": "Rectangular", "m": 2.5, "n": 3}},
        {"module": {"kind": "Banach", "n": 3}},
        {"module": {"kind": "Rectangular", "m": 2, "n": 2, "flavor": "Trace"}},
        {"map": {"kind": "Quintic"}},
        {"map": {"kind": "DiagonalCubic"}},
        {"map": {"kind": "PureQuadratic", "phi": "identity"}},
        {"map": {"kind": "Perturbed", "base": {"kind": "Perturbed"}}},
        {"samples": -1},
        {"seed": -5},
        {"tolerances": {"bogus": 1e-3}},
        {"tolerances": {"residual": -1}},
        {"demos": ["plot"]},
        {"extra": 1},
    ],
)
def test_validate_rejects(patch):
    with pytest.raises(ConfigError):
        validate_config({**TRACE_CONFIG, **patch})


def test_validate_direct_sum_children():
    with pytest.raises(ConfigError):
        validate_config({**TRACE_CONFIG, "module": {"kind": "DirectSum", "children": [{"kind": "DiagonalModule", "n": 2}]}})
    with pytest.raises(ConfigError):
        validate_config({**TRACE_CONFIG, "module": {"kind": "DirectSum", "children": []}})
    with pytest.raises(ConfigError):
        validate_config({**TRACE_CONFIG, "module": {"kind": "DirectSum", "children": [{"kind": "Rectangular", "m": 2, "n": 2}]}})


def test_run_trace_report():
    report = run(validate_config(TRACE_CONFIG))
    payload = report.payload
    assert report.exit_code == 0
    assert payload["schema_version"] == SCHEMA_VERSION
    assert payload["verdict"] == "PASS"
    decomposition = payload["decomposition"]
    assert decomposition["residual"]["max"] < 1e-9
    assert decomposition["residual_check"]["passed"]
    assert decomposition["ground_truth"]["phi"]["passed"]
    assert decomposition["eval_budget_used"] == 16 * 9 + 4 * 9 + 2 * 20
    assert len(decomposition["phi_table"][0]["values"]) == 3
    assert payload["suite"]["verdict"] == "PASS"
    assert report.phi is not None


def test_run_is_deterministic():
    first = run(validate_config(TRACE_CONFIG)).payload
    second = run(validate_config(TRACE_CONFIG)).payload
    assert strip_clock(first) == strip_clock(second)


def test_run_diagonal_cubic_records_witness():
    config = validate_config({
        "module": {"kind": "DiagonalModule", "n": 4},
        "map": {"kind": "DiagonalCubic"},
        "seed": 1,
        "samples": 20,
    })
    report = run(config)
    payload = report.payload
    assert report.exit_code == 0
    assert payload["decomposition"]["skipped"]
    assert payload["suite"]["verdict"] == "PASS"
    witness = payload["witnesses"]["additivity"]
    assert witness["gap"] == pytest.approx(6.0)
    assert witness["non_additive"]
    outcomes = {p["name"]: p["outcome"] for p in payload["suite"]["properties"]}
    assert outcomes["orthogonal_additivity"] == "PASS"
    assert outcomes["t_additivity"] == "EXPECTED_FAIL"


def test_run_perturbed_is_not_a_breach():
    config = validate_config({
        "module": {"kind": "Rectangular", "m": 2, "n": 2},
        "map": {"kind": "Perturbed", "base": {"kind": "PureQuadratic", "phi": "random"}, "epsilon": 0.5},
        "samples": 20,
    })
    report = run(config)
    assert report.exit_code == 0
    assert not report.payload["decomposition"]["residual_check"]["passed"]


def test_run_breach_keeps_partial_report(monkeypatch):
    import cli.main as runner

    def broken(*args, **kwargs):
        raise InvariantBreach("non-finite residual")

    monkeypatch.setattr(runner, "decompose", broken)
    report = run(validate_config(TRACE_CONFIG))
    assert report.exit_code == 1
    assert report.payload["verdict"] == "BREACH"
    assert report.payload["error"]["type"] == "InvariantBreach"
    assert report.payload["map"]["name"] == "PureQuadratic"
    assert report.payload["config"]["seed"] == 42


def test_run_demos():
    config = validate_config({**TRACE_CONFIG, "demos": ["harmonic", "doubling"], "harmonic_n": 8})
    payload = run(config).payload
    harmonic = payload["demos"]["harmonic"]
    assert harmonic["partial_sum_error"]["passed"]
    assert harmonic["rows"][3]["phi_value"] == pytest.approx(25 / 12, abs=1e-9)
    assert harmonic["min_doubling_increment"] >= 0.5 - 1e-9
    doubling = payload["demos"]["doubling"]
    assert doubling["relations"]["passed"]
    assert doubling["odd_plus_s_residual"]["check"]["passed"]
    assert doubling["target"]["m"] == 6


def test_main_bad_config_exits_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**TRACE_CONFIG, "module": {"kind": "Rectangular", "m": -3, "n": 3}}))
    assert main(["--config", str(path), "--quiet"]) == 2
    assert main(["--config", str(tmp_path / "missing.json"), "--quiet"]) == 2


def test_main_writes_report_and_csv(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps(TRACE_CONFIG))
    out, csv = tmp_path / "report.json", tmp_path / "phi.csv"
    assert main(["--config", str(config), "--out", str(out), "--csv", str(csv), "--seed", "7", "--quiet"]) == 0
    payload = json.loads(out.read_text())
    assert payload["meta"]["seed"] == 7
    assert payload["config"]["seed"] == 7
    assert csv.read_text().splitlines()[0] == "block,p,q,component,re,im"


def test_main_stdout(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({**TRACE_CONFIG, "samples": 5}))
    assert main(["--config", str(config), "--quiet"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "PASS"


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.json")))
def test_golden_configs_load(name):
    config = load_config(CONFIG_DIR / name)
    assert config.samples > 0


def assert_matches_golden(actual, expected, path="report"):
    if isinstance(expected, dict):
        assert isinstance(actual, dict) and sorted(actual) == sorted(expected), path
        for key in expected:
            assert_matches_golden(actual[key], expected[key], f"{path}.{key}")
    elif isinstance(expected, list):
        assert isinstance(actual, list) and len(actual) == len(expected), path
        for i, (a, e) in enumerate(zip(actual, expected)):
            assert_matches_golden(a, e, f"{path}[{i}]")
    elif isinstance(expected, bool) or expected is None or isinstance(expected, str):
        assert actual == expected, path
    else:
        assert not isinstance(actual, bool), path
        assert actual == pytest.approx(expected, rel=1e-9, abs=1e-9), path


def test_report_matches_golden():
    config = load_config(CONFIG_DIR / "golden_trace.json")
    payload = json.loads(dumps(run(config).payload))
    golden = json.loads((CONFIG_DIR / "reports" / "golden_trace.json").read_text())
    assert_matches_golden(strip_clock(payload), golden)


def main_script():
    """Run all tests."""
    print("=== Runner - CLI Test ===\n")
    sys.exit(pytest.main([__file__, "-q"]))


if __name__ == "__main__":
    main_script()
