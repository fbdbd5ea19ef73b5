from __future__ import annotations

import json
import logging

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from thinlayer._shared import AcceptanceError, ParameterError
from thinlayer.core import LayerField, Scenario, ScenarioTag, TransmissionParams, build_reference_grid
from thinlayer.harness import (
    DEFAULTS,
    KAPPA_SEQUENCE,
    RunConfig,
    check_convergence,
    check_kurtz,
    check_oracle,
    cli_main,
    default_initial_field,
    load_config,
    run_convergence_study,
    run_gamma_sweep,
    run_kurtz_suite,
    run_oracle_study,
)


# -------------------------
# Configuration
# -------------------------
def test_defaults_build_a_config():
    cfg = load_config()
    assert cfg.as_dict() == DEFAULTS
    assert cfg.params == TransmissionParams()
    assert cfg.tag is ScenarioTag.TWO_THIN


def test_precedence_file_then_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"alpha": 2.0, "nrad": 33}), encoding="utf-8")
    cfg = load_config(path, {"nrad": 17})
    assert cfg.alpha == 2.0
    assert cfg.nrad == 17
    assert cfg.beta == DEFAULTS["beta"]


def test_unknown_keys_are_dropped_with_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="thinlayer.harness"):
        cfg = load_config(overrides={"colour": "blue", "seed": 3})
    assert cfg.seed == 3
    assert "colour" in caplog.text


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "alpha": 1.0,,\n}', encoding="utf-8")
    with pytest.raises(ParameterError, match=r"broken\.json:2:"):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")


def test_fast_lower_layer_uses_kappa_sequence():
    assert RunConfig.from_mapping({"scenario": "c"}).sequence() == KAPPA_SEQUENCE
    assert RunConfig.from_mapping({"scenario": "c", "thicknesses": [2.0, 8.0]}).sequence() == [2.0, 8.0]


# -------------------------
# CLI
# -------------------------
@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--nang", "7"],
        ["solve", "--alpha", "-1"],
        ["solve", "--scenario", "d"],
        ["bogus"],
        [],
    ],
)
def test_bad_invocations_exit_with_one(argv):
    assert cli_main(argv) == 1


def test_solve_at_time_zero_returns_the_input(tmp_path):
    grid = build_reference_grid(Scenario("a", 0.1, 0.5), 9, 9, 8)
    u0 = LayerField.from_functions(grid, lambda x, phi: x * np.sin(phi), lambda x, phi: 1.0 + np.cos(2.0 * phi) + 0.0 * x)
    source = u0.write_csv(tmp_path / "u0.csv")
    out = tmp_path / "out"
    code = cli_main(["solve", "--t", "0", "--nrad", "9", "--nang", "8", "--input", str(source), "--out", str(out)])
    assert code == 0
    solved = LayerField.read_csv(out / "solve_field.csv", grid)
    assert_array_equal(solved.values, u0.values)


def test_manifest_replays_the_run(tmp_path):
    out = tmp_path / "out"
    assert cli_main(["solve", "--t", "0.01", "--dt", "0.005", "--nrad", "9", "--nang", "8", "--seed", "7", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "solve"
    assert manifest["seed"] == 7
    assert manifest["outputs"] == ["solve_field.csv"]
    replayed = load_config(out / "manifest.json")
    assert replayed == RunConfig.from_mapping(manifest["config"])
    assert replayed.nrad == 9 and replayed.dt == 0.005


def test_literal_flag_selects_the_integral_point_rate(tmp_path):
    out = tmp_path / "out"
    argv = ["solve", "--paper-literal", "--t", "0", "--nrad", "9", "--nang", "8", "--out", str(out)]
    assert cli_main(argv) == 0
    assert load_config(out / "manifest.json").point_rate == "integral"


def test_manifest_replay_reproduces_monte_carlo_outputs(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    argv = ["mc", "--process", "limit", "--start", "upper", "--mirror", "--particles", "500", "--t-end", "0.1", "--mc-dt", "0.01"]
    assert cli_main([*argv, "--out", str(first)]) == 0
    replayed = load_config(first / "manifest.json")
    assert (replayed.process, replayed.start, replayed.mirror) == ("limit", "upper", True)

    assert cli_main(["mc", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    manifest = json.loads((second / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["mc"]["process"] == "limit_jump_diffusion"
    for name in ("mc_occupancy.csv", "mc_histogram.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_calibration_is_stored_and_reused(tmp_path):
    first, second = tmp_path / "calibrate", tmp_path / "mc"
    argv = ["calibrate-mc", "--particles", "2000", "--t-end", "0.1", "--mc-dt", "0.001", "--nrad", "17", "--dt", "0.005"]
    assert cli_main([*argv, "--out", str(first)]) == 0
    calibrated = load_config(first / "manifest.json")
    assert 0.25 <= calibrated.crossing_calibration <= 4.0
    assert calibrated.calibration_residual is not None and calibrated.calibration_residual >= 0.0

    assert cli_main(["mc", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    manifest = json.loads((second / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["mc"]["calibration"] == calibrated.crossing_calibration
    assert manifest["config"]["calibration_residual"] == calibrated.calibration_residual


def test_oracle_command_passes_at_moderate_sizes(tmp_path):
    assert cli_main(["oracle", "--sizes", "129,257,513", "--out", str(tmp_path)]) == 0
    table = pd.read_csv(tmp_path / "oracle.csv")
    assert table["ratio"].iloc[1:].between(3.5, 4.5).all()


@pytest.mark.slow
def test_full_size_oracle():
    table = run_oracle_study()
    check_oracle(table)
    assert table["order"].iloc[1:].between(1.8, 2.2).all()


# -------------------------
# Convergence towards the limit
# -------------------------
def test_convergence_at_time_zero_is_exact(params):
    grid = build_reference_grid(Scenario("a", 0.1), 17, 17, 8)
    table = run_convergence_study("a", params, None, 0.0, [0.1, 0.05], grid)
    assert (table["error"] <= 1e-12).all()
    assert list(table.columns) == ["thickness", "error", "ratio"]


def test_two_thin_members_converge(params):
    grid = build_reference_grid(Scenario("a", 0.1), 17, 17, 8)
    table = run_convergence_study("a", params, default_initial_field(grid), 0.2, [0.1, 0.05, 0.025, 0.0125], grid, dt=2e-3)
    assert np.isnan(table["ratio"].iloc[0])
    check_convergence(table, ScenarioTag.TWO_THIN)


def test_thickness_sequence_direction_is_checked(params):
    grid = build_reference_grid(Scenario("a", 0.1), 9, 9, 8)
    with pytest.raises(ParameterError, match="strictly decreasing"):
        run_convergence_study("a", params, None, 0.1, [0.05, 0.1], grid)
    with pytest.raises(ParameterError):
        run_convergence_study("a", params, None, 0.1, [0.1], grid, reference="exact")



def test_kurtz_suite_tables(params):
    grid = build_reference_grid(Scenario(ScenarioTag.TWO_THIN, 0.1), 17, 17, 8)
    elements = {
        "one": LayerField.constant(grid, 1.0),
        "cos": LayerField.from_functions(grid, lambda x, phi: np.cos(phi) + 0.0 * x, lambda x, phi: np.cos(phi) + 0.0 * x),
    }
    report = run_kurtz_suite("a", params, elements, [0.1, 0.05])
    assert list(report.slow.columns) == ["element", "thickness", "lift_gap", "slow_residual"]
    assert len(report.slow) == 4
    assert list(report.fast["element"].unique()) == ["one", "cos"]
    constant = report.slow.query("element == 'one'")
    assert (constant["lift_gap"] == 0.0).all()
    assert (constant["slow_residual"] <= 1e-10).all()
    assert report.meta == {"scenario": "two_thin", "profile": "quadratic"}


def test_gamma_sweep_starts_on_the_limit(params):
    table = run_gamma_sweep(params, gammas=[0.5, 1.0], times=(0.0, 0.25), n_rad=17, dt=1e-2)
    assert list(table.columns) == ["gamma", "t", "limit_upper", "family_upper", "gap"]
    assert len(table) == 4
    start = table.query("t == 0.0")
    assert start["limit_upper"].to_numpy() == pytest.approx([1.0, 1.0])
    assert start["gap"].to_numpy() == pytest.approx([0.0, 0.0], abs=1e-12)
    assert table["family_upper"].between(-1e-12, 1.0 + 1e-12).all()

# -------------------------
# Acceptance checks
# -------------------------
def test_acceptance_checks_flag_bad_tables(caplog):
    rising = pd.DataFrame({"thickness": [0.1, 0.05], "error": [1.0, 2.0], "ratio": [np.nan, 0.5]})
    with pytest.raises(AcceptanceError):
        check_convergence(rising, ScenarioTag.TWO_THIN)
    with caplog.at_level(logging.WARNING, logger="thinlayer.harness"):
        check_convergence(rising, ScenarioTag.THIN_OVER_THICK)
    assert "not strictly decreasing" in caplog.text

    slow = pd.DataFrame({"thickness": [0.1, 0.05], "error": [1.0, 0.9], "ratio": [np.nan, 1.1]})
    with pytest.raises(AcceptanceError):
        check_convergence(slow, ScenarioTag.TWO_THIN)

    kurtz = pd.DataFrame({"element": ["e"] * 3, "residual": [1.0, 0.5, 0.2]})
    with pytest.raises(AcceptanceError):
        check_kurtz(kurtz)
    check_kurtz(pd.DataFrame({"element": ["e"] * 2, "residual": [0.0, 0.0]}))

    with pytest.raises(AcceptanceError):
        check_oracle(pd.DataFrame({"n": [1, 2, 3], "error": [1.0, 0.5, 0.125], "ratio": [np.nan, 2.0, 4.0]}))
