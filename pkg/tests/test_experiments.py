"""Experiment harness: caching, artifact layout, and determinism.

These run at the smoke profile (shortened schedule, small training budgets)
so the whole file stays cheap; the calibrated full-profile verdicts are
exercised by the acceptance suite instead.
"""

import json

import pytest

from floodrom import defaults
from floodrom.experiments import EXPERIMENT_IDS, ExperimentSuite, run_experiment
from floodrom.metrics import parse_sweep_report


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    return ExperimentSuite(tmp_path_factory.mktemp("exp"), profile="smoke", seed=0)


@pytest.fixture(scope="module")
def adapt_result(suite):
    return suite.run("adapt-azimuth")


def test_rejects_unknown_profile(tmp_path):
    with pytest.raises(ValueError):
        ExperimentSuite(tmp_path, profile="exhaustive")


def test_rejects_unknown_experiment(suite):
    with pytest.raises(KeyError):
        suite.run("adapt-porosity")


def test_smoke_scenario_is_shortened(suite):
    cfg = suite.scenario()
    assert cfg.schedule.total_days == defaults.TRAINING_SMOKE["total_days"]
    # variants inherit the shortening too
    assert suite.scenario("azimuth").schedule.total_days == cfg.schedule.total_days


def test_reference_runs_are_cached(suite):
    cfg = suite.scenario()
    assert suite.reference(cfg) is suite.reference(cfg)


def test_experiment_results_are_memoized(suite, adapt_result):
    assert suite.run("adapt-azimuth") is adapt_result


def test_artifacts_on_disk(adapt_result):
    out = adapt_result.out_dir
    assert (out / "report.csv").is_file()
    assert (out / "verdicts.json").is_file()
    rate_files = sorted(out.glob("*_rates.csv"))
    # reference plus at least one prediction
    assert len(rate_files) >= 2
    assert any("reference" in f.name for f in rate_files)


def test_report_rows_match_result(adapt_result):
    rows = parse_sweep_report((adapt_result.out_dir / "report.csv").read_text())
    assert {label for label, _, _ in rows} == set(adapt_result.rows)
    for label, oil, water in rows:
        assert oil == adapt_result.rows[label].rrse_oil
        assert water == adapt_result.rows[label].rrse_water


def test_verdicts_json_shape(adapt_result):
    payload = json.loads((adapt_result.out_dir / "verdicts.json").read_text())
    assert payload["experiment"] == "adapt-azimuth"
    assert payload["profile"] == "smoke"
    assert payload["passed"] == adapt_result.passed
    assert len(payload["verdicts"]) == len(adapt_result.verdicts)
    for rec, v in zip(payload["verdicts"], adapt_result.verdicts):
        assert rec["name"] == v.name and rec["passed"] == v.passed


def test_rerun_in_fresh_root_is_byte_identical(suite, adapt_result, tmp_path):
    again = run_experiment("adapt-azimuth", tmp_path, profile="smoke", seed=0)
    for f in sorted(adapt_result.out_dir.glob("*.csv")):
        assert (again.out_dir / f.name).read_bytes() == f.read_bytes()


def test_different_seed_changes_artifacts(suite, adapt_result, tmp_path):
    other = run_experiment("adapt-azimuth", tmp_path, profile="smoke", seed=7)
    ref = "reference_rates.csv"
    assert (other.out_dir / ref).read_bytes() == (adapt_result.out_dir / ref).read_bytes()
    pred = sorted(f.name for f in adapt_result.out_dir.glob("*_rates.csv")
                  if "reference" not in f.name)
    assert any((other.out_dir / name).read_bytes()
               != (adapt_result.out_dir / name).read_bytes() for name in pred)


def test_experiment_id_registry_is_complete(suite):
    assert len(EXPERIMENT_IDS) == 9
    assert len(set(EXPERIMENT_IDS)) == 9
