"""Scenario-configuration tests: YAML round trips, strict key checking,
variation helpers, content hashing, and config-to-object builders."""

import numpy as np
import pytest

from floodrom import defaults, units
from floodrom.config import (
    ScenarioConfig,
    TrainingPlan,
    build_model,
    build_schedule,
    build_wells,
    injector_bhp_range,
)
from floodrom.errors import ConfigError


@pytest.fixture()
def base_cfg():
    return defaults.base_scenario()


def test_yaml_roundtrip(tmp_path, base_cfg):
    path = tmp_path / "scenario.yaml"
    base_cfg.to_yaml(path)
    loaded = ScenarioConfig.from_yaml(path)
    assert loaded == base_cfg
    assert loaded.content_hash() == base_cfg.content_hash()


def test_unknown_key_is_named_in_error(base_cfg):
    raw = base_cfg.to_dict()
    raw["grid"]["cell_count"] = 10
    with pytest.raises(ConfigError, match="cell_count"):
        ScenarioConfig.from_dict(raw)
    raw2 = base_cfg.to_dict()
    raw2["turbulence"] = {}
    with pytest.raises(ConfigError, match="turbulence"):
        ScenarioConfig.from_dict(raw2)


def test_missing_and_malformed_sections(base_cfg):
    raw = base_cfg.to_dict()
    del raw["wells"]
    with pytest.raises(ConfigError, match="wells"):
        ScenarioConfig.from_dict(raw)
    raw = base_cfg.to_dict()
    raw["wells"]["injectors"] = []
    with pytest.raises(ConfigError, match="injector"):
        ScenarioConfig.from_dict(raw)
    raw = base_cfg.to_dict()
    del raw["wells"]["injectors"][0]["row"]
    with pytest.raises(ConfigError, match="row"):
        ScenarioConfig.from_dict(raw)
    raw = base_cfg.to_dict()
    raw["seed"] = "not-an-int"
    with pytest.raises(ConfigError, match="seed"):
        ScenarioConfig.from_dict(raw)
    raw = base_cfg.to_dict()
    raw["grid"] = [1, 2]
    with pytest.raises(ConfigError, match="grid"):
        ScenarioConfig.from_dict(raw)


def test_sections_are_optional_with_defaults(base_cfg):
    minimal = {"wells": base_cfg.to_dict()["wells"]}
    cfg = ScenarioConfig.from_dict(minimal)
    assert cfg.grid.nx == 40
    assert cfg.schedule.total_days == 2000.0
    assert cfg.seed == 42


def test_invalid_yaml_file(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("wells: [unclosed\n")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_yaml(bad)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    with pytest.raises(ConfigError):
        ScenarioConfig.from_yaml(empty)


def test_variation_helpers(base_cfg):
    rotated = base_cfg.with_producer(azimuth_deg=175.0)
    assert rotated.wells.producer.azimuth_deg == 175.0
    assert rotated.wells.injectors == base_cfg.wells.injectors
    assert rotated.content_hash() != base_cfg.content_hash()
    shorter = base_cfg.with_schedule(total_days=500.0)
    assert shorter.schedule.total_days == 500.0
    assert shorter.wells == base_cfg.wells
    reseeded = base_cfg.with_seed(7)
    assert reseeded.seed == 7
    assert reseeded.content_hash() != base_cfg.content_hash()
    # hashing is stable for equal content
    assert base_cfg.content_hash() == defaults.base_scenario().content_hash()


def test_build_model_channel(base_cfg):
    model = build_model(base_cfg)
    assert model.grid.nx == base_cfg.grid.nx
    assert model.n_cells == base_cfg.grid.nx * base_cfg.grid.ny
    assert np.all(model.porosity >= base_cfg.fields.porosity_min)
    assert np.all(model.porosity <= base_cfg.fields.porosity_max)
    # permeability spans background-to-channel contrast (log-normal noise
    # widens it, but the two levels must both be represented)
    background = base_cfg.fields.background_md * units.MILLIDARCY
    channel = base_cfg.fields.channel_md * units.MILLIDARCY
    assert model.permeability.min() < 3 * background
    assert model.permeability.max() > channel / 3
    assert model.water_viscosity == pytest.approx(1e-3)
    assert model.oil_viscosity == pytest.approx(5e-3)
    # deterministic in the field seed
    again = build_model(base_cfg)
    assert np.array_equal(model.permeability, again.permeability)


def test_build_model_rejects_bad_kind(base_cfg):
    raw = base_cfg.to_dict()
    raw["fields"]["kind"] = "files"
    cfg = ScenarioConfig.from_dict(raw)
    with pytest.raises(ConfigError, match="porosity_file"):
        build_model(cfg)
    raw["fields"]["kind"] = "volcanic"
    with pytest.raises(ConfigError, match="volcanic"):
        build_model(ScenarioConfig.from_dict(raw))


def test_build_model_from_files(tmp_path, base_cfg):
    from floodrom.reservoir import save_field
    model = build_model(base_cfg)
    poro_path = str(tmp_path / "poro.txt")
    perm_path = str(tmp_path / "perm.txt")
    save_field(poro_path, model.grid, model.porosity)
    save_field(perm_path, model.grid, model.permeability)
    raw = base_cfg.to_dict()
    raw["fields"].update(kind="files", porosity_file=poro_path,
                         permeability_file=perm_path)
    reloaded = build_model(ScenarioConfig.from_dict(raw))
    assert np.array_equal(reloaded.porosity, model.porosity)
    assert np.array_equal(reloaded.permeability, model.permeability)


def test_build_wells_and_schedule(base_cfg):
    model = build_model(base_cfg)
    wells = build_wells(base_cfg, model)
    assert len(wells.injectors) == len(base_cfg.wells.injectors)
    assert wells.producer.bhp == pytest.approx(
        base_cfg.wells.producer.bhp_bar * units.BAR)
    assert wells.injectors[0].bhp == pytest.approx(
        base_cfg.wells.injectors[0].bhp_bar * units.BAR)
    schedule = build_schedule(base_cfg)
    assert schedule.total_time == pytest.approx(
        base_cfg.schedule.total_days * units.DAY)
    assert schedule.recording_stride == base_cfg.schedule.recording_stride
    short = build_schedule(base_cfg, max_snapshots=5, total_time=10 * units.DAY)
    assert short.max_snapshots == 5
    assert short.total_time == 10 * units.DAY


def test_injector_bhp_range(base_cfg):
    lo, hi = injector_bhp_range(base_cfg)
    assert lo == pytest.approx(base_cfg.training.bhp_min_bar * units.BAR)
    assert hi == pytest.approx(base_cfg.training.bhp_max_bar * units.BAR)
    raw = base_cfg.to_dict()
    raw["training"]["bhp_min_bar"] = 400.0
    with pytest.raises(ConfigError, match="bhp_min_bar"):
        injector_bhp_range(ScenarioConfig.from_dict(raw))
    raw = base_cfg.to_dict()
    raw["training"].update(bhp_min_bar=50.0, bhp_max_bar=60.0)
    with pytest.raises(ConfigError, match="producer"):
        injector_bhp_range(ScenarioConfig.from_dict(raw))


def test_training_plan_invariants():
    uni = TrainingPlan.universal(240)
    assert uni.mode == "universal" and uni.azimuth_randomized
    loc = TrainingPlan.local(300)
    assert loc.mode == "local" and not loc.azimuth_randomized
    with pytest.raises(ValueError):
        TrainingPlan("universal", 10, azimuth_randomized=False)
    with pytest.raises(ValueError):
        TrainingPlan("local", 10, azimuth_randomized=True)
    with pytest.raises(ValueError):
        TrainingPlan("hybrid", 10, azimuth_randomized=True)
    with pytest.raises(ValueError):
        TrainingPlan.local(0)


def test_default_scenario_facts():
    """The pinned base scenario matches its documented well layout."""
    cfg = defaults.base_scenario()
    assert cfg.grid.nx == cfg.grid.ny == 40
    assert len(cfg.wells.injectors) == 4
    assert cfg.wells.producer.azimuth_deg == pytest.approx(63.0)
    variant = defaults.variant_scenario("azimuth")
    assert variant.wells.producer.azimuth_deg == pytest.approx(175.0)
    assert variant.content_hash() != cfg.content_hash()
    with pytest.raises(KeyError):
        defaults.variant_scenario("nonexistent")
