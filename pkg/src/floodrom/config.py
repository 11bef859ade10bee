"""Scenario configuration: structured YAML in field units.

A scenario file fully determines a run: grid, property fields (generated or
loaded), fluids, wells, schedule, training controls, and the RNG seed.
Field units (bar, mD, cP, days) are converted to SI here and nowhere else.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

import yaml

from . import units
from .errors import ConfigError
from .fullsim import Schedule
from .reservoir import (
    ChannelParams,
    Grid,
    InjectorSpec,
    ProducerSpec,
    ReservoirModel,
    WellConfiguration,
    build_well_configuration,
    generate_channel_fields,
    load_field,
)


def _section(raw: dict, name: str, known: set[str], required: set[str]) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"section '{name}': unknown key(s) {unknown}")
    missing = sorted(required - set(raw))
    if missing:
        raise ConfigError(f"section '{name}': missing required key(s) {missing}")
    return raw


@dataclass(frozen=True)
class GridConfig:
    nx: int = 40
    ny: int = 40
    lx_m: float = 1000.0
    ly_m: float = 1000.0


@dataclass(frozen=True)
class FieldsConfig:
    kind: str = "channel"  # "channel" (generated) or "files"
    background_md: float = 50.0
    channel_md: float = 1000.0
    width_m: float = 250.0
    amplitude_m: float = 150.0
    periods: float = 1.0
    phase_rad: float = 0.0
    noise_sigma: float = 0.3
    noise_correlation_cells: float = 2.0
    porosity_min: float = 0.05
    porosity_max: float = 0.35
    seed: int = 17
    porosity_file: str = ""
    permeability_file: str = ""


@dataclass(frozen=True)
class FluidsConfig:
    water_viscosity_cp: float = 1.0
    oil_viscosity_cp: float = 5.0
    connate_water_saturation: float = 0.1
    residual_oil_saturation: float = 0.1


@dataclass(frozen=True)
class InjectorConfig:
    row: int
    col: int
    bhp_bar: float


@dataclass(frozen=True)
class ProducerConfig:
    x_m: float = 500.0
    y_m: float = 500.0
    azimuth_deg: float = 63.0
    length_m: float = 150.0
    bhp_bar: float = 100.0


@dataclass(frozen=True)
class WellsConfig:
    injectors: tuple[InjectorConfig, ...]
    producer: ProducerConfig


@dataclass(frozen=True)
class ScheduleConfig:
    total_days: float = 2000.0
    recording_stride: int = 10
    dt_max_days: float = 2.0
    cfl_factor: float = 0.5


@dataclass(frozen=True)
class TrainingConfig:
    bhp_min_bar: float = 250.0
    bhp_max_bar: float = 350.0
    control_period_days: float = 45.0
    azimuth_min_deg: float = 0.0
    azimuth_max_deg: float = 180.0


@dataclass(frozen=True)
class ScenarioConfig:
    grid: GridConfig
    fields: FieldsConfig
    fluids: FluidsConfig
    wells: WellsConfig
    schedule: ScheduleConfig
    training: TrainingConfig
    seed: int = 42

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = {"grid", "fields", "fluids", "wells", "schedule", "training", "seed"}
        raw = _section(raw, "<root>", known, {"wells"})
        try:
            grid = GridConfig(**_section(raw.get("grid", {}), "grid",
                                         set(GridConfig.__dataclass_fields__), set()))
            fields = FieldsConfig(**_section(raw.get("fields", {}), "fields",
                                             set(FieldsConfig.__dataclass_fields__), set()))
            fluids = FluidsConfig(**_section(raw.get("fluids", {}), "fluids",
                                             set(FluidsConfig.__dataclass_fields__), set()))
            wells_raw = _section(raw["wells"], "wells", {"injectors", "producer"},
                                 {"injectors", "producer"})
            injectors = tuple(
                InjectorConfig(**_section(w, f"wells.injectors[{k}]",
                                          set(InjectorConfig.__dataclass_fields__),
                                          {"row", "col", "bhp_bar"}))
                for k, w in enumerate(wells_raw["injectors"])
            )
            producer = ProducerConfig(**_section(wells_raw["producer"], "wells.producer",
                                                 set(ProducerConfig.__dataclass_fields__), set()))
            schedule = ScheduleConfig(**_section(raw.get("schedule", {}), "schedule",
                                                 set(ScheduleConfig.__dataclass_fields__), set()))
            training = TrainingConfig(**_section(raw.get("training", {}), "training",
                                                 set(TrainingConfig.__dataclass_fields__), set()))
        except TypeError as exc:
            raise ConfigError(f"bad field value: {exc}") from exc
        if not injectors:
            raise ConfigError("wells.injectors: need at least one injector")
        seed = raw.get("seed", 42)
        if not isinstance(seed, int):
            raise ConfigError(f"seed must be an integer, got {seed!r}")
        return cls(grid, fields, fluids, WellsConfig(injectors, producer), schedule,
                   training, seed)

    @classmethod
    def from_yaml(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            try:
                raw = yaml.safe_load(f)
            except yaml.YAMLError as exc:
                raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        if raw is None:
            raise ConfigError(f"{path}: empty config")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wells"]["injectors"] = [asdict(w) for w in self.wells.injectors]
        return d

    def to_yaml(self, path) -> None:
        with open(path, "w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    # -- variations ---------------------------------------------------------

    def with_producer(self, **changes) -> "ScenarioConfig":
        """New config with producer fields replaced (azimuth_deg, x_m, ...)."""
        producer = replace(self.wells.producer, **changes)
        return replace(self, wells=WellsConfig(self.wells.injectors, producer))

    def with_schedule(self, **changes) -> "ScenarioConfig":
        return replace(self, schedule=replace(self.schedule, **changes))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)


# ---------------------------------------------------------------------------
# builders: config -> simulation objects (unit conversion happens here)


def build_model(cfg: ScenarioConfig) -> ReservoirModel:
    g = cfg.grid
    grid = Grid(g.nx, g.ny, g.lx_m, g.ly_m)
    f = cfg.fields
    if f.kind == "channel":
        params = ChannelParams(
            background_permeability=f.background_md * units.MILLIDARCY,
            channel_permeability=f.channel_md * units.MILLIDARCY,
            width=f.width_m,
            amplitude=f.amplitude_m,
            n_periods=f.periods,
            phase=f.phase_rad,
            noise_sigma=f.noise_sigma,
            noise_correlation_cells=f.noise_correlation_cells,
            porosity_bounds=(f.porosity_min, f.porosity_max),
        )
        porosity, permeability = generate_channel_fields(grid, params, f.seed)
    elif f.kind == "files":
        if not f.porosity_file or not f.permeability_file:
            raise ConfigError("fields.kind 'files' needs porosity_file and permeability_file")
        porosity, _, _ = load_field(f.porosity_file, grid)
        permeability, _, _ = load_field(f.permeability_file, grid)
    else:
        raise ConfigError(f"fields.kind must be 'channel' or 'files', got {f.kind!r}")
    fl = cfg.fluids
    return ReservoirModel(
        grid, porosity, permeability,
        water_viscosity=fl.water_viscosity_cp * units.CENTIPOISE,
        oil_viscosity=fl.oil_viscosity_cp * units.CENTIPOISE,
        connate_water_saturation=fl.connate_water_saturation,
        residual_oil_saturation=fl.residual_oil_saturation,
    )


def build_wells(cfg: ScenarioConfig, model: ReservoirModel) -> WellConfiguration:
    grid = model.grid
    injectors = [
        InjectorSpec(grid.cell_index(w.row, w.col), w.bhp_bar * units.BAR)
        for w in cfg.wells.injectors
    ]
    p = cfg.wells.producer
    producer = ProducerSpec((p.x_m, p.y_m), p.azimuth_deg, p.length_m, p.bhp_bar * units.BAR)
    return build_well_configuration(model, injectors, producer)


def build_schedule(cfg: ScenarioConfig, controls=(), max_snapshots=None,
                   total_time=None) -> Schedule:
    s = cfg.schedule
    return Schedule(
        total_time=s.total_days * units.DAY if total_time is None else total_time,
        controls=tuple(controls),
        recording_stride=s.recording_stride,
        dt_max=s.dt_max_days * units.DAY,
        cfl_factor=s.cfl_factor,
        max_snapshots=max_snapshots,
    )


def injector_bhp_range(cfg: ScenarioConfig) -> tuple[float, float]:
    t = cfg.training
    lo, hi = t.bhp_min_bar * units.BAR, t.bhp_max_bar * units.BAR
    if not (lo <= hi):
        raise ConfigError(f"training: bhp_min_bar {t.bhp_min_bar} > bhp_max_bar {t.bhp_max_bar}")
    if lo <= cfg.wells.producer.bhp_bar * units.BAR:
        raise ConfigError("training: injector pressure range must exceed producer pressure")
    return lo, hi


@dataclass(frozen=True)
class TrainingPlan:
    """How training data is generated: well randomization and snapshot budget.

    Universal plans randomize the producer azimuth per control interval
    (so the basis sees many geometries); local plans keep wells fixed and
    randomize injector pressures only.
    """

    mode: str
    n_snapshots: int
    azimuth_randomized: bool

    def __post_init__(self):
        if self.mode not in ("universal", "local"):
            raise ValueError(f"mode must be 'universal' or 'local', got {self.mode!r}")
        if self.mode == "universal" and not self.azimuth_randomized:
            raise ValueError("universal training requires azimuth randomization")
        if self.mode == "local" and self.azimuth_randomized:
            raise ValueError("local training requires a fixed well geometry")
        if self.n_snapshots < 1:
            raise ValueError("n_snapshots must be >= 1")

    @classmethod
    def universal(cls, n_snapshots: int) -> "TrainingPlan":
        return cls("universal", n_snapshots, True)

    @classmethod
    def local(cls, n_snapshots: int) -> "TrainingPlan":
        return cls("local", n_snapshots, False)
