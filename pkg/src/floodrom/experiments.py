"""Reproducible basis-strategy experiments on changed well configurations.

Each experiment compares reduced-order predictions against a full-order
reference on a pinned scenario, writes rate CSVs plus a `report.csv`
RRSE table and a `verdicts.json` summary, and returns the parsed result.
Expensive artifacts (reference runs, trained bases, reduced runs) are
cached per suite so experiments sharing a scenario reuse them.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import defaults, units
from .adapt import adapt_workflow
from .config import (
    ScenarioConfig,
    TrainingPlan,
    build_model,
    build_schedule,
    build_wells,
    injector_bhp_range,
)
from .fullsim import (
    RateSeries,
    RunResult,
    SnapshotRecorder,
    build_randomized_controls,
    run_simulation,
)
from .metrics import RateComparison, compare_rate_series, sweep_report
from .pod import Lineage, PodBasis, Provenance, SnapshotMatrix, compute_pod_basis
from .rom import run_rom_simulation

EXPERIMENT_IDS = (
    "universal-sweep",
    "local-vs-universal",
    "mismatch",
    "adapt-azimuth",
    "local-from-scratch",
    "adapt-position",
    "adapt-length",
    "sensitivity-snapshots",
    "sensitivity-components",
)

PROFILES = ("full", "smoke")


@dataclass(frozen=True)
class Verdict:
    """One named pass/fail check with a human-readable margin."""

    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ExperimentResult:
    experiment_id: str
    out_dir: Path
    rows: dict  # label -> RateComparison
    verdicts: tuple

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def training_snapshots(cfg: ScenarioConfig, plan: TrainingPlan,
                       seed: int) -> SnapshotMatrix:
    """Run the full-order model under randomized controls and collect snapshots.

    Injector pressures are redrawn each control period from the scenario's
    training range; universal plans additionally redraw the producer azimuth.
    The run stops once ``plan.n_snapshots`` pressure states are recorded.
    """
    model = build_model(cfg)
    wells = build_wells(cfg, model)
    stride = cfg.schedule.recording_stride
    dt_max = cfg.schedule.dt_max_days * units.DAY
    period = cfg.training.control_period_days * units.DAY
    horizon = (plan.n_snapshots * stride + 1) * dt_max + period
    az_range = None
    if plan.azimuth_randomized:
        az_range = (cfg.training.azimuth_min_deg, cfg.training.azimuth_max_deg)
    controls = build_randomized_controls(
        seed, wells, injector_bhp_range(cfg), period, horizon, az_range)
    recorder = SnapshotRecorder()
    schedule = build_schedule(cfg, controls=controls,
                              max_snapshots=plan.n_snapshots, total_time=horizon)
    run_simulation(model, wells, schedule, recorder)
    if recorder.count < plan.n_snapshots:
        raise RuntimeError(f"training run recorded {recorder.count} of "
                           f"{plan.n_snapshots} requested snapshots")
    prov = Provenance(cfg.content_hash(), wells.fingerprint(), stride, seed)
    return SnapshotMatrix(np.column_stack(recorder.pressures), prov)


def train_basis(cfg: ScenarioConfig, plan: TrainingPlan, r: int,
                seed: int) -> PodBasis:
    """Training pipeline: randomized-control snapshots, then rank-r POD."""
    X = training_snapshots(cfg, plan, seed)
    return compute_pod_basis(X, r, Lineage(plan.mode, cfg.content_hash(), seed=seed))


def adapt_from_config(base: PodBasis, cfg_new: ScenarioConfig, n_snapshots: int,
                      r_res: int, seed: int) -> PodBasis:
    """Adapt ``base`` to the wells in ``cfg_new`` (scenario-level wrapper)."""
    model = build_model(cfg_new)
    wells = build_wells(cfg_new, model)
    return adapt_workflow(
        base, model, wells, n_snapshots, r_res, seed,
        bhp_range=injector_bhp_range(cfg_new),
        recording_stride=cfg_new.schedule.recording_stride,
        control_period=cfg_new.training.control_period_days * units.DAY,
        dt_max=cfg_new.schedule.dt_max_days * units.DAY,
        cfl_factor=cfg_new.schedule.cfl_factor,
    )


def _rom_job(args):
    model, wells, basis, schedule = args
    return run_rom_simulation(model, wells, basis, schedule)


def _train_job(args):
    cfg, plan, r, seed = args
    return train_basis(cfg, plan, r, seed)


class ExperimentSuite:
    """Runs experiments against one output root, sharing cached artifacts.

    ``seed`` offsets every stage seed, so two suites with the same seed
    produce byte-identical artifacts and different seeds diverge everywhere.
    ``pmap`` maps a pure function over independent jobs (reduced sweep runs,
    from-scratch trainings); any `map`-shaped callable works, including
    `multiprocessing.Pool.map` — jobs communicate only via return values.
    """

    def __init__(self, out_root, profile: str = "full", seed: int = 0, pmap=map):
        if profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}, got {profile!r}")
        self.out_root = Path(out_root)
        self.out_root.mkdir(parents=True, exist_ok=True)
        self.profile = profile
        self.seed = int(seed)
        self.pmap = pmap
        self.budget = dict(defaults.TRAINING if profile == "full" else defaults.TRAINING_SMOKE)
        self._cache: dict = {}
        self._results: dict[str, ExperimentResult] = {}

    # -- scenario and seeds --------------------------------------------------

    def scenario(self, variant: str | None = None) -> ScenarioConfig:
        cfg = defaults.base_scenario() if variant is None else defaults.variant_scenario(variant)
        if self.profile == "smoke":
            cfg = cfg.with_schedule(total_days=defaults.TRAINING_SMOKE["total_days"])
        return cfg

    def stage_seed(self, stage: str) -> int:
        return defaults.SEEDS[stage] * 1_000_003 + self.seed

    # -- cached pipeline stages ----------------------------------------------

    def _model_wells(self, cfg: ScenarioConfig):
        key = ("model", cfg.content_hash())
        if key not in self._cache:
            model = build_model(cfg)
            self._cache[key] = (model, build_wells(cfg, model))
        return self._cache[key]

    def reference(self, cfg: ScenarioConfig) -> RunResult:
        """Full-order run of the scenario's pinned schedule (cached)."""
        key = ("reference", cfg.content_hash())
        if key not in self._cache:
            model, wells = self._model_wells(cfg)
            self._cache[key] = run_simulation(model, wells, build_schedule(cfg))
        return self._cache[key]

    def training_snapshots(self, cfg: ScenarioConfig, plan: TrainingPlan,
                           seed: int) -> SnapshotMatrix:
        """Pressure snapshots from a randomized-control training run (cached)."""
        key = ("snapshots", cfg.content_hash(), plan.mode, plan.n_snapshots, seed)
        if key not in self._cache:
            self._cache[key] = training_snapshots(cfg, plan, seed)
        return self._cache[key]

    def trained_basis(self, cfg: ScenarioConfig, plan: TrainingPlan, r: int,
                      seed: int) -> PodBasis:
        key = ("basis", cfg.content_hash(), plan.mode, plan.n_snapshots, r, seed)
        if key not in self._cache:
            X = self.training_snapshots(cfg, plan, seed)
            lineage = Lineage(plan.mode, cfg.content_hash(), seed=seed)
            self._cache[key] = compute_pod_basis(X, r, lineage)
        return self._cache[key]

    def trained_many(self, specs) -> list:
        """Train several independent (cfg, plan, r, seed) bases via pmap."""
        keys = [("basis", cfg.content_hash(), plan.mode, plan.n_snapshots, r, seed)
                for cfg, plan, r, seed in specs]
        todo = [(k, spec) for k, spec in zip(keys, specs) if k not in self._cache]
        if todo:
            for (k, _), basis in zip(todo, self.pmap(_train_job,
                                                     [spec for _, spec in todo])):
                self._cache[k] = basis
        return [self._cache[k] for k in keys]

    def adapted_basis(self, base: PodBasis, cfg_new: ScenarioConfig,
                      n_snapshots: int, r_res: int, seed: int) -> PodBasis:
        key = ("adapted", base.content_hash(), cfg_new.content_hash(),
               n_snapshots, r_res, seed)
        if key not in self._cache:
            model, wells = self._model_wells(cfg_new)
            self._cache[key] = adapt_workflow(
                base, model, wells, n_snapshots, r_res, seed,
                bhp_range=injector_bhp_range(cfg_new),
                recording_stride=cfg_new.schedule.recording_stride,
                control_period=cfg_new.training.control_period_days * units.DAY,
                dt_max=cfg_new.schedule.dt_max_days * units.DAY,
                cfl_factor=cfg_new.schedule.cfl_factor,
            )
        return self._cache[key]

    def rom(self, cfg: ScenarioConfig, basis: PodBasis) -> RunResult:
        """Reduced run of the scenario's pinned schedule (cached)."""
        self.rom_many(cfg, [basis])
        return self._cache[("rom", cfg.content_hash(), basis.content_hash())]

    def rom_many(self, cfg: ScenarioConfig, bases) -> None:
        """Fill the reduced-run cache for several bases via the pmap contract."""
        model, wells = self._model_wells(cfg)
        schedule = build_schedule(cfg)
        todo = [b for b in bases
                if ("rom", cfg.content_hash(), b.content_hash()) not in self._cache]
        if not todo:
            return
        jobs = [(model, wells, b, schedule) for b in todo]
        for basis, result in zip(todo, self.pmap(_rom_job, jobs)):
            self._cache[("rom", cfg.content_hash(), basis.content_hash())] = result

    def compare(self, cfg: ScenarioConfig, basis: PodBasis,
                label: str) -> RateComparison:
        return compare_rate_series(
            self.rom(cfg, basis).rates, self.reference(cfg).rates,
            prediction_id=label, reference_id=cfg.content_hash())

    # -- canonical bases shared between experiments ---------------------------

    def local_basis(self, cfg: ScenarioConfig, n_snapshots: int | None = None,
                    r: int | None = None, seed_stage: str = "train_local") -> PodBasis:
        n = self.budget["local_snapshots"] if n_snapshots is None else n_snapshots
        r_eff = self.budget["local_components"] if r is None else r
        r_eff = min(r_eff, n)
        return self.trained_basis(cfg, TrainingPlan.local(n), r_eff,
                                  self.stage_seed(seed_stage))

    def universal_basis(self, cfg: ScenarioConfig, r: int) -> PodBasis:
        n = self.budget["universal_snapshots"]
        return self.trained_basis(cfg, TrainingPlan.universal(n), r,
                                  self.stage_seed("train_universal"))

    def default_adapted(self, base_cfg: ScenarioConfig,
                        new_cfg: ScenarioConfig) -> PodBasis:
        base = self.local_basis(base_cfg)
        return self.adapted_basis(base, new_cfg, self.budget["adapt_snapshots"],
                                  self.budget["adapt_components"],
                                  self.stage_seed("adapt"))

    # -- runner ---------------------------------------------------------------

    def run(self, experiment_id: str) -> ExperimentResult:
        if experiment_id not in EXPERIMENT_IDS:
            raise KeyError(f"unknown experiment {experiment_id!r}; "
                           f"have {list(EXPERIMENT_IDS)}")
        if experiment_id not in self._results:
            rows, verdicts, rates = _RUNNERS[experiment_id](self)
            out_dir = self.out_root / experiment_id
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_experiment(out_dir, experiment_id, rows, verdicts, rates,
                              self.profile)
            self._results[experiment_id] = ExperimentResult(
                experiment_id, out_dir, dict(rows), tuple(verdicts))
        return self._results[experiment_id]

    def run_all(self):
        return [self.run(eid) for eid in EXPERIMENT_IDS]


def _write_experiment(out_dir: Path, experiment_id, rows, verdicts, rates,
                      profile) -> None:
    (out_dir / "report.csv").write_text(sweep_report(rows))
    for label, series in rates.items():
        series.save_csv(out_dir / f"{_slug(label)}_rates.csv")
    payload = {
        "experiment": experiment_id,
        "profile": profile,
        "defaults_version": defaults.DEFAULTS_VERSION,
        "passed": all(v.passed for v in verdicts),
        "verdicts": [
            {"name": v.name, "passed": v.passed, "detail": v.detail}
            for v in verdicts
        ],
    }
    with open(out_dir / "verdicts.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _both_phases(name: str, a: RateComparison, b: RateComparison, factor: float,
                 relation: str) -> Verdict:
    """Verdict that `a <= factor * b` (relation '<=') holds for oil and water."""
    pairs = (("oil", a.rrse_oil, b.rrse_oil), ("water", a.rrse_water, b.rrse_water))
    ok = all(x <= factor * y for _, x, y in pairs)
    detail = "; ".join(f"{ph}: {x:.4g} vs {factor:g}*{y:.4g}" for ph, x, y in pairs)
    return Verdict(name, ok, f"{relation}: {detail}")


def _cap(name: str, a: RateComparison, cap: float) -> Verdict:
    ok = a.rrse_oil <= cap and a.rrse_water <= cap
    return Verdict(name, ok,
                   f"rrse oil {a.rrse_oil:.4g}, water {a.rrse_water:.4g}, cap {cap:g}")


# ---------------------------------------------------------------------------
# experiment definitions


def _collect(suite, cfg, labeled_bases):
    """Compare each labeled basis against the scenario reference."""
    suite.rom_many(cfg, [b for _, b in labeled_bases])
    rows, rates = [], {"reference": suite.reference(cfg).rates}
    for label, basis in labeled_bases:
        rows.append((label, suite.compare(cfg, basis, label)))
        rates[label] = suite.rom(cfg, basis).rates
    return rows, rates


def _exp_universal_sweep(suite: ExperimentSuite):
    cfg = suite.scenario()
    sweep = suite.budget["universal_sweep"]
    rows, rates = _collect(suite, cfg,
                           [(f"r={r}", suite.universal_basis(cfg, r)) for r in sweep])
    by = dict(rows)
    lo, hi = f"r={sweep[0]}", f"r={sweep[-1] if 100 not in sweep else 100}"
    th = defaults.THRESHOLDS["universal_ratio"]
    verdicts = [
        _both_phases("more_components_help", by[hi], by[lo], 1.0, f"{hi} <= {lo}"),
        _both_phases("margin", by[hi], by[lo], th, f"{hi} <= {th}*{lo}"),
    ]
    return rows, verdicts, rates


def _exp_local_vs_universal(suite: ExperimentSuite):
    cfg = suite.scenario()
    r_lo = suite.budget["local_components"]
    r_hi = suite.budget["universal_components"]
    rows, rates = _collect(suite, cfg, [
        (f"local r={r_lo}", suite.local_basis(cfg)),
        (f"universal r={r_lo}", suite.universal_basis(cfg, r_lo)),
        (f"universal r={r_hi}", suite.universal_basis(cfg, r_hi)),
    ])
    by = dict(rows)
    verdicts = [
        _both_phases("local_beats_universal_at_same_rank",
                     by[f"local r={r_lo}"], by[f"universal r={r_lo}"], 1.0,
                     "local <= universal at equal r"),
        _both_phases("universal_needs_more_components",
                     by[f"universal r={r_hi}"], by[f"universal r={r_lo}"], 1.0,
                     f"universal r={r_hi} <= r={r_lo}"),
    ]
    return rows, verdicts, rates


def _exp_mismatch(suite: ExperimentSuite):
    base_cfg, new_cfg = suite.scenario(), suite.scenario("azimuth")
    stale = suite.local_basis(base_cfg)
    adapted = suite.default_adapted(base_cfg, new_cfg)
    rows, rates = _collect(suite, new_cfg, [
        (f"stale r={stale.r}", stale),
        (f"adaptive r={adapted.r}", adapted),
    ])
    by = dict(rows)
    factor = defaults.THRESHOLDS["mismatch_factor"]
    cap = defaults.THRESHOLDS["adaptive_max_rrse"]
    s, a = by[f"stale r={stale.r}"], by[f"adaptive r={adapted.r}"]
    verdicts = [
        _both_phases("adaptive_beats_stale_by_factor", a, s, 1.0 / factor,
                     f"adaptive <= stale/{factor:g}"),
        _cap("adaptive_under_cap", a, cap),
    ]
    return rows, verdicts, rates


def _exp_adapt_azimuth(suite: ExperimentSuite):
    base_cfg, new_cfg = suite.scenario(), suite.scenario("azimuth")
    adapted = suite.default_adapted(base_cfg, new_cfg)
    fresh = suite.local_basis(new_cfg, seed_stage="scratch")
    rows, rates = _collect(suite, new_cfg, [
        (f"adaptive r={adapted.r}", adapted),
        (f"fresh local r={fresh.r}", fresh),
    ])
    by = dict(rows)
    cap = defaults.THRESHOLDS["adaptive_max_rrse"]
    verdicts = [_cap("adaptive_under_cap", by[f"adaptive r={adapted.r}"], cap)]
    return rows, verdicts, rates


def _exp_local_from_scratch(suite: ExperimentSuite):
    base_cfg, new_cfg = suite.scenario(), suite.scenario("azimuth")
    r_nominal = suite.budget["scratch_components"]
    sweep_ns = suite.budget["scratch_sweep"]
    specs = [(new_cfg, TrainingPlan.local(n), min(r_nominal, n),
              suite.stage_seed("scratch")) for n in sweep_ns]
    labeled = [(f"n={n}", b) for n, b in zip(sweep_ns, suite.trained_many(specs))]
    adapted = suite.default_adapted(base_cfg, new_cfg)
    labeled.append((f"adaptive r={adapted.r}", adapted))
    rows, rates = _collect(suite, new_cfg, labeled)
    by = dict(rows)
    sweep = suite.budget["scratch_sweep"]
    factor = defaults.THRESHOLDS["scratch_factor"]
    verdicts = [
        _both_phases("snapshots_reduce_error", by[f"n={sweep[-1]}"],
                     by[f"n={sweep[0]}"], 1.0, f"n={sweep[-1]} <= n={sweep[0]}"),
        _both_phases("adaptive_beats_small_scratch",
                     by[f"adaptive r={adapted.r}"], by[f"n={sweep[0]}"],
                     1.0 / factor, f"adaptive <= scratch(n={sweep[0]})/{factor:g}"),
    ]
    return rows, verdicts, rates


def _exp_adapt_variant(suite: ExperimentSuite, variant: str):
    base_cfg, new_cfg = suite.scenario(), suite.scenario(variant)
    stale = suite.local_basis(base_cfg)
    adapted = suite.default_adapted(base_cfg, new_cfg)
    rows, rates = _collect(suite, new_cfg, [
        (f"stale r={stale.r}", stale),
        (f"adaptive r={adapted.r}", adapted),
    ])
    by = dict(rows)
    verdicts = [
        _both_phases("adaptive_improves_on_stale",
                     by[f"adaptive r={adapted.r}"], by[f"stale r={stale.r}"],
                     1.0, "adaptive <= stale"),
    ]
    return rows, verdicts, rates


def _exp_sensitivity_snapshots(suite: ExperimentSuite):
    base_cfg, new_cfg = suite.scenario(), suite.scenario("azimuth")
    base = suite.local_basis(base_cfg)
    r_res = suite.budget["adapt_components"]
    labeled = []
    for n in suite.budget["snapshot_sweep"]:
        basis = suite.adapted_basis(base, new_cfg, n, r_res, suite.stage_seed("adapt"))
        labeled.append((f"n={n}", basis))
    rows, rates = _collect(suite, new_cfg, labeled)
    by = dict(rows)
    sweep = suite.budget["snapshot_sweep"]
    verdicts = [
        _both_phases("more_snapshots_no_worse", by[f"n={sweep[-1]}"],
                     by[f"n={sweep[0]}"], 1.0, f"n={sweep[-1]} <= n={sweep[0]}"),
    ]
    return rows, verdicts, rates


def _exp_sensitivity_components(suite: ExperimentSuite):
    base_cfg, new_cfg = suite.scenario(), suite.scenario("azimuth")
    base = suite.local_basis(base_cfg)
    n = suite.budget["component_sweep_snapshots"]
    labeled = []
    for k in suite.budget["component_sweep"]:
        basis = suite.adapted_basis(base, new_cfg, n, k, suite.stage_seed("adapt"))
        labeled.append((f"k={k}", basis))
    rows, rates = _collect(suite, new_cfg, labeled)
    by = dict(rows)
    sweep = suite.budget["component_sweep"]
    k_few = 3 if 3 in sweep else sweep[min(1, len(sweep) - 1)]
    k_many = sweep[-1]
    within = defaults.THRESHOLDS["components_within"]
    verdicts = [
        _both_phases("few_components_suffice", by[f"k={k_few}"],
                     by[f"k={k_many}"], 1.0 + within,
                     f"k={k_few} <= {1 + within:g}*k={k_many}"),
    ]
    return rows, verdicts, rates


_RUNNERS = {
    "universal-sweep": _exp_universal_sweep,
    "local-vs-universal": _exp_local_vs_universal,
    "mismatch": _exp_mismatch,
    "adapt-azimuth": _exp_adapt_azimuth,
    "local-from-scratch": _exp_local_from_scratch,
    "adapt-position": lambda s: _exp_adapt_variant(s, "position"),
    "adapt-length": lambda s: _exp_adapt_variant(s, "length"),
    "sensitivity-snapshots": _exp_sensitivity_snapshots,
    "sensitivity-components": _exp_sensitivity_components,
}


def run_experiment(experiment_id: str, out_root, profile: str = "full",
                   seed: int = 0) -> ExperimentResult:
    """Run one experiment in a fresh suite (no cross-experiment cache)."""
    return ExperimentSuite(out_root, profile=profile, seed=seed).run(experiment_id)
