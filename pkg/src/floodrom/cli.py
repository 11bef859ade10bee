"""Command-line front end: simulate, train, adapt, evaluate, reproduce.

Every command is fully determined by its config file and seed; re-running
with the same inputs rewrites byte-identical CSV payloads.  The default
output root is `results/`, overridable with the FLOODROM_OUT environment
variable or `--out`.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, defaults
from ._kernels import BACKEND_NAME
from .config import ScenarioConfig, TrainingPlan, build_model, build_schedule, build_wells
from .errors import ConfigError, FloodromError
from .experiments import (
    EXPERIMENT_IDS,
    ExperimentSuite,
    adapt_from_config,
    train_basis,
)
from .fullsim import RateSeries, SnapshotRecorder, run_simulation
from .metrics import compare_rate_series, sweep_report
from .pod import Lineage, energy_spectrum, load_basis, save_basis, save_snapshots
from .pod import SnapshotMatrix, Provenance
from .rom import run_rom_simulation

ENV_OUT = "FLOODROM_OUT"
log = logging.getLogger("floodrom")


def _default_out() -> Path:
    return Path(os.environ.get(ENV_OUT, "results"))


def _load_config(args) -> ScenarioConfig:
    cfg = (defaults.base_scenario() if args.config is None
           else ScenarioConfig.from_yaml(args.config))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _write_metadata(path: Path, cfg: ScenarioConfig, result, model_kind: str,
                    basis=None) -> None:
    tm = result.timings
    meta = {
        "backend": BACKEND_NAME,
        "config_hash": cfg.content_hash(),
        "seed": cfg.seed,
        "model": model_kind,
        "n_steps": tm.n_steps,
        "timings_s": {"assemble": tm.assemble, "pressure": tm.pressure,
                      "transport": tm.transport, "total": tm.total},
        "injected_water_m3": result.injected_water,
        "produced_water_m3": result.produced_water,
        "produced_oil_m3": result.produced_oil,
        "mass_balance_error": result.mass_balance_error(),
    }
    if basis is not None:
        meta["basis"] = {"r": basis.r, "hash": basis.content_hash(),
                         "lineage": basis.lineage.to_line()}
    with open(path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    model = build_model(cfg)
    wells = build_wells(cfg, model)
    schedule = build_schedule(cfg)
    recorder = SnapshotRecorder() if args.snapshots_out else None
    basis = None
    if args.model == "rom":
        if not args.basis:
            raise ConfigError("rom runs need --basis <file>")
        basis = load_basis(args.basis)
        result = run_rom_simulation(model, wells, basis, schedule, recorder,
                                    face_mobility=args.face_mobility)
    else:
        result = run_simulation(model, wells, schedule, recorder,
                                face_mobility=args.face_mobility)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.rates.save_csv(out / "rates.csv")
    _write_metadata(out / "metadata.json", cfg, result, args.model, basis)
    if args.snapshots_out:
        X = SnapshotMatrix(
            np.column_stack(recorder.pressures),
            Provenance(cfg.content_hash(), wells.fingerprint(),
                       cfg.schedule.recording_stride, cfg.seed))
        save_snapshots(args.snapshots_out, X)
    log.info("simulated %d steps (%s, backend %s) -> %s",
             result.timings.n_steps, args.model, BACKEND_NAME, out / "rates.csv")
    print(out / "rates.csv")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    plan = (TrainingPlan.universal(args.snapshots) if args.mode == "universal"
            else TrainingPlan.local(args.snapshots))
    seed = cfg.seed if args.seed is None else args.seed
    basis = train_basis(cfg, plan, args.components, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_basis(out / "basis.txt", basis)
    energy = energy_spectrum(basis)
    with open(out / "energy.csv", "w") as f:
        f.write("component,cumulative_energy\n")
        for k, e in enumerate(energy, start=1):
            f.write(f"{k},{e:.17g}\n")
    captured = energy[basis.r - 1]
    log.info("trained %s basis r=%d from %d snapshots; "
             "captured energy fraction %.6f", plan.mode, basis.r,
             plan.n_snapshots, captured)
    print(f"{out / 'basis.txt'} r={basis.r} energy={captured:.6f}")
    return 0


def cmd_adapt(args) -> int:
    cfg = _load_config(args)
    base = load_basis(args.basis)
    seed = cfg.seed if args.seed is None else args.seed
    if args.components == 0:
        lineage = Lineage("adaptive", base_hash=base.content_hash(),
                          r_res=0, n_snapshots=0, seed=seed)
        basis = replace(base, lineage=lineage)
    else:
        basis = adapt_from_config(base, cfg, args.snapshots, args.components, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_basis(out / "basis.txt", basis)
    log.info("adapted basis %s (r=%d) -> r=%d with %d residual components",
             base.content_hash(), base.r, basis.r, args.components)
    print(f"{out / 'basis.txt'} r={basis.r}")
    return 0


def cmd_evaluate(args) -> int:
    ref = RateSeries.load_csv(args.reference)
    pred = RateSeries.load_csv(args.prediction)
    label = args.label or Path(args.prediction).stem
    cmp_ = compare_rate_series(pred, ref, n_points=args.points,
                               prediction_id=str(args.prediction),
                               reference_id=str(args.reference))
    report = sweep_report([(label, cmp_)])
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report)
    print(f"rrse_oil={cmp_.rrse_oil:.17g} rrse_water={cmp_.rrse_water:.17g}")
    return 0


def cmd_reproduce(args) -> int:
    suite = ExperimentSuite(args.out, profile=args.profile,
                            seed=0 if args.seed is None else args.seed)
    ids = list(EXPERIMENT_IDS) if args.experiment == "all" else [args.experiment]
    all_ok = True
    for eid in ids:
        result = suite.run(eid)
        for v in result.verdicts:
            status = "PASS" if v.passed else "FAIL"
            print(f"{eid}: {v.name}: {status} ({v.detail})")
            all_ok = all_ok and v.passed
        log.info("experiment %s artifacts in %s", eid, result.out_dir)
    if args.profile == "smoke":
        # Smoke budgets exercise the pipeline, not the claims: the comparisons
        # are calibrated for full budgets and are expected to miss (or even
        # reverse) with a handful of snapshots, so report them without judging.
        print("profile smoke: verdict lines are informational; "
              "claims are adjudicated under --profile full")
        return 0
    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="floodrom",
        description="Two-phase reservoir waterflood simulator with "
                    "POD-Galerkin model reduction and adaptive basis updates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true",
                   help="debug-level logging")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(q, seed_help="seed overriding the config's rng seed"):
        q.add_argument("--config", help="scenario YAML (default: pinned base scenario)")
        q.add_argument("--seed", type=int, help=seed_help)

    q = sub.add_parser("simulate", help="run the full-order or reduced model")
    add_common(q)
    q.add_argument("--model", choices=("full", "rom"), default="full")
    q.add_argument("--basis", help="basis file (required for --model rom)")
    q.add_argument("--out", default=str(_default_out() / "simulate"),
                   help="output directory")
    q.add_argument("--snapshots-out", help="also record pressure snapshots to this file")
    q.add_argument("--face-mobility", choices=("average", "upwind"), default="average",
                   help="face total-mobility evaluation in the pressure system")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("train", help="build a POD basis from a training run")
    add_common(q)
    q.add_argument("--mode", choices=("local", "universal"), default="local",
                   help="local: fixed wells; universal: randomized producer azimuth")
    q.add_argument("--components", type=int, required=True, metavar="R",
                   help="number of basis vectors to keep")
    q.add_argument("--snapshots", type=int, required=True, metavar="M",
                   help="number of pressure snapshots to record")
    q.add_argument("--out", default=str(_default_out() / "train"))
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("adapt", help="augment a basis for a changed well configuration")
    add_common(q)
    q.add_argument("--basis", required=True, help="base basis file")
    q.add_argument("--snapshots", type=int, required=True, metavar="M",
                   help="snapshots to record under the new configuration")
    q.add_argument("--components", type=int, required=True, metavar="K",
                   help="residual components to append (0 keeps the base vectors)")
    q.add_argument("--out", default=str(_default_out() / "adapt"))
    q.set_defaults(func=cmd_adapt)

    q = sub.add_parser("evaluate", help="per-phase RRSE of a prediction vs a reference")
    q.add_argument("reference", help="reference rate CSV")
    q.add_argument("prediction", help="predicted rate CSV")
    q.add_argument("--points", type=int, default=200,
                   help="comparison grid resolution")
    q.add_argument("--label", help="row label in the report (default: prediction stem)")
    q.add_argument("--out", help="write a one-row RRSE report CSV here")
    q.set_defaults(func=cmd_evaluate)

    q = sub.add_parser("reproduce", help="run a pinned comparison experiment")
    q.add_argument("experiment", choices=EXPERIMENT_IDS + ("all",),
                   help="experiment id")
    q.add_argument("--out", default=str(_default_out()),
                   help="output root (default: $FLOODROM_OUT or ./results)")
    q.add_argument("--profile", choices=("full", "smoke"), default="full",
                   help="smoke: reduced budgets, same pipeline, "
                        "informational verdicts")
    q.add_argument("--seed", type=int, help="offset applied to every pinned stage seed")
    q.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FloodromError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
