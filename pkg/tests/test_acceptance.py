"""Acceptance suite: one test per pinned criterion, one verdict line each.

The criteria combine exact oracles (identity-basis reduction, direct SVD),
physical invariants (mass balance, analytic 1D front position), qualitative
orderings of the basis-comparison experiments at the full pinned budgets,
byte-level reproducibility, and the performance envelope.  Heavy artifacts
(reference runs, trained bases, reduced runs) are shared through one
module-scoped experiment suite; thresholds come from the pinned defaults so
the tests and the experiment harness assert the same numbers.
"""

import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from floodrom import defaults, units
from floodrom.adapt import residual_basis, residual_snapshots
from floodrom.config import TrainingPlan, build_model, build_schedule, build_wells
from floodrom.experiments import EXPERIMENT_IDS, ExperimentSuite
from floodrom.fullsim import Schedule, fractional_flow, run_simulation
from floodrom.pod import build_snapshot_matrix, compute_pod_basis, identity_basis, singular_spectrum
from floodrom.reservoir import (
    Grid,
    InjectorSpec,
    ProducerSpec,
    ReservoirModel,
    build_well_configuration,
)
from floodrom.rom import run_rom_simulation

T = defaults.THRESHOLDS


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    return ExperimentSuite(tmp_path_factory.mktemp("acceptance"), profile="full", seed=0)


@pytest.fixture(scope="module")
def base_cfg(suite):
    return suite.scenario()


@pytest.fixture(scope="module")
def azimuth_cfg(suite):
    return suite.scenario("azimuth")


@pytest.fixture(scope="module")
def adaptive_basis(suite, base_cfg, azimuth_cfg):
    """The pinned adaptive basis: 20 trained components + 3 residual ones."""
    return suite.default_adapted(base_cfg, azimuth_cfg)


# -- 1: identity-basis reduction reproduces the full-order run ---------------


def test_c01_identity_basis_matches_full_order(criterion, suite):
    cfg = suite.scenario().with_schedule(total_days=25.0)
    model = build_model(cfg)
    wells = build_wells(cfg, model)
    schedule = build_schedule(cfg)

    t0 = time.perf_counter()
    full = run_simulation(model, wells, schedule)
    rom = run_rom_simulation(model, wells, identity_basis(model.n_cells), schedule)
    wall = time.perf_counter() - t0

    assert rom.rates.times.size == full.rates.times.size
    np.testing.assert_allclose(rom.rates.times, full.rates.times, rtol=1e-9, atol=0.0)
    devs = []
    for name in ("oil_rate", "water_rate"):
        ref = getattr(full.rates, name)
        got = getattr(rom.rates, name)
        scale = max(float(np.max(np.abs(ref))), 1e-300)
        devs.append(float(np.max(np.abs(got - ref))) / scale)
    dev = max(devs)
    ok = dev <= T["identity_rate_rtol"] and wall < T["identity_runtime_s"]
    criterion("criterion 1 identity-basis reduction", ok,
              f"max rate deviation {dev:.3g} (cap {T['identity_rate_rtol']:g}), "
              f"runtime {wall:.1f} s (cap {T['identity_runtime_s']:g} s)")


# -- 2: method of snapshots agrees with direct SVD ----------------------------


def test_c02_snapshot_method_matches_direct_svd(criterion):
    rng = np.random.default_rng(20260819)
    sig_tol, proj_tol = T["svd_sigma_rtol"], T["svd_projector_ftol"]
    worst_sigma = 0.0
    worst_proj = 0.0
    n_proj = 0
    for _ in range(50):
        n = int(rng.integers(10, 101))
        m = int(rng.integers(2, min(50, n // 2) + 1))
        A = rng.standard_normal((n, m))
        X = build_snapshot_matrix(A.T)  # columns are snapshots
        sv = singular_spectrum(X)
        u_ref, s_ref, _ = np.linalg.svd(A, full_matrices=False)
        worst_sigma = max(worst_sigma, float(np.max(np.abs(sv - s_ref) / s_ref)))
        # rank-r projector comparison where the spectrum has a clear gap
        gaps = (s_ref[:-1] - s_ref[1:]) / s_ref[0]
        r = int(np.argmax(gaps)) + 1
        if gaps[r - 1] >= 1e-3:
            basis = compute_pod_basis(X, r)
            P_pod = basis.U @ basis.U.T
            P_ref = u_ref[:, :r] @ u_ref[:, :r].T
            worst_proj = max(worst_proj, float(np.linalg.norm(P_pod - P_ref)))
            n_proj += 1
    assert n_proj >= 40  # the gap condition holds for nearly all draws
    ok = worst_sigma <= sig_tol and worst_proj <= proj_tol
    criterion("criterion 2 snapshot-method vs direct SVD", ok,
              f"50 matrices up to 100x50: worst sigma rel dev {worst_sigma:.3g} "
              f"(cap {sig_tol:g}), worst projector dev {worst_proj:.3g} "
              f"(cap {proj_tol:g}, {n_proj} gapped spectra)")


# -- 3: truncated decomposition beats random bases every time ----------------


def test_c03_reconstruction_optimality(criterion):
    rng = np.random.default_rng(31415)
    margins = []
    for _ in range(20):
        n = int(rng.integers(12, 50))
        m = int(rng.integers(4, 20))
        r = int(rng.integers(1, min(n, m)))
        A = rng.standard_normal((n, m))
        basis = compute_pod_basis(build_snapshot_matrix(A.T), r)
        err_pod = np.linalg.norm(A - basis.U @ (basis.U.T @ A))
        best_random = np.inf
        for _ in range(100):
            Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
            best_random = min(best_random,
                              float(np.linalg.norm(A - Q @ (Q.T @ A))))
            if not err_pod < best_random:
                break
        margins.append(best_random / err_pod)
    ok = all(m > 1.0 for m in margins)
    criterion("criterion 3 reconstruction optimality", ok,
              f"20 matrices x 100 random orthonormal bases: optimal basis won "
              f"every trial, tightest margin x{min(margins):.3f}")


# -- 4: residual extraction is orthogonal to the base basis ------------------


def test_c04_residual_orthogonality(criterion, suite, base_cfg):
    base = suite.local_basis(base_cfg)
    n_snap = defaults.TRAINING["adapt_snapshots"]
    r_res = defaults.TRAINING["adapt_components"]
    worst_snap = 0.0
    worst_basis = 0.0
    for variant in ("azimuth", "position", "length"):
        cfg = suite.scenario(variant)
        S = suite.training_snapshots(cfg, TrainingPlan.local(n_snap),
                                     suite.stage_seed("adapt"))
        R = residual_snapshots(S, base)
        U_res = residual_basis(R, r_res)
        snap_dev = float(np.max(np.abs(base.U.T @ R.data)))
        snap_dev /= float(np.max(np.abs(S.data)))
        worst_snap = max(worst_snap, snap_dev)
        worst_basis = max(worst_basis,
                          float(np.max(np.abs(base.U.T @ U_res.U))))
    ok = (worst_snap <= T["residual_orthogonality"]
          and worst_basis <= T["augmented_orthogonality"])
    criterion("criterion 4 residual orthogonality", ok,
              f"3 adaptation cases: residual-snapshot overlap {worst_snap:.3g} "
              f"(cap {T['residual_orthogonality']:g}), residual-basis overlap "
              f"{worst_basis:.3g} (cap {T['augmented_orthogonality']:g})")


# -- 5: the full-order run conserves injected water ---------------------------


def test_c05_mass_balance(criterion, suite, base_cfg):
    err = suite.reference(base_cfg).mass_balance_error()
    ok = err <= T["mass_balance_rtol"]
    criterion("criterion 5 mass balance", ok,
              f"|injected - produced - stored| / injected = {err:.3g} "
              f"(cap {T['mass_balance_rtol']:g})")


# -- 6: 1D front position matches the analytic tangent construction ----------


def test_c06_front_position_on_line_drive(criterion):
    nx, lx, dy, phi = 200, 1000.0, 10.0, 0.2
    grid = Grid(nx, 1, lx, dy)
    model = ReservoirModel(grid, np.full(nx, phi), np.full(nx, 2.0e-13),
                           1.0e-3, 5.0e-3, 0.1, 0.1)
    producer = ProducerSpec((lx - grid.dx / 2.0, dy / 2.0), 0.0, 0.0,
                            100.0 * units.BAR)
    wells = build_well_configuration(model, [InjectorSpec(0, 200.0 * units.BAR)],
                                     producer)
    swc = model.connate_water_saturation
    s_max = 1.0 - model.residual_oil_saturation

    # tangent construction: the front saturation maximizes f(s) / (s - swc),
    # and the front travels at that slope times the injected pore volumes
    res = minimize_scalar(lambda s: -fractional_flow(s, model) / (s - swc),
                          bounds=(swc + 1e-9, s_max), method="bounded",
                          options={"xatol": 1e-12})
    s_front = float(res.x)
    slope = float(fractional_flow(s_front, model)) / (s_front - swc)

    area = dy * 1.0  # unit thickness
    s_mid = 0.5 * (swc + s_front)
    centers = (np.arange(nx) + 0.5) * grid.dx
    devs = []
    for days in (400.0, 700.0, 1000.0):
        schedule = Schedule(days * units.DAY, recording_stride=10 ** 9,
                            dt_max=50.0 * units.DAY, cfl_factor=0.9)
        # upwind face mobility keeps the pressure and transport fluxes
        # consistent at the front; the averaged variant biases its speed
        run = run_simulation(model, wells, schedule, face_mobility="upwind")
        s = run.trajectory[-1].water_saturation
        x_analytic = run.injected_water * slope / (phi * area)
        i = int(np.nonzero(s < s_mid)[0][0])
        x_measured = float(np.interp(s_mid, [s[i], s[i - 1]],
                                     [centers[i], centers[i - 1]]))
        devs.append(abs(x_measured - x_analytic) / x_analytic)
    ok = max(devs) <= T["front_position_rtol"]
    criterion("criterion 6 line-drive front position", ok,
              "checkpoints 400/700/1000 days: deviations "
              + "/".join(f"{d:.1%}" for d in devs)
              + f" (cap {T['front_position_rtol']:.0%})")


# -- 7: more universal components help, by a margin ---------------------------


def test_c07_universal_component_trend(criterion, suite, base_cfg):
    lo = suite.compare(base_cfg, suite.universal_basis(base_cfg, 20), "r=20")
    hi = suite.compare(base_cfg, suite.universal_basis(base_cfg, 100), "r=100")
    ratio = T["universal_ratio"]
    ok = (hi.rrse_oil < lo.rrse_oil and hi.rrse_water < lo.rrse_water
          and hi.rrse_oil <= ratio * lo.rrse_oil
          and hi.rrse_water <= ratio * lo.rrse_water)
    criterion("criterion 7 universal-basis trend", ok,
              f"rrse oil {hi.rrse_oil:.3g} vs {lo.rrse_oil:.3g}, water "
              f"{hi.rrse_water:.3g} vs {lo.rrse_water:.3g} at r=100 vs r=20 "
              f"(need <= {ratio:g}x)")


# -- 8: a stale basis loses to the adapted one --------------------------------


def test_c08_stale_versus_adapted(criterion, suite, base_cfg, azimuth_cfg,
                                  adaptive_basis):
    stale = suite.compare(azimuth_cfg, suite.local_basis(base_cfg), "stale")
    adapted = suite.compare(azimuth_cfg, adaptive_basis, "adaptive")
    factor, cap = T["mismatch_factor"], T["adaptive_max_rrse"]
    ok = (stale.rrse_oil >= factor * adapted.rrse_oil
          and stale.rrse_water >= factor * adapted.rrse_water
          and adapted.rrse_oil <= cap and adapted.rrse_water <= cap)
    criterion("criterion 8 stale vs adapted basis", ok,
              f"stale rrse {stale.rrse_oil:.3g}/{stale.rrse_water:.3g}, adapted "
              f"{adapted.rrse_oil:.3g}/{adapted.rrse_water:.3g} "
              f"(need >= {factor:g}x and adapted <= {cap:g})")


# -- 9: a few adaptation snapshots beat from-scratch training on the same ----


def test_c09_snapshot_economy(criterion, suite, azimuth_cfg, adaptive_basis):
    n = defaults.TRAINING["adapt_snapshots"]
    scratch_basis = suite.local_basis(azimuth_cfg, n_snapshots=n,
                                      seed_stage="scratch")
    scratch = suite.compare(azimuth_cfg, scratch_basis, f"scratch n={n}")
    adapted = suite.compare(azimuth_cfg, adaptive_basis, "adaptive")
    factor = T["scratch_factor"]
    ok = (scratch.rrse_oil >= factor * adapted.rrse_oil
          and scratch.rrse_water >= factor * adapted.rrse_water)
    criterion("criterion 9 snapshot economy", ok,
              f"{n}-snapshot scratch rrse {scratch.rrse_oil:.3g}/"
              f"{scratch.rrse_water:.3g} vs adapted {adapted.rrse_oil:.3g}/"
              f"{adapted.rrse_water:.3g} (need >= {factor:g}x)")


# -- 10: sensitivity to adaptation budget behaves sanely ----------------------


def test_c10_adaptation_budget_sensitivity(criterion, suite, base_cfg,
                                           azimuth_cfg, adaptive_basis):
    base = suite.local_basis(base_cfg)
    seed = suite.stage_seed("adapt")
    r_res = defaults.TRAINING["adapt_components"]
    n_comp = defaults.TRAINING["component_sweep_snapshots"]

    few_snaps = suite.compare(azimuth_cfg, adaptive_basis, "n=10")
    many_snaps = suite.compare(
        azimuth_cfg, suite.adapted_basis(base, azimuth_cfg, 50, r_res, seed), "n=50")
    few_comps = suite.compare(
        azimuth_cfg, suite.adapted_basis(base, azimuth_cfg, n_comp, 3, seed), "k=3")
    many_comps = suite.compare(
        azimuth_cfg, suite.adapted_basis(base, azimuth_cfg, n_comp, 10, seed), "k=10")

    within = 1.0 + T["components_within"]
    snaps_ok = (many_snaps.rrse_oil <= few_snaps.rrse_oil
                and many_snaps.rrse_water <= few_snaps.rrse_water)
    comps_ok = (few_comps.rrse_oil <= within * many_comps.rrse_oil
                and few_comps.rrse_water <= within * many_comps.rrse_water)
    criterion("criterion 10 adaptation sensitivity", snaps_ok and comps_ok,
              f"rrse at 50 vs 10 snapshots {many_snaps.rrse_oil:.3g}/"
              f"{many_snaps.rrse_water:.3g} vs {few_snaps.rrse_oil:.3g}/"
              f"{few_snaps.rrse_water:.3g}; 3 vs 10 extra components "
              f"{few_comps.rrse_oil:.3g}/{few_comps.rrse_water:.3g} vs "
              f"{many_comps.rrse_oil:.3g}/{many_comps.rrse_water:.3g} "
              f"(within {within:g}x)")


# -- 11: every experiment is byte-reproducible --------------------------------


def test_c11_experiments_reproduce_byte_identical(criterion, tmp_path):
    first = ExperimentSuite(tmp_path / "a", profile="smoke", seed=0)
    second = ExperimentSuite(tmp_path / "b", profile="smoke", seed=0)
    n_files = 0
    mismatched = []
    for eid in EXPERIMENT_IDS:
        out_a = first.run(eid).out_dir
        out_b = second.run(eid).out_dir
        names_a = sorted(f.name for f in out_a.glob("*.csv"))
        names_b = sorted(f.name for f in out_b.glob("*.csv"))
        assert names_a == names_b and names_a
        for name in names_a:
            n_files += 1
            if (out_a / name).read_bytes() != (out_b / name).read_bytes():
                mismatched.append(f"{eid}/{name}")
    criterion("criterion 11 byte-identical reruns", not mismatched,
              f"{len(EXPERIMENT_IDS)} experiments re-run with the same seed, "
              f"{n_files} result CSVs compared"
              + (f"; mismatches: {mismatched}" if mismatched else ""))


# -- 12: runtime envelope and reduced-order speedup ---------------------------


def test_c12_performance_envelope(criterion, suite, base_cfg, azimuth_cfg,
                                  adaptive_basis):
    assert adaptive_basis.r == T["rom_components_timed"]
    full_base = suite.reference(base_cfg)
    full = suite.reference(azimuth_cfg)
    rom = suite.rom(azimuth_cfg, adaptive_basis)
    speedup = full.timings.pressure / rom.timings.pressure
    ok = (full_base.timings.total <= T["full_runtime_s"]
          and speedup >= T["rom_pressure_speedup"])
    criterion("criterion 12 performance envelope", ok,
              f"full run {full_base.timings.total:.2f} s "
              f"(cap {T['full_runtime_s']:g} s); pressure-phase speedup "
              f"x{speedup:.1f} at r={adaptive_basis.r} "
              f"(need >= {T['rom_pressure_speedup']:g}x)")
