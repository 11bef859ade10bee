#!/usr/bin/env python3
"""Benchmark the per-step hot kernels: pure-NumPy backend vs compiled.

Builds one synthetic heterogeneous model, extracts the face/CSR geometry the
time loop really uses, then times every kernel under both backends on
identical inputs.  Outputs are also compared bit-for-bit, since backend
equivalence is part of the kernels' contract.

Usage:
    python benchmarks/bench_kernels.py [--nx 40] [--ny 40] [--repeats 200]
"""

import argparse
import time

import numpy as np

from floodrom._kernels import get_backend
from floodrom.fullsim import face_transmissibilities
from floodrom.reservoir import Grid, ReservoirModel


def build_inputs(nx: int, ny: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    grid = Grid(nx, ny, 25.0 * nx, 25.0 * ny)
    model = ReservoirModel(
        grid,
        rng.uniform(0.1, 0.3, grid.n_cells),
        10.0 ** rng.uniform(-14.0, -12.0, grid.n_cells),
        water_viscosity=1.0e-3,
        oil_viscosity=5.0e-3,
    )
    tr = face_transmissibilities(model)
    pat = tr.pattern()
    n = grid.n_cells
    s = rng.uniform(0.1, 0.9, n)
    p = rng.uniform(1.0e7, 3.0e7, n)
    lam_w = rng.uniform(0.0, 1.0e3, n)
    lam_o = rng.uniform(0.0, 2.0e2, n)
    flux = rng.normal(0.0, 1.0e-4, tr.trans.size)
    lam_face = rng.uniform(1.0e2, 1.2e3, tr.trans.size)
    args = {
        "face_mobility_avg": (tr.cell_a, tr.cell_b, s, 0.1, 0.1, 1.0e-3, 5.0e-3),
        "face_mobility_upwind": (tr.cell_a, tr.cell_b, s, p, 0.1, 0.1, 1.0e-3, 5.0e-3),
        "phase_face_fluxes": (tr.cell_a, tr.cell_b, tr.trans, p, lam_w, lam_o),
        "accumulate_cell_inflow": (tr.cell_a, tr.cell_b, flux, n),
        "accumulate_cell_outflow": (tr.cell_a, tr.cell_b, flux, n),
        "tpfa_csr_values": (tr.cell_a, tr.cell_b, tr.trans, lam_face,
                            pat.slot_ab, pat.slot_ba, pat.slot_diag,
                            pat.indices.size),
        "clipped_saturation_update": (s, rng.normal(0.0, 1.0e-5, n),
                                      3600.0, model.pore_volumes, 0.1, 0.9),
    }
    print(f"model: {nx}x{ny} cells, {tr.trans.size} faces, "
          f"{pat.indices.size} pressure-matrix entries")
    return args


def best_time(fn, args, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, default=40)
    ap.add_argument("--ny", type=int, default=40)
    ap.add_argument("--repeats", type=int, default=200,
                    help="timing repetitions per kernel (best-of)")
    ap.add_argument("--seed", type=int, default=42)
    opts = ap.parse_args()

    pure = get_backend("pure")
    try:
        compiled = get_backend("compiled")
    except ImportError:
        print("compiled backend not built; nothing to compare "
              "(pip install -e . builds it)")
        return 0

    inputs = build_inputs(opts.nx, opts.ny, opts.seed)
    width = max(len(k) for k in inputs)
    print(f"{'kernel':<{width}}  {'pure':>10}  {'compiled':>10}  "
          f"{'speedup':>8}  identical")
    for name, args in inputs.items():
        f_pure, f_comp = getattr(pure, name), getattr(compiled, name)
        identical = same(f_pure(*args), f_comp(*args))
        t_pure = best_time(f_pure, args, opts.repeats)
        t_comp = best_time(f_comp, args, opts.repeats)
        print(f"{name:<{width}}  {t_pure * 1e6:>8.1f}us  {t_comp * 1e6:>8.1f}us  "
              f"{t_pure / t_comp:>7.2f}x  {identical}")
        if not identical:
            print(f"  WARNING: {name} outputs differ between backends")
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
