"""Pinned default scenario, training budgets, seeds, and verdict thresholds.

Everything an experiment compares against lives here, versioned, so result
directories can be traced to the defaults that produced them.  Edit
thresholds here, never inline in experiment code.
"""

from __future__ import annotations

DEFAULTS_VERSION = 1

# Base evaluation scenario: channelized quarter-kilometer-scale field with
# four corner injectors and one deviated producer through the channel.
BASE_SCENARIO: dict = {
    "seed": 42,
    "grid": {"nx": 40, "ny": 40, "lx_m": 1000.0, "ly_m": 1000.0},
    "fields": {
        "kind": "channel",
        "background_md": 50.0,
        "channel_md": 1000.0,
        "width_m": 250.0,
        "amplitude_m": 150.0,
        "periods": 1.0,
        "phase_rad": 0.0,
        "noise_sigma": 0.3,
        "noise_correlation_cells": 2.0,
        "porosity_min": 0.05,
        "porosity_max": 0.35,
        "seed": 17,
    },
    "fluids": {
        "water_viscosity_cp": 1.0,
        "oil_viscosity_cp": 5.0,
        "connate_water_saturation": 0.1,
        "residual_oil_saturation": 0.1,
    },
    "wells": {
        "injectors": [
            {"row": 0, "col": 0, "bhp_bar": 300.0},
            {"row": 0, "col": 39, "bhp_bar": 300.0},
            {"row": 39, "col": 0, "bhp_bar": 300.0},
            {"row": 39, "col": 39, "bhp_bar": 300.0},
        ],
        "producer": {
            "x_m": 500.0,
            "y_m": 500.0,
            "azimuth_deg": 63.0,
            "length_m": 150.0,
            "bhp_bar": 100.0,
        },
    },
    "schedule": {
        "total_days": 2000.0,
        "recording_stride": 10,
        "dt_max_days": 2.0,
        "cfl_factor": 0.5,
    },
    "training": {
        "bhp_min_bar": 250.0,
        "bhp_max_bar": 350.0,
        "control_period_days": 45.0,
        "azimuth_min_deg": 0.0,
        "azimuth_max_deg": 180.0,
    },
}

# Changed well configurations the adaptive workflow is evaluated on.
PRODUCER_VARIANTS: dict = {
    "azimuth": {"azimuth_deg": 175.0},
    "position": {"x_m": 600.0, "y_m": 550.0},
    "length": {"length_m": 300.0},
}

# Training budgets (full profile).
TRAINING: dict = {
    "local_snapshots": 300,
    "local_components": 20,
    "universal_snapshots": 240,
    "universal_components": 100,
    "universal_sweep": (20, 40, 60, 80, 100, 120),
    "adapt_snapshots": 10,
    "adapt_components": 3,
    "scratch_sweep": (10, 50, 150, 300),
    "scratch_components": 20,
    "snapshot_sweep": (10, 20, 50),
    "component_sweep": (1, 3, 5, 10),
    "component_sweep_snapshots": 50,
}

# Reduced budgets for quick end-to-end exercises (same code paths).
TRAINING_SMOKE: dict = {
    "local_snapshots": 24,
    "local_components": 8,
    "universal_snapshots": 30,
    "universal_components": 12,
    "universal_sweep": (4, 12),
    "adapt_snapshots": 5,
    "adapt_components": 2,
    "scratch_sweep": (5, 20),
    "scratch_components": 8,
    "snapshot_sweep": (5, 15),
    "component_sweep": (1, 2),
    "component_sweep_snapshots": 15,
    # shortest pinned window in which every scenario variant sees water
    # breakthrough (earliest arrival is ~day 640, latest ~day 830)
    "total_days": 1000.0,
}

# Seeds: one stream per pipeline stage so stages stay independent.
SEEDS: dict = {
    "train_local": 101,
    "train_universal": 202,
    "adapt": 303,
    "scratch": 404,
}

# Verdict thresholds asserted by experiments and the acceptance suite.
THRESHOLDS: dict = {
    "identity_rate_rtol": 1e-8,       # identity-basis ROM vs full rates
    "identity_runtime_s": 60.0,
    "svd_sigma_rtol": 1e-9,           # method of snapshots vs direct SVD
    "svd_projector_ftol": 1e-7,
    "residual_orthogonality": 1e-9,   # max |U_o^T S_res| / max |S|
    "augmented_orthogonality": 1e-8,  # max |U_o^T U_res|
    "mass_balance_rtol": 1e-6,
    "front_position_rtol": 0.05,      # 1D waterflood front vs analytic
    "universal_ratio": 0.5,           # RRSE(r=100) <= ratio * RRSE(r=20)
    "mismatch_factor": 2.0,           # stale-basis RRSE >= factor * adaptive
    "adaptive_max_rrse": 0.35,        # adaptive per-phase RRSE cap
    "scratch_factor": 1.5,            # 10-snapshot scratch >= factor * adaptive
    "components_within": 0.25,        # RRSE(3 comps) <= (1+x) * RRSE(10 comps)
    "full_runtime_s": 10.0,
    "rom_pressure_speedup": 2.0,      # full/rom pressure-phase time ratio
    "rom_components_timed": 23,
}


def base_scenario():
    """The pinned base scenario as a ScenarioConfig."""
    from .config import ScenarioConfig

    return ScenarioConfig.from_dict(BASE_SCENARIO)


def variant_scenario(name: str):
    """Base scenario with one producer parameter changed ('azimuth', ...)."""
    if name not in PRODUCER_VARIANTS:
        raise KeyError(f"unknown producer variant {name!r}; "
                       f"have {sorted(PRODUCER_VARIANTS)}")
    return base_scenario().with_producer(**PRODUCER_VARIANTS[name])
