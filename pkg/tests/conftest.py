"""Shared fixtures: a small heterogeneous model with four injectors and a
deviated producer, cheap enough that every module's tests stay fast."""

import numpy as np
import pytest

from floodrom import units
from floodrom.reservoir import (
    Grid,
    InjectorSpec,
    ProducerSpec,
    ReservoirModel,
    build_well_configuration,
)


def make_model(nx=12, ny=10, lx=300.0, ly=250.0, seed=7) -> ReservoirModel:
    grid = Grid(nx, ny, lx, ly)
    rng = np.random.default_rng(seed)
    porosity = rng.uniform(0.15, 0.30, grid.n_cells)
    permeability = 10.0 ** rng.uniform(1.5, 3.0, grid.n_cells) * units.MILLIDARCY
    return ReservoirModel(
        grid,
        porosity,
        permeability,
        water_viscosity=1.0 * units.CENTIPOISE,
        oil_viscosity=5.0 * units.CENTIPOISE,
        connate_water_saturation=0.1,
        residual_oil_saturation=0.1,
    )


def make_wells(model, injector_bhp=250.0 * units.BAR, producer_bhp=100.0 * units.BAR,
               azimuth_deg=30.0, length=60.0):
    grid = model.grid
    injectors = [
        InjectorSpec(grid.cell_index(0, 0), injector_bhp),
        InjectorSpec(grid.cell_index(0, grid.nx - 1), injector_bhp),
        InjectorSpec(grid.cell_index(grid.ny - 1, 0), injector_bhp),
        InjectorSpec(grid.cell_index(grid.ny - 1, grid.nx - 1), injector_bhp),
    ]
    producer = ProducerSpec((grid.lx / 2, grid.ly / 2), azimuth_deg, length, producer_bhp)
    return build_well_configuration(model, injectors, producer)


@pytest.fixture(scope="session")
def tiny_model():
    return make_model()


@pytest.fixture(scope="session")
def tiny_wells(tiny_model):
    return make_wells(tiny_model)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


# One human-readable verdict line per acceptance criterion, echoed in a
# dedicated section at the end of the pytest run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture()
def criterion():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
