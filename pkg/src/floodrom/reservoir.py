"""Reservoir description: grid, heterogeneous property fields, and wells.

The model is a 2D cell-centered finite-volume grid of unit thickness with
per-cell isotropic permeability and porosity.  Wells are pressure-controlled:
point injectors in single cells and one line-segment producer rasterized onto
every grid cell the segment crosses.

Flattening convention: cell ``i = row * nx + col`` with ``col`` along x and
``row`` along y.  All quantities are SI (m, m^2, Pa, Pa*s).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import GeometryError

UNIT_THICKNESS = 1.0  # m; the model is 2D with unit-thickness cells
WELLBORE_RADIUS = 0.1  # m


def _freeze(a):
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid of nx*ny cells over an lx-by-ly domain."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        # single-row (1D) grids are allowed for line-drive studies
        if self.nx < 2 or self.ny < 1:
            raise ValueError(f"grid needs at least 2x1 cells, got {self.nx}x{self.ny}")
        if self.lx <= 0 or self.ly <= 0:
            raise ValueError(f"domain extents must be positive, got {self.lx}x{self.ly}")

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * UNIT_THICKNESS

    def cell_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.ny and 0 <= col < self.nx):
            raise GeometryError(f"cell (row={row}, col={col}) outside {self.nx}x{self.ny} grid")
        return row * self.nx + col

    def cell_rowcol(self, i: int) -> tuple[int, int]:
        if not (0 <= i < self.n_cells):
            raise GeometryError(f"cell index {i} outside grid with {self.n_cells} cells")
        return divmod(i, self.nx)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (x, y) coordinates of all cell centers."""
        cols = np.arange(self.nx)
        rows = np.arange(self.ny)
        x = (cols + 0.5) * self.dx
        y = (rows + 0.5) * self.dy
        xx, yy = np.meshgrid(x, y)
        return xx.ravel(), yy.ravel()

    def contains_point(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.lx and 0.0 <= y <= self.ly

    def cell_containing(self, x: float, y: float) -> int:
        """Cell index holding point (x, y); boundary points snap inward."""
        if not self.contains_point(x, y):
            raise GeometryError(f"point ({x}, {y}) outside {self.lx}x{self.ly} domain")
        col = min(max(int(math.floor(x / self.dx)), 0), self.nx - 1)
        row = min(max(int(math.floor(y / self.dy)), 0), self.ny - 1)
        return row * self.nx + col


def build_grid(nx: int, ny: int, lx: float, ly: float) -> Grid:
    return Grid(nx, ny, lx, ly)


@dataclass(frozen=True)
class ChannelParams:
    """Parameters of the synthetic channelized permeability generator.

    A high-permeability channel of the given width follows a sinusoidal
    centerline across the domain; seeded, spatially correlated log-normal
    noise (clipped at two standard deviations in log space) multiplies both
    facies.  Porosity is an affine map of log-permeability into
    ``porosity_bounds``.
    """

    background_permeability: float  # m^2
    channel_permeability: float     # m^2
    width: float                    # m
    amplitude: float = 150.0        # m, centerline peak deviation
    n_periods: float = 1.0          # sinusoid periods across the domain
    phase: float = 0.0              # rad
    noise_sigma: float = 0.3        # std of log-normal multiplicative noise
    noise_correlation_cells: float = 2.0
    porosity_bounds: tuple[float, float] = (0.05, 0.35)

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"channel width must be positive, got {self.width}")
        if self.background_permeability <= 0:
            raise ValueError("background permeability must be positive")
        if self.channel_permeability < 10.0 * self.background_permeability:
            raise ValueError(
                "channel permeability must be at least 10x background "
                f"({self.channel_permeability} < 10*{self.background_permeability})"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        lo, hi = self.porosity_bounds
        if not (0.0 < lo < hi <= 1.0):
            raise ValueError(f"porosity bounds must satisfy 0 < lo < hi <= 1, got {lo}, {hi}")


def generate_channel_fields(
    grid: Grid, params: ChannelParams, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Generate (porosity, permeability) fields for a channelized reservoir.

    Deterministic in (grid, params, seed).  Channel cells keep a >= 10x
    contrast over the background level even after noise.
    """
    x, y = grid.cell_centers()
    centerline = grid.ly / 2.0 + params.amplitude * np.sin(
        2.0 * np.pi * params.n_periods * x / grid.lx + params.phase
    )
    in_channel = np.abs(y - centerline) <= params.width / 2.0
    perm = np.where(in_channel, params.channel_permeability, params.background_permeability)

    if params.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((grid.ny, grid.nx))
        if params.noise_correlation_cells > 0:
            g = gaussian_filter(g, sigma=params.noise_correlation_cells, mode="nearest")
            sd = g.std()
            if sd > 0:
                g = g / sd
        log_factor = np.clip(
            params.noise_sigma * g.ravel(),
            -2.0 * params.noise_sigma,
            2.0 * params.noise_sigma,
        )
        perm = perm * np.exp(log_factor)
        floor = 10.0 * params.background_permeability
        perm = np.where(in_channel, np.maximum(perm, floor), perm)

    lo, hi = params.porosity_bounds
    logk = np.log(perm)
    span = logk.max() - logk.min()
    if span > 0:
        porosity = lo + (hi - lo) * (logk - logk.min()) / span
    else:
        porosity = np.full(grid.n_cells, 0.5 * (lo + hi))
    return porosity, perm


def save_field(path, grid: Grid, values) -> None:
    """Write a per-cell field: header ``nx ny``, then row-major values."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise ValueError(f"field has shape {values.shape}, expected ({grid.n_cells},)")
    with open(path, "w") as f:
        f.write(f"{grid.nx} {grid.ny}\n")
        for row in values.reshape(grid.ny, grid.nx):
            f.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_field(path, grid: Grid | None = None) -> tuple[np.ndarray, int, int]:
    """Read a field file; returns (values, nx, ny)."""
    with open(path) as f:
        tokens = f.read().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'nx ny' header")
    nx, ny = int(tokens[0]), int(tokens[1])
    values = np.array([float(t) for t in tokens[2:]])
    if values.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {values.size}")
    if grid is not None and (nx, ny) != (grid.nx, grid.ny):
        raise ValueError(f"{path}: field is {nx}x{ny}, grid is {grid.nx}x{grid.ny}")
    return values, nx, ny


@dataclass(frozen=True)
class ReservoirModel:
    """Immutable reservoir description: grid, fields, fluid constants."""

    grid: Grid
    porosity: np.ndarray      # fraction per cell, in (0, 1]
    permeability: np.ndarray  # m^2 per cell, isotropic
    water_viscosity: float    # Pa*s
    oil_viscosity: float      # Pa*s
    connate_water_saturation: float = 0.1
    residual_oil_saturation: float = 0.1

    def __post_init__(self):
        n = self.grid.n_cells
        object.__setattr__(self, "porosity", _freeze(self.porosity))
        object.__setattr__(self, "permeability", _freeze(self.permeability))
        for name in ("porosity", "permeability"):
            v = getattr(self, name)
            if v.shape != (n,):
                raise ValueError(f"{name} has shape {v.shape}, expected ({n},)")
            if not np.all(v > 0):
                raise ValueError(f"{name} entries must be strictly positive")
            if name == "porosity" and not np.all(v <= 1.0):
                raise ValueError("porosity entries must be <= 1")
        if self.water_viscosity <= 0 or self.oil_viscosity <= 0:
            raise ValueError("viscosities must be positive")
        swc, sor = self.connate_water_saturation, self.residual_oil_saturation
        if not (0.0 <= swc and 0.0 <= sor and swc + sor < 1.0):
            raise ValueError(f"need 0 <= s_wc + s_or < 1, got s_wc={swc}, s_or={sor}")
        pv = self.porosity * self.grid.cell_volume
        object.__setattr__(self, "_pore_volumes", _freeze(pv))

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    @property
    def pore_volumes(self) -> np.ndarray:
        """Pore volume per cell (m^3)."""
        return self._pore_volumes

    @property
    def mobile_saturation_span(self) -> float:
        return 1.0 - self.connate_water_saturation - self.residual_oil_saturation


def rasterize_well_segment(
    grid: Grid, center: tuple[float, float], azimuth_deg: float, length: float
) -> np.ndarray:
    """Cells crossed by a line segment, ordered along it, without duplicates.

    The segment is centered at ``center`` with the given length; azimuth is
    measured in degrees clockwise from the +x axis.  Every cell the open
    segment passes through with positive traversal length is included
    (supercover traversal); touching a cell only at a corner point does not
    count.  A zero-length segment yields the single cell containing
    ``center``.

    Raises GeometryError if either endpoint leaves the domain.
    """
    if length < 0:
        raise ValueError(f"segment length must be nonnegative, got {length}")
    cx, cy = center
    theta = math.radians(azimuth_deg)
    ux, uy = math.cos(theta), -math.sin(theta)
    half = 0.5 * length
    x0, y0 = cx - half * ux, cy - half * uy
    x1, y1 = cx + half * ux, cy + half * uy
    for (px, py) in ((x0, y0), (x1, y1)):
        if not grid.contains_point(px, py):
            raise GeometryError(
                f"segment endpoint ({px:.3f}, {py:.3f}) outside "
                f"{grid.lx}x{grid.ly} domain"
            )
    if length == 0:
        return np.array([grid.cell_containing(cx, cy)], dtype=np.int64)

    # Parametric crossings of gridlines partition the segment into intervals,
    # one cell each; classify by interval midpoints.
    ts = {0.0, 1.0}
    for (p0, p1, d, nlines) in ((x0, x1, grid.dx, grid.nx), (y0, y1, grid.dy, grid.ny)):
        if p1 != p0:
            lo, hi = min(p0, p1), max(p0, p1)
            k_lo = int(math.ceil(lo / d))
            k_hi = int(math.floor(hi / d))
            for k in range(max(k_lo, 0), min(k_hi, nlines) + 1):
                t = (k * d - p0) / (p1 - p0)
                if 0.0 < t < 1.0:
                    ts.add(t)
    t_sorted = sorted(ts)
    cells: list[int] = []
    for ta, tb in zip(t_sorted[:-1], t_sorted[1:]):
        if tb - ta <= 1e-12:
            continue
        tm = 0.5 * (ta + tb)
        c = grid.cell_containing(x0 + tm * (x1 - x0), y0 + tm * (y1 - y0))
        if not cells or cells[-1] != c:
            cells.append(c)
    return np.array(cells, dtype=np.int64)


def peaceman_well_index(grid: Grid, cell_permeability: float) -> float:
    """Well-to-cell coupling factor (m^3) for a pressure-controlled well.

    Uses the standard equivalent radius r_e = 0.2*dx with wellbore radius
    0.1 m and unit thickness.
    """
    r_e = 0.2 * grid.dx
    if r_e <= WELLBORE_RADIUS:
        raise GeometryError(
            f"equivalent radius {r_e} m must exceed wellbore radius "
            f"{WELLBORE_RADIUS} m; grid cells are too small"
        )
    return 2.0 * math.pi * cell_permeability * UNIT_THICKNESS / math.log(r_e / WELLBORE_RADIUS)


@dataclass(frozen=True)
class InjectorSpec:
    cell: int
    bhp: float  # Pa


@dataclass(frozen=True)
class ProducerSpec:
    center: tuple[float, float]  # m
    azimuth_deg: float
    length: float  # m
    bhp: float     # Pa


@dataclass(frozen=True)
class WellConfiguration:
    """Validated wells bound to a model: cells and coupling factors resolved."""

    injectors: tuple[InjectorSpec, ...]
    producer: ProducerSpec
    producer_cells: np.ndarray       # int64, ordered along the segment
    producer_well_index: np.ndarray  # m^3 per producer cell
    injector_well_index: np.ndarray  # m^3 per injector

    def fingerprint(self) -> str:
        """Short stable hash of the well layout and controls."""
        h = hashlib.sha256()
        for inj in self.injectors:
            h.update(f"i {inj.cell} {inj.bhp:.17g}\n".encode())
        p = self.producer
        h.update(
            f"p {p.center[0]:.17g} {p.center[1]:.17g} {p.azimuth_deg:.17g} "
            f"{p.length:.17g} {p.bhp:.17g}\n".encode()
        )
        return h.hexdigest()[:12]

    def with_injector_bhps(self, bhps) -> "WellConfiguration":
        """Same layout with replaced injector pressures (cheap, no re-rasterization)."""
        if len(bhps) != len(self.injectors):
            raise ValueError(f"expected {len(self.injectors)} pressures, got {len(bhps)}")
        new_inj = tuple(
            InjectorSpec(inj.cell, float(b)) for inj, b in zip(self.injectors, bhps)
        )
        for inj in new_inj:
            if inj.bhp <= self.producer.bhp:
                raise ValueError(
                    f"injector pressure {inj.bhp} Pa must exceed producer "
                    f"pressure {self.producer.bhp} Pa"
                )
        return WellConfiguration(
            new_inj, self.producer, self.producer_cells,
            self.producer_well_index, self.injector_well_index,
        )


def build_well_configuration(
    model: ReservoirModel,
    injectors: list[InjectorSpec] | tuple[InjectorSpec, ...],
    producer: ProducerSpec,
) -> WellConfiguration:
    """Resolve wells against the model: rasterize the producer, compute
    coupling factors, and validate pressures and cell assignments."""
    grid = model.grid
    cells = rasterize_well_segment(grid, producer.center, producer.azimuth_deg, producer.length)
    if cells.size == 0:
        raise GeometryError("producer rasterized to no cells")
    inj = tuple(InjectorSpec(int(i.cell), float(i.bhp)) for i in injectors)
    seen = set()
    for w in inj:
        if not (0 <= w.cell < model.n_cells):
            raise GeometryError(f"injector cell {w.cell} outside grid")
        if w.cell in seen:
            raise ValueError(f"duplicate injector cell {w.cell}")
        seen.add(w.cell)
        if w.bhp <= producer.bhp:
            raise ValueError(
                f"injector pressure {w.bhp} Pa must exceed producer pressure "
                f"{producer.bhp} Pa"
            )
    overlap = seen.intersection(cells.tolist())
    if overlap:
        raise ValueError(f"injector and producer share cells: {sorted(overlap)}")
    prod_wi = np.array([peaceman_well_index(grid, model.permeability[c]) for c in cells])
    inj_wi = np.array([peaceman_well_index(grid, model.permeability[w.cell]) for w in inj])
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    cells.flags.writeable = False
    prod_wi.flags.writeable = False
    inj_wi.flags.writeable = False
    return WellConfiguration(inj, producer, cells, prod_wi, inj_wi)
