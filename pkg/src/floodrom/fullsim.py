"""Full-order two-phase flow simulator.

Incompressible oil/water flow without gravity or capillarity, advanced with
an implicit-pressure / explicit-saturation scheme: each step assembles a
two-point flux finite-volume pressure system from the current saturation,
solves it with a direct sparse factorization, extracts upwind phase fluxes,
and updates saturations explicitly under a CFL bound.

Pressure-controlled wells enter as Peaceman-type source terms.  Injectors
deliver water at end-point mobility; the producer splits its total outflow
by the fractional flow of the host cell.
"""

from __future__ import annotations

import io
import logging
import math
import time as _time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import splu

from . import _kernels as K
from . import units
from .errors import SingularSystemError, StabilityError
from .reservoir import (
    ProducerSpec,
    ReservoirModel,
    WellConfiguration,
    build_well_configuration,
)

logger = logging.getLogger(__name__)

DEFAULT_CFL = 0.5
DEFAULT_DT_MAX = 2.0 * units.DAY
FACE_MOBILITY_MODES = ("average", "upwind")


# ---------------------------------------------------------------------------
# states and geometry


@dataclass(frozen=True)
class SimState:
    """Full-order state: cell pressures and water saturations at one time."""

    pressure: np.ndarray
    water_saturation: np.ndarray
    time: float

    def __post_init__(self):
        p = np.asarray(self.pressure, dtype=float)
        s = np.asarray(self.water_saturation, dtype=float)
        if p.shape != s.shape or p.ndim != 1:
            raise ValueError(f"state vectors disagree: {p.shape} vs {s.shape}")
        object.__setattr__(self, "pressure", p)
        object.__setattr__(self, "water_saturation", s)


def initial_state(model: ReservoirModel, wells: WellConfiguration) -> SimState:
    """Rest state: water at connate saturation, pressure at producer BHP."""
    n = model.n_cells
    return SimState(
        np.full(n, wells.producer.bhp),
        np.full(n, model.connate_water_saturation),
        0.0,
    )


@dataclass
class _CsrPattern:
    indptr: np.ndarray
    indices: np.ndarray
    slot_ab: np.ndarray
    slot_ba: np.ndarray
    slot_diag: np.ndarray

    @property
    def nnz(self) -> int:
        return self.indices.size


@dataclass
class Transmissibilities:
    """Interior-face geometry: neighbor pairs and geometric transmissibility.

    Boundary faces carry no entries (no-flow boundary).  The CSR sparsity
    pattern of the pressure matrix is cached here so per-step assembly only
    fills values.
    """

    cell_a: np.ndarray  # int64 per face
    cell_b: np.ndarray
    trans: np.ndarray   # m^3 per face
    n_cells: int
    _pattern: _CsrPattern | None = field(default=None, repr=False, compare=False)

    def pattern(self) -> _CsrPattern:
        if self._pattern is None:
            self._pattern = self._build_pattern()
        return self._pattern

    def _build_pattern(self) -> _CsrPattern:
        n = self.n_cells
        ca, cb = self.cell_a, self.cell_b
        rows = np.concatenate([ca, cb, np.arange(n)])
        cols = np.concatenate([cb, ca, np.arange(n)])
        a0 = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
        a0.sort_indices()
        indptr, indices = a0.indptr, a0.indices

        def slot(i, j):
            lo, hi = indptr[i], indptr[i + 1]
            return int(lo + np.searchsorted(indices[lo:hi], j))

        slot_ab = np.array([slot(a, b) for a, b in zip(ca, cb)], dtype=np.int64)
        slot_ba = np.array([slot(b, a) for a, b in zip(ca, cb)], dtype=np.int64)
        slot_diag = np.array([slot(i, i) for i in range(n)], dtype=np.int64)
        return _CsrPattern(indptr, indices, slot_ab, slot_ba, slot_diag)


def face_transmissibilities(model: ReservoirModel) -> Transmissibilities:
    """Harmonic-mean transmissibility for every interior face.

    For neighbors i, j: T = (2 k_i k_j / (k_i + k_j)) * face_area / distance,
    with unit thickness.  Faces are ordered x-direction first (row-major),
    then y-direction.
    """
    g = model.grid
    k = model.permeability.reshape(g.ny, g.nx)

    kx_a, kx_b = k[:, :-1], k[:, 1:]
    tx = (2.0 * kx_a * kx_b / (kx_a + kx_b)) * (g.dy * 1.0) / g.dx
    idx = np.arange(g.n_cells).reshape(g.ny, g.nx)
    ca_x, cb_x = idx[:, :-1].ravel(), idx[:, 1:].ravel()

    ky_a, ky_b = k[:-1, :], k[1:, :]
    ty = (2.0 * ky_a * ky_b / (ky_a + ky_b)) * (g.dx * 1.0) / g.dy
    ca_y, cb_y = idx[:-1, :].ravel(), idx[1:, :].ravel()

    cell_a = np.concatenate([ca_x, ca_y]).astype(np.int64)
    cell_b = np.concatenate([cb_x, cb_y]).astype(np.int64)
    trans = np.concatenate([tx.ravel(), ty.ravel()])
    return Transmissibilities(cell_a, cell_b, trans, g.n_cells)


# ---------------------------------------------------------------------------
# constitutive relations


def relative_permeability(s_w, model: ReservoirModel):
    """Quadratic relative permeabilities on the normalized saturation.

    S = (s_w - s_wc) / (1 - s_wc - s_or); k_rw = S^2, k_ro = (1 - S)^2.
    Out-of-bounds inputs are clamped with a logged warning.
    """
    s = np.asarray(s_w, dtype=float)
    sn = (s - model.connate_water_saturation) / model.mobile_saturation_span
    bad = int(np.count_nonzero((sn < -1e-12) | (sn > 1.0 + 1e-12)))
    if bad:
        logger.warning(
            "relative_permeability: clamped %d saturation value(s) to [%g, %g]",
            bad,
            model.connate_water_saturation,
            1.0 - model.residual_oil_saturation,
        )
    sn = np.clip(sn, 0.0, 1.0)
    return sn * sn, (1.0 - sn) * (1.0 - sn)


def fractional_flow(s_w, model: ReservoirModel):
    """Water fraction of total flow, f_w = lam_w / (lam_w + lam_o)."""
    krw, kro = relative_permeability(s_w, model)
    lam_w = krw / model.water_viscosity
    lam_o = kro / model.oil_viscosity
    return lam_w / (lam_w + lam_o)


@lru_cache(maxsize=64)
def _max_dfw_dsn(inv_muw: float, inv_muo: float) -> float:
    # d f_w / d S on the normalized saturation, maximized on a dense grid;
    # f_w = a S^2 / (a S^2 + b (1-S)^2) has f' = 2 a b S (1-S) / D^2.
    s = np.linspace(0.0, 1.0, 8193)
    d = inv_muw * s * s + inv_muo * (1.0 - s) * (1.0 - s)
    return float(np.max(2.0 * inv_muw * inv_muo * s * (1.0 - s) / (d * d)))


def max_fractional_flow_derivative(model: ReservoirModel) -> float:
    """max |d f_w / d s_w|, including the normalization chain factor."""
    return (
        _max_dfw_dsn(1.0 / model.water_viscosity, 1.0 / model.oil_viscosity)
        / model.mobile_saturation_span
    )


# ---------------------------------------------------------------------------
# pressure system


@dataclass
class PressureSystem:
    """Sparse symmetric pressure system A p = b.

    ``banded_upper``, when present, is the same matrix in LAPACK upper
    banded storage (the grid Laplacian has bandwidth nx), which admits a
    much faster direct Cholesky solve than general sparse LU.
    """

    A: sp.csr_matrix
    b: np.ndarray
    banded_upper: np.ndarray | None = None


def assemble_pressure_system(
    model: ReservoirModel,
    wells: WellConfiguration,
    state: SimState,
    transmissibilities: Transmissibilities | None = None,
    face_mobility: str = "average",
) -> PressureSystem:
    """Build the implicit pressure system from the current saturation.

    Interior coupling uses total mobility evaluated, per face, at the
    arithmetic-mean saturation of the two neighbors ("average" mode) or at
    the saturation of the higher-pressure cell from the previous step
    ("upwind" mode).  Wells add WI*lambda to the diagonal and
    WI*lambda*BHP to the right-hand side; injectors use end-point water
    mobility, the producer its cell's total mobility.
    """
    if face_mobility not in FACE_MOBILITY_MODES:
        raise ValueError(f"face_mobility must be one of {FACE_MOBILITY_MODES}")
    tr = transmissibilities if transmissibilities is not None else face_transmissibilities(model)
    pat = tr.pattern()
    s = state.water_saturation
    swc, sor = model.connate_water_saturation, model.residual_oil_saturation
    if face_mobility == "average":
        lam_face = K.face_mobility_avg(
            tr.cell_a, tr.cell_b, s, swc, sor,
            model.water_viscosity, model.oil_viscosity,
        )
    else:
        lam_face = K.face_mobility_upwind(
            tr.cell_a, tr.cell_b, s, state.pressure, swc, sor,
            model.water_viscosity, model.oil_viscosity,
        )
    vals = K.tpfa_csr_values(
        tr.cell_a, tr.cell_b, tr.trans, lam_face,
        pat.slot_ab, pat.slot_ba, pat.slot_diag, pat.nnz,
    )
    b = np.zeros(model.n_cells)

    inv_muw = 1.0 / model.water_viscosity
    for k, inj in enumerate(wells.injectors):
        wi_lam = wells.injector_well_index[k] * inv_muw
        vals[pat.slot_diag[inj.cell]] += wi_lam
        b[inj.cell] += wi_lam * inj.bhp
    krw, kro = relative_permeability(s[wells.producer_cells], model)
    lam_tot = krw * inv_muw + kro / model.oil_viscosity
    for j, c in enumerate(wells.producer_cells):
        wi_lam = wells.producer_well_index[j] * lam_tot[j]
        vals[pat.slot_diag[c]] += wi_lam
        b[c] += wi_lam * wells.producer.bhp

    n = model.n_cells
    A = sp.csr_matrix((vals, pat.indices, pat.indptr), shape=(n, n))

    offsets = tr.cell_b - tr.cell_a
    bw = int(offsets.max()) if offsets.size else 0
    banded = np.zeros((bw + 1, n))
    banded[bw] = vals[pat.slot_diag]
    banded[bw - offsets, tr.cell_b] = vals[pat.slot_ab]
    return PressureSystem(A, b, banded)


def solve_pressure(system: PressureSystem) -> np.ndarray:
    """Direct solve of A p = b, verified to 1e-10 relative residual.

    Uses a banded Cholesky factorization when banded storage is available
    (the assembled matrix is SPD), falling back to general sparse LU.  One
    step of iterative refinement keeps the residual near machine precision
    even for high-contrast transmissibility fields.
    """
    A = system.A
    b = system.b
    bnorm = float(np.linalg.norm(b))
    p = None
    if system.banded_upper is not None:
        try:
            p = solveh_banded(system.banded_upper, b)
            residual = b - A @ p
            if np.linalg.norm(residual) > 1e-12 * bnorm:
                p += solveh_banded(system.banded_upper, residual)
        except np.linalg.LinAlgError:
            p = None  # not positive definite; diagnose via the LU path
    if p is None:
        try:
            lu = splu(A.tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(
                f"pressure matrix factorization failed ({exc}); the system has "
                f"n={A.shape[0]}, nnz={A.nnz}; check that at least one "
                "pressure-controlled well is present"
            ) from exc
        p = lu.solve(b)
        residual = b - A @ p
        if np.linalg.norm(residual) > 1e-12 * bnorm:
            p += lu.solve(residual)
    rnorm = float(np.linalg.norm(A @ p - b))
    if not np.all(np.isfinite(p)) or rnorm > 1e-10 * max(bnorm, 1e-300):
        cond = float("nan")
        if A.shape[0] <= 4000:
            try:
                cond = float(np.linalg.cond(A.toarray()))
            except Exception:
                pass
        raise SingularSystemError(
            f"pressure solve failed: residual {rnorm:.3e} vs |b| {bnorm:.3e} "
            f"(tolerance 1e-10 relative); condition estimate {cond:.3e}"
        )
    return p


# ---------------------------------------------------------------------------
# fluxes and transport


@dataclass
class PhaseFluxes:
    """Upwind phase fluxes and well rates for one solved pressure field.

    Face fluxes are signed positive from cell_a to cell_b.  Well source
    arrays are per cell, positive into the cell.  ``cell_outflow`` is the
    total outgoing volumetric flux per cell (faces plus wells), used by the
    stability bound.
    """

    face_water: np.ndarray
    face_oil: np.ndarray
    cell_net_water: np.ndarray   # face contributions only
    cell_outflow: np.ndarray
    well_water: np.ndarray
    well_oil: np.ndarray
    producer_water_rate: float
    producer_oil_rate: float
    injection_rate: float


def phase_fluxes(
    model: ReservoirModel,
    wells: WellConfiguration,
    state: SimState,
    pressure: np.ndarray,
    transmissibilities: Transmissibilities | None = None,
) -> PhaseFluxes:
    """Phase fluxes for a solved pressure field.

    Face phase mobilities come from the upwind (higher-pressure) cell.
    The producer's water cut is the fractional flow of each host cell;
    injectors deliver water at end-point mobility.
    """
    tr = transmissibilities if transmissibilities is not None else face_transmissibilities(model)
    s = state.water_saturation
    krw, kro = relative_permeability(s, model)
    lam_w = krw / model.water_viscosity
    lam_o = kro / model.oil_viscosity
    fw, fo = K.phase_face_fluxes(tr.cell_a, tr.cell_b, tr.trans, pressure, lam_w, lam_o)
    n = model.n_cells
    net_w = K.accumulate_cell_inflow(tr.cell_a, tr.cell_b, fw, n)
    outflow = K.accumulate_cell_outflow(tr.cell_a, tr.cell_b, fw + fo, n)

    well_w = np.zeros(n)
    well_o = np.zeros(n)
    injection = 0.0
    inv_muw = 1.0 / model.water_viscosity
    for k, inj in enumerate(wells.injectors):
        q = wells.injector_well_index[k] * inv_muw * (inj.bhp - pressure[inj.cell])
        well_w[inj.cell] += q
        injection += q
    prod_w = 0.0
    prod_o = 0.0
    for j, c in enumerate(wells.producer_cells):
        lam_tot = lam_w[c] + lam_o[c]
        q_tot = wells.producer_well_index[j] * lam_tot * (pressure[c] - wells.producer.bhp)
        f_w = lam_w[c] / lam_tot
        well_w[c] -= f_w * q_tot
        well_o[c] -= (1.0 - f_w) * q_tot
        prod_w += f_w * q_tot
        prod_o += (1.0 - f_w) * q_tot
    well_net = well_w + well_o
    outflow = outflow + np.maximum(-well_net, 0.0)
    return PhaseFluxes(
        fw, fo, net_w, outflow, well_w, well_o, prod_w, prod_o, injection,
    )


def _cfl_bound(model: ReservoirModel, fluxes: PhaseFluxes) -> float:
    dfw = max_fractional_flow_derivative(model)
    out = fluxes.cell_outflow
    mask = out > 0
    if not np.any(mask):
        return math.inf
    return float(np.min(model.pore_volumes[mask] / (out[mask] * dfw)))


def stable_dt(
    model: ReservoirModel,
    fluxes: PhaseFluxes,
    cfl_factor: float = DEFAULT_CFL,
    dt_max: float = DEFAULT_DT_MAX,
) -> float:
    """Largest stable explicit step: cfl_factor * min_i phiV_i / (out_i * max|f_w'|),
    capped at dt_max.  Zero fluxes give dt_max."""
    return min(cfl_factor * _cfl_bound(model, fluxes), dt_max)


def _transport_update(model, state, fluxes, dt):
    bound = _cfl_bound(model, fluxes)
    if dt > bound * (1.0 + 1e-9):
        raise StabilityError(
            f"dt={dt:.6e} s exceeds the explicit stability bound {bound:.6e} s"
        )
    net = fluxes.cell_net_water + fluxes.well_water
    s_new, clip_vol = K.clipped_saturation_update(
        state.water_saturation, net, dt, model.pore_volumes,
        model.connate_water_saturation, 1.0 - model.residual_oil_saturation,
    )
    clamped = float(np.sum(clip_vol))
    total_pv = float(np.sum(model.pore_volumes))
    if clamped > 1e-8 * total_pv:
        # per-step detail only; runs report the accumulated clamped volume
        logger.debug(
            "saturation clamped %.3e m^3 this step (%.2e of pore volume)",
            clamped, clamped / total_pv,
        )
    return s_new, clamped


def saturation_step(model: ReservoirModel, state: SimState, fluxes: PhaseFluxes, dt: float) -> SimState:
    """Explicit upwind saturation update over dt seconds.

    Raises StabilityError when dt exceeds the stability bound.  Results are
    clamped to [s_wc, 1 - s_or]; the clamped volume is returned per step and
    accumulated into the run result.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    s_new, _ = _transport_update(model, state, fluxes, dt)
    return SimState(state.pressure, s_new, state.time + dt)


# ---------------------------------------------------------------------------
# schedules, recording, rate series


@dataclass(frozen=True)
class ControlInterval:
    """Injector pressures (and optionally a new producer) over [t_start, t_end)."""

    t_start: float
    t_end: float
    injector_bhps: tuple[float, ...]
    producer: ProducerSpec | None = None

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise ValueError(f"empty control interval [{self.t_start}, {self.t_end})")
        object.__setattr__(self, "injector_bhps", tuple(float(b) for b in self.injector_bhps))


@dataclass(frozen=True)
class Schedule:
    """Run plan: horizon, optional control intervals, stepping and recording."""

    total_time: float
    controls: tuple[ControlInterval, ...] = ()
    recording_stride: int = 10
    dt_max: float = DEFAULT_DT_MAX
    cfl_factor: float = DEFAULT_CFL
    max_snapshots: int | None = None

    def __post_init__(self):
        if self.total_time < 0:
            raise ValueError("total_time must be nonnegative")
        if self.recording_stride < 1:
            raise ValueError("recording_stride must be >= 1")
        if self.dt_max <= 0 or not (0 < self.cfl_factor <= 1):
            raise ValueError("need dt_max > 0 and 0 < cfl_factor <= 1")
        ivs = tuple(self.controls)
        for a, b in zip(ivs[:-1], ivs[1:]):
            if b.t_start < a.t_end:
                raise ValueError("control intervals must be sorted and non-overlapping")
        object.__setattr__(self, "controls", ivs)


class SnapshotRecorder:
    """Collects flattened pressure states at the recording stride."""

    def __init__(self):
        self.times: list[float] = []
        self.pressures: list[np.ndarray] = []

    def record(self, time: float, pressure: np.ndarray) -> None:
        self.times.append(float(time))
        self.pressures.append(np.array(pressure, dtype=float, copy=True))

    @property
    def count(self) -> int:
        return len(self.pressures)


@dataclass
class RateSeries:
    """Producer rates over time, positive for production."""

    times: np.ndarray
    water_rate: np.ndarray
    oil_rate: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.water_rate = np.asarray(self.water_rate, dtype=float)
        self.oil_rate = np.asarray(self.oil_rate, dtype=float)
        if not (self.times.shape == self.water_rate.shape == self.oil_rate.shape):
            raise ValueError("rate series arrays must share one shape")

    def __len__(self) -> int:
        return self.times.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time_s,water_rate_m3s,oil_rate_m3s\n")
        for t, w, o in zip(self.times, self.water_rate, self.oil_rate):
            buf.write(f"{t:.17g},{w:.17g},{o:.17g}\n")
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_csv())

    @classmethod
    def load_csv(cls, path) -> "RateSeries":
        with open(path) as f:
            header = f.readline().strip()
            expected = "time_s,water_rate_m3s,oil_rate_m3s"
            if header != expected:
                raise ValueError(f"{path}: expected header {expected!r}, got {header!r}")
            rows = [line.split(",") for line in f.read().split()]
        if rows and any(len(r) != 3 for r in rows):
            raise ValueError(f"{path}: malformed rate rows")
        data = np.array([[float(v) for v in r] for r in rows]).reshape(-1, 3)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def build_randomized_controls(
    seed,
    base_wells: WellConfiguration,
    bhp_range: tuple[float, float],
    period: float,
    horizon: float,
    azimuth_range: tuple[float, float] | None = None,
) -> tuple[ControlInterval, ...]:
    """Pre-draw randomized control intervals of fixed duration.

    Per interval, injector pressures are drawn i.i.d. uniform over
    ``bhp_range``; when ``azimuth_range`` is given a producer azimuth is
    drawn uniform over it as well (pressures first, then azimuth, so the
    draw sequence is stable).  Deterministic in the seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = bhp_range
    if not (lo <= hi):
        raise ValueError(f"invalid pressure range ({lo}, {hi})")
    if lo <= base_wells.producer.bhp:
        raise ValueError(
            f"injector pressure range must stay above the producer pressure "
            f"{base_wells.producer.bhp} Pa, got lower bound {lo} Pa"
        )
    if period <= 0 or horizon <= 0:
        raise ValueError("period and horizon must be positive")
    n_inj = len(base_wells.injectors)
    count = int(math.ceil(horizon / period))
    out = []
    for k in range(count):
        bhps = tuple(float(b) for b in rng.uniform(lo, hi, n_inj))
        producer = None
        if azimuth_range is not None:
            az = float(rng.uniform(azimuth_range[0], azimuth_range[1]))
            producer = replace(base_wells.producer, azimuth_deg=az)
        out.append(ControlInterval(k * period, (k + 1) * period, bhps, producer))
    return tuple(out)


def save_schedule(path, schedule: Schedule) -> None:
    """Persist control intervals: one line per interval with times, injector
    pressures, and optional producer geometry."""
    with open(path, "w") as f:
        f.write(f"intervals {len(schedule.controls)}\n")
        for iv in schedule.controls:
            bhps = " ".join(f"{b:.17g}" for b in iv.injector_bhps)
            f.write(f"{iv.t_start:.17g} {iv.t_end:.17g} {len(iv.injector_bhps)} {bhps}")
            if iv.producer is None:
                f.write(" -\n")
            else:
                p = iv.producer
                f.write(
                    f" {p.center[0]:.17g} {p.center[1]:.17g} "
                    f"{p.azimuth_deg:.17g} {p.length:.17g} {p.bhp:.17g}\n"
                )


def load_schedule_controls(path) -> tuple[ControlInterval, ...]:
    """Read control intervals written by save_schedule."""
    with open(path) as f:
        head = f.readline().split()
        if len(head) != 2 or head[0] != "intervals":
            raise ValueError(f"{path}: expected 'intervals <count>' header")
        count = int(head[1])
        out = []
        for _ in range(count):
            tok = f.readline().split()
            t0, t1, nb = float(tok[0]), float(tok[1]), int(tok[2])
            bhps = tuple(float(v) for v in tok[3:3 + nb])
            rest = tok[3 + nb:]
            if rest == ["-"]:
                producer = None
            elif len(rest) == 5:
                producer = ProducerSpec(
                    (float(rest[0]), float(rest[1])),
                    float(rest[2]), float(rest[3]), float(rest[4]),
                )
            else:
                raise ValueError(f"{path}: malformed interval line {tok}")
            out.append(ControlInterval(t0, t1, bhps, producer))
    return tuple(out)


# ---------------------------------------------------------------------------
# time loop


@dataclass
class StepTimings:
    """Wall-clock phase timers accumulated over a run (seconds)."""

    assemble: float = 0.0
    pressure: float = 0.0
    transport: float = 0.0
    total: float = 0.0
    n_steps: int = 0


@dataclass
class RunResult:
    """Trajectory, producer rates, timers, and volume accounting for one run."""

    trajectory: list
    rates: RateSeries
    timings: StepTimings
    injected_water: float
    produced_water: float
    produced_oil: float
    clamped_volume: float
    initial_water_in_place: float
    final_water_in_place: float

    def mass_balance_error(self) -> float:
        """|injected - produced - accumulated| relative to injected volume."""
        stored = self.final_water_in_place - self.initial_water_in_place
        scale = max(abs(self.injected_water), 1e-300)
        return abs(self.injected_water - self.produced_water - stored) / scale


class _DirectPressure:
    """Full-order pressure path: direct sparse factorization per step."""

    def solve(self, system: PressureSystem, wells: WellConfiguration):
        return solve_pressure(system), None

    def make_state(self, pressure, aux, saturation, time):
        return SimState(pressure, saturation, time)


def _interval_at(controls, t):
    for iv in controls:
        if iv.t_start <= t < iv.t_end:
            return iv
    return None


def _next_control_boundary(controls, t):
    best = None
    for iv in controls:
        for edge in (iv.t_start, iv.t_end):
            if edge > t + 1e-12 and (best is None or edge < best):
                best = edge
    return best


def _run_impes(model, wells, schedule, recorder, pressure_path, face_mobility):
    tr = face_transmissibilities(model)
    tr.pattern()  # build the sparsity pattern before the timed loop
    state0 = initial_state(model, wells)
    s = state0.water_saturation.copy()
    p_prev = state0.pressure.copy()
    t = 0.0
    step = 0
    timings = StepTimings()
    trajectory = [pressure_path.make_state(p_prev.copy(), None, s.copy(), 0.0)]
    times, wr, orr = [], [], []
    injected = produced_w = produced_o = clamped_total = 0.0
    wip0 = float(np.sum(model.pore_volumes * s))

    base_bhps = tuple(i.bhp for i in wells.injectors)
    current = wells
    current_key = (base_bhps, wells.producer)

    t_wall0 = _time.perf_counter()
    horizon = schedule.total_time
    eps = 1e-9 * max(horizon, 1.0)
    while t < horizon - eps:
        if schedule.max_snapshots is not None and recorder is not None \
                and recorder.count >= schedule.max_snapshots:
            break
        iv = _interval_at(schedule.controls, t)
        want_bhps = iv.injector_bhps if iv is not None and iv.injector_bhps else base_bhps
        want_prod = iv.producer if iv is not None and iv.producer is not None else wells.producer
        key = (want_bhps, want_prod)
        if key != current_key:
            if want_prod == current.producer:
                current = current.with_injector_bhps(want_bhps)
            else:
                current = build_well_configuration(
                    model,
                    [replace(i, bhp=b) for i, b in zip(wells.injectors, want_bhps)],
                    want_prod,
                )
            current_key = key

        state_k = SimState(p_prev, s, t)
        t0 = _time.perf_counter()
        system = assemble_pressure_system(model, current, state_k, tr, face_mobility)
        t1 = _time.perf_counter()
        p, aux = pressure_path.solve(system, current)
        t2 = _time.perf_counter()
        timings.assemble += t1 - t0
        timings.pressure += t2 - t1

        fluxes = phase_fluxes(model, current, state_k, p, tr)

        if recorder is not None and step % schedule.recording_stride == 0:
            if schedule.max_snapshots is None or recorder.count < schedule.max_snapshots:
                recorder.record(t, p)

        dt = stable_dt(model, fluxes, schedule.cfl_factor, schedule.dt_max)
        dt = min(dt, horizon - t)
        boundary = _next_control_boundary(schedule.controls, t)
        if boundary is not None:
            dt = min(dt, boundary - t)
        if dt <= 0:
            break

        t3 = _time.perf_counter()
        s_new, clamped = _transport_update(model, state_k, fluxes, dt)
        t4 = _time.perf_counter()
        timings.transport += t4 - t3

        t_new = t + dt
        # land exactly on control boundaries so interval lookup is stable
        if boundary is not None and abs(t_new - boundary) <= 1e-9 * max(boundary, 1.0):
            t_new = boundary
        times.append(t_new)
        wr.append(fluxes.producer_water_rate)
        orr.append(fluxes.producer_oil_rate)
        injected += fluxes.injection_rate * dt
        produced_w += fluxes.producer_water_rate * dt
        produced_o += fluxes.producer_oil_rate * dt
        clamped_total += clamped

        s = s_new
        p_prev = p
        t = t_new
        step += 1
        if step % schedule.recording_stride == 0:
            trajectory.append(pressure_path.make_state(p, aux, s.copy(), t))

    if step % schedule.recording_stride != 0:
        trajectory.append(pressure_path.make_state(p_prev, None if step == 0 else aux, s.copy(), t))
    timings.total = _time.perf_counter() - t_wall0
    timings.n_steps = step
    rates = RateSeries(np.array(times), np.array(wr), np.array(orr))
    return RunResult(
        trajectory, rates, timings,
        injected, produced_w, produced_o, clamped_total,
        wip0, float(np.sum(model.pore_volumes * s)),
    )


def run_simulation(
    model: ReservoirModel,
    wells: WellConfiguration,
    schedule: Schedule,
    recorder: SnapshotRecorder | None = None,
    face_mobility: str = "average",
) -> RunResult:
    """Run the full-order simulator over the schedule.

    Per step: assemble the pressure system from the current saturation,
    solve it implicitly, extract fluxes, choose a stable dt (clipped to
    control-interval boundaries), and update saturations explicitly.  The
    recorder, when given, receives the solved pressure every
    ``recording_stride`` steps; producer rates are appended every step.
    """
    return _run_impes(model, wells, schedule, recorder, _DirectPressure(), face_mobility)
