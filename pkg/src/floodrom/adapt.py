"""Residual-driven basis adaptation for changed well configurations.

Given a basis trained on one well layout and a handful of snapshots from a
new layout, the adaptation extracts what the old basis misses (projection
residuals), computes the leading residual directions, and appends them.
The workflow:

1. run the full-order model under the new configuration with randomized
   injector controls until the requested snapshots are recorded;
2. stack them into a snapshot matrix;
3. subtract the old basis's projection from every column;
4. compute the residual singular vectors;
5. keep the leading components (noise-guarded);
6. append them to the old basis and re-orthonormalize.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import fullsim
from .errors import AugmentationError, RankError
from .pod import (
    Lineage,
    PodBasis,
    Provenance,
    SnapshotMatrix,
    compute_pod_basis,
    singular_spectrum,
)
from .reservoir import ReservoirModel, WellConfiguration

# Residual directions with singular values at or below this fraction of the
# leading residual singular value are treated as noise and refused.
RESIDUAL_NOISE_FLOOR = 1e-8


@dataclass(frozen=True)
class ResidualSnapshotMatrix:
    """Projection residuals of snapshots against a base basis."""

    data: np.ndarray
    base_basis_hash: str

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 2 or d.shape[1] < 1:
            raise ValueError(f"residual matrix must be 2-D with >= 1 column, got {d.shape}")
        object.__setattr__(self, "data", d)


def residual_snapshots(S: SnapshotMatrix, U_o: PodBasis) -> ResidualSnapshotMatrix:
    """Remove the base basis's span from every snapshot column.

    Each column s becomes s - U_o (U_o^T s).  A second projection pass
    scrubs round-off so the residuals are orthogonal to the basis to near
    machine precision.
    """
    if S.n != U_o.n:
        raise ValueError(f"snapshots have n={S.n}, basis expects n={U_o.n}")
    U = U_o.U
    R = S.data - U @ (U.T @ S.data)
    R = R - U @ (U.T @ R)
    return ResidualSnapshotMatrix(R, U_o.content_hash())


def residual_basis(R: ResidualSnapshotMatrix, r_res: int) -> PodBasis:
    """Leading residual directions, refusing components that are noise.

    Components with singular value <= 1e-8 of the leading residual singular
    value do not represent coherent missing physics; requesting more than
    the guarded rank raises RankError with the achievable count.
    """
    if r_res < 1:
        raise ValueError(f"r_res must be >= 1, got {r_res}")
    X = SnapshotMatrix(R.data)
    sv = singular_spectrum(X)
    if sv.size == 0 or sv[0] <= 0:
        raise RankError(r_res, 0)
    usable = int(np.count_nonzero(sv > RESIDUAL_NOISE_FLOOR * sv[0]))
    if r_res > usable:
        raise RankError(r_res, usable)
    lineage = Lineage("residual", config=R.base_basis_hash)
    return compute_pod_basis(X, r_res, lineage=lineage)


def _mgs_sweep(q: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt pass; raises when a column loses rank."""
    q = q.copy()
    for j in range(q.shape[1]):
        v = q[:, j]
        for i in range(j):
            v = v - (q[:, i] @ v) * q[:, i]
        nrm = float(np.linalg.norm(v))
        if nrm < 1e-8:
            raise AugmentationError(
                f"column {j} is numerically dependent on the preceding columns "
                f"(post-scrub norm {nrm:.3e})"
            )
        q[:, j] = v / nrm
    return q


def augment_basis(U_o: PodBasis, U_res: PodBasis) -> PodBasis:
    """Append residual components to a basis and re-orthonormalize.

    The result spans at least span(U_o); its spectrum is stored
    column-aligned (base block then residual block, each nonincreasing on
    its own).  Lineage records the base hash and component count; the
    snapshot count is filled in by adapt_workflow.
    """
    if U_res.r == 0:
        return U_o
    if U_o.n != U_res.n:
        raise ValueError(f"bases disagree on n: {U_o.n} vs {U_res.n}")
    if U_o.r + U_res.r > U_o.n:
        raise ValueError(
            f"combined basis would have {U_o.r + U_res.r} columns in "
            f"dimension {U_o.n}"
        )
    stacked = np.hstack([U_o.U, U_res.U])
    scrubbed = _mgs_sweep(stacked)
    sv = np.concatenate([
        U_o.singular_values[: U_o.r],
        U_res.singular_values[: U_res.r],
    ])
    lineage = Lineage(
        "adaptive",
        base_hash=U_o.content_hash(),
        r_res=U_res.r,
        n_snapshots=0,
        seed=U_res.lineage.seed,
    )
    return PodBasis(scrubbed, sv, lineage)


def adapt_workflow(
    U_o: PodBasis,
    model: ReservoirModel,
    new_wells: WellConfiguration,
    n_snapshots: int,
    r_res: int,
    seed: int,
    bhp_range: tuple[float, float] | None = None,
    recording_stride: int = 10,
    control_period: float | None = None,
    dt_max: float = fullsim.DEFAULT_DT_MAX,
    cfl_factor: float = fullsim.DEFAULT_CFL,
    face_mobility: str = "average",
) -> PodBasis:
    """Adapt a basis to a new well configuration from a few new snapshots.

    Runs the full-order model under ``new_wells`` with randomized injector
    pressures (uniform over ``bhp_range``, redrawn every
    ``control_period`` seconds) until ``n_snapshots`` pressure states are
    recorded, then performs the residual extraction and augmentation.
    ``r_res = 0`` returns the base basis unchanged.
    """
    if n_snapshots < r_res:
        raise ValueError(
            f"need at least as many snapshots as components: "
            f"{n_snapshots} < {r_res}"
        )
    if r_res == 0:
        return U_o
    if U_o.n != model.n_cells:
        raise ValueError(f"basis has n={U_o.n}, model has {model.n_cells} cells")

    if bhp_range is None:
        bhps = [w.bhp for w in new_wells.injectors]
        lo, hi = min(bhps), max(bhps)
        if lo == hi:
            pad = 0.1 * (lo - new_wells.producer.bhp)
            lo, hi = lo - pad, hi + pad
        bhp_range = (lo, hi)
    if control_period is None:
        control_period = 10.0 * recording_stride * dt_max

    horizon = (n_snapshots * recording_stride + 1) * dt_max + control_period
    controls = fullsim.build_randomized_controls(
        seed, new_wells, bhp_range, control_period, horizon
    )
    schedule = fullsim.Schedule(
        total_time=horizon,
        controls=controls,
        recording_stride=recording_stride,
        dt_max=dt_max,
        cfl_factor=cfl_factor,
        max_snapshots=n_snapshots,
    )
    recorder = fullsim.SnapshotRecorder()
    fullsim.run_simulation(model, new_wells, schedule, recorder, face_mobility)
    if recorder.count < n_snapshots:
        raise RuntimeError(
            f"training run recorded {recorder.count} snapshots, wanted {n_snapshots}"
        )
    S = SnapshotMatrix(
        np.column_stack(recorder.pressures),
        Provenance(
            scenario="adaptation",
            wells_fingerprint=new_wells.fingerprint(),
            recording_stride=recording_stride,
            seed=seed,
        ),
    )
    R = residual_snapshots(S, U_o)
    U_res = residual_basis(R, r_res)
    adapted = augment_basis(U_o, U_res)
    lineage = replace(adapted.lineage, n_snapshots=n_snapshots, seed=seed)
    return PodBasis(adapted.U, adapted.singular_values, lineage)
