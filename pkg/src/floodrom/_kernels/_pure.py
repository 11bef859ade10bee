"""Pure-NumPy implementations of the per-step hot kernels.

These are the reference semantics for the compiled backend: the Cython
variants in ``_core.pyx`` replicate the accumulation order used here (a full
positive pass, then a full negative pass, combined elementwise) so both
backends produce bit-identical arrays.

Conventions shared by every function:

* ``ca``/``cb`` are int64 arrays of face neighbor cell indices, one entry per
  interior face; ``trans`` the matching face transmissibilities.
* Saturations, pressures and mobilities are float64 cell arrays.
* Water relative permeability is quadratic in the normalized saturation
  ``S = (s - s_wc) / (1 - s_wc - s_or)``, oil is quadratic in ``1 - S``.
"""

import numpy as np

BACKEND_NAME = "pure"


def _total_mobility_at(s, swc, sor, inv_muw, inv_muo):
    span = 1.0 - swc - sor
    sn = np.clip((s - swc) / span, 0.0, 1.0)
    return sn * sn * inv_muw + (1.0 - sn) * (1.0 - sn) * inv_muo


def face_mobility_avg(ca, cb, s, swc, sor, muw, muo):
    """Total mobility per face, evaluated at the arithmetic-mean saturation."""
    s_face = 0.5 * (s[ca] + s[cb])
    return _total_mobility_at(s_face, swc, sor, 1.0 / muw, 1.0 / muo)


def face_mobility_upwind(ca, cb, s, p, swc, sor, muw, muo):
    """Total mobility per face, evaluated at the upwind-cell saturation.

    The upwind cell is the higher-pressure side; exact pressure ties fall
    back to the arithmetic mean.
    """
    dp = p[ca] - p[cb]
    s_face = np.where(dp > 0.0, s[ca], s[cb])
    s_face = np.where(dp == 0.0, 0.5 * (s[ca] + s[cb]), s_face)
    return _total_mobility_at(s_face, swc, sor, 1.0 / muw, 1.0 / muo)


def phase_face_fluxes(ca, cb, trans, p, lam_w, lam_o):
    """Upwind phase fluxes per face, positive from ``ca`` toward ``cb``."""
    dp = p[ca] - p[cb]
    lw = np.where(dp >= 0.0, lam_w[ca], lam_w[cb])
    lo = np.where(dp >= 0.0, lam_o[ca], lam_o[cb])
    return trans * lw * dp, trans * lo * dp


def accumulate_cell_inflow(ca, cb, flux, n):
    """Net inflow per cell from signed face fluxes (into ``cb``, out of ``ca``)."""
    gain = np.bincount(cb, weights=flux, minlength=n)
    loss = np.bincount(ca, weights=flux, minlength=n)
    return gain - loss


def accumulate_cell_outflow(ca, cb, flux, n):
    """Total outgoing face flux per cell (positive parts only)."""
    pos = np.where(flux > 0.0, flux, 0.0)
    neg = np.where(flux < 0.0, -flux, 0.0)
    out_a = np.bincount(ca, weights=pos, minlength=n)
    out_b = np.bincount(cb, weights=neg, minlength=n)
    return out_a + out_b


def tpfa_csr_values(ca, cb, trans, lam_face, slot_ab, slot_ba, slot_diag, nnz):
    """Fill CSR value array for the two-point flux pressure matrix.

    ``slot_ab``/``slot_ba`` are the positions of the (ca, cb) and (cb, ca)
    off-diagonal entries in the fixed sparsity pattern; ``slot_diag`` the
    diagonal positions.  Off-diagonal slots are unique per face, so plain
    fancy assignment is collision-free; diagonals accumulate per cell.
    """
    tlam = trans * lam_face
    vals = np.zeros(nnz)
    vals[slot_ab] = -tlam
    vals[slot_ba] = -tlam
    n = slot_diag.shape[0]
    diag_a = np.bincount(ca, weights=tlam, minlength=n)
    diag_b = np.bincount(cb, weights=tlam, minlength=n)
    vals[slot_diag] = diag_a + diag_b
    return vals


def clipped_saturation_update(s, net_w, dt, pore_volume, lo, hi):
    """Explicit saturation update clipped to ``[lo, hi]``.

    Returns the new saturation and the per-cell clipped volume
    ``|raw - clipped| * pore_volume`` (callers reduce it; keeping the
    reduction outside the kernel keeps backends bit-identical).
    """
    raw = s + dt * net_w / pore_volume
    new = np.clip(raw, lo, hi)
    return new, np.abs(raw - new) * pore_volume
