"""Rate-curve error metrics and series alignment.

The headline metric is the root relative squared error,

    E = sqrt( sum_i (pred_i - ref_i)^2 / sum_i (ref_i - mean(ref))^2 ),

the prediction error normalized by that of the constant-mean predictor
(E = 1 means "no better than predicting the average").  Oil and water
errors are always reported separately.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, UndefinedMetricError
from .fullsim import RateSeries

DEFAULT_GRID_POINTS = 200


def rrse(pred, ref) -> float:
    """Root relative squared error of two equal-length samples."""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape:
        raise AlignmentError(f"length mismatch: {pred.shape} vs {ref.shape}")
    if ref.ndim != 1 or ref.size < 2:
        raise ValueError(f"need 1-D series of length >= 2, got shape {ref.shape}")
    denom = float(np.sum((ref - ref.mean()) ** 2))
    if denom <= 0.0:
        raise UndefinedMetricError(
            "reference series is constant; the relative error is undefined"
        )
    return float(np.sqrt(np.sum((pred - ref) ** 2) / denom))


@dataclass
class AlignedRates:
    """Two rate series interpolated onto a shared uniform time grid."""

    times: np.ndarray
    a_water: np.ndarray
    a_oil: np.ndarray
    b_water: np.ndarray
    b_oil: np.ndarray


def align_series(a: RateSeries, b: RateSeries, n_points: int = DEFAULT_GRID_POINTS) -> AlignedRates:
    """Linearly interpolate both series onto a uniform grid over their overlap."""
    if len(a) < 2 or len(b) < 2:
        raise AlignmentError("both series need at least two samples to align")
    lo = max(a.times[0], b.times[0])
    hi = min(a.times[-1], b.times[-1])
    if hi <= lo:
        raise AlignmentError(
            f"series do not overlap: [{a.times[0]}, {a.times[-1]}] vs "
            f"[{b.times[0]}, {b.times[-1]}]"
        )
    t = np.linspace(lo, hi, n_points)
    return AlignedRates(
        t,
        np.interp(t, a.times, a.water_rate),
        np.interp(t, a.times, a.oil_rate),
        np.interp(t, b.times, b.water_rate),
        np.interp(t, b.times, b.oil_rate),
    )


@dataclass
class RateComparison:
    """Per-phase RRSE of a predicted rate series against a reference."""

    rrse_oil: float
    rrse_water: float
    t_start: float
    t_end: float
    n_points: int
    prediction_id: str = ""
    reference_id: str = ""


def compare_rate_series(
    pred: RateSeries,
    ref: RateSeries,
    n_points: int = DEFAULT_GRID_POINTS,
    prediction_id: str = "",
    reference_id: str = "",
) -> RateComparison:
    """Align two series and compute per-phase RRSE (prediction vs reference)."""
    al = align_series(pred, ref, n_points)
    return RateComparison(
        rrse_oil=rrse(al.a_oil, al.b_oil),
        rrse_water=rrse(al.a_water, al.b_water),
        t_start=float(al.times[0]),
        t_end=float(al.times[-1]),
        n_points=n_points,
        prediction_id=prediction_id,
        reference_id=reference_id,
    )


_NUMBER = re.compile(r"[-+]?\d+\.?\d*(?:[eE][-+]?\d+)?")


def _label_key(label: str):
    m = _NUMBER.search(label)
    return (float(m.group()) if m else float("inf"), label)


def sweep_report(results) -> str:
    """CSV table `label,rrse_oil,rrse_water`, rows ordered by the label's
    numeric key (first number embedded in the label)."""
    results = list(results)
    if not results:
        raise ValueError("no results to report")
    buf = io.StringIO()
    buf.write("label,rrse_oil,rrse_water\n")
    for label, cmp_ in sorted(results, key=lambda lc: _label_key(str(lc[0]))):
        buf.write(f"{label},{cmp_.rrse_oil:.17g},{cmp_.rrse_water:.17g}\n")
    return buf.getvalue()


def parse_sweep_report(text: str):
    """Inverse of sweep_report: list of (label, rrse_oil, rrse_water)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "label,rrse_oil,rrse_water":
        raise ValueError("not a sweep report: missing header")
    out = []
    for ln in lines[1:]:
        label, o, w = ln.rsplit(",", 2)
        out.append((label, float(o), float(w)))
    return out
