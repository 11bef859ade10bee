# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pure``.

Loop structure deliberately mirrors the NumPy accumulation order (separate
positive/negative passes combined elementwise) so results are bit-identical
to the fallback backend; the equivalence tests assert exact equality.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline double _tot_mob(double s, double swc, double span,
                            double inv_muw, double inv_muo) nogil:
    cdef double sn = (s - swc) / span
    if sn < 0.0:
        sn = 0.0
    elif sn > 1.0:
        sn = 1.0
    return sn * sn * inv_muw + (1.0 - sn) * (1.0 - sn) * inv_muo


def face_mobility_avg(const int64_t[::1] ca, const int64_t[::1] cb,
                      const double[::1] s, double swc, double sor,
                      double muw, double muo):
    cdef Py_ssize_t nf = ca.shape[0], f
    cdef double span = 1.0 - swc - sor
    cdef double inv_muw = 1.0 / muw, inv_muo = 1.0 / muo
    out_arr = np.empty(nf)
    cdef double[::1] out = out_arr
    for f in range(nf):
        out[f] = _tot_mob(0.5 * (s[ca[f]] + s[cb[f]]), swc, span,
                          inv_muw, inv_muo)
    return out_arr


def face_mobility_upwind(const int64_t[::1] ca, const int64_t[::1] cb,
                         const double[::1] s, const double[::1] p,
                         double swc, double sor, double muw, double muo):
    cdef Py_ssize_t nf = ca.shape[0], f
    cdef double span = 1.0 - swc - sor
    cdef double inv_muw = 1.0 / muw, inv_muo = 1.0 / muo
    cdef double dp, s_face
    out_arr = np.empty(nf)
    cdef double[::1] out = out_arr
    for f in range(nf):
        dp = p[ca[f]] - p[cb[f]]
        if dp > 0.0:
            s_face = s[ca[f]]
        elif dp == 0.0:
            s_face = 0.5 * (s[ca[f]] + s[cb[f]])
        else:
            s_face = s[cb[f]]
        out[f] = _tot_mob(s_face, swc, span, inv_muw, inv_muo)
    return out_arr


def phase_face_fluxes(const int64_t[::1] ca, const int64_t[::1] cb,
                      const double[::1] trans, const double[::1] p,
                      const double[::1] lam_w, const double[::1] lam_o):
    cdef Py_ssize_t nf = ca.shape[0], f
    cdef double dp, lw, lo
    fw_arr = np.empty(nf)
    fo_arr = np.empty(nf)
    cdef double[::1] fw = fw_arr, fo = fo_arr
    for f in range(nf):
        dp = p[ca[f]] - p[cb[f]]
        if dp >= 0.0:
            lw = lam_w[ca[f]]
            lo = lam_o[ca[f]]
        else:
            lw = lam_w[cb[f]]
            lo = lam_o[cb[f]]
        fw[f] = trans[f] * lw * dp
        fo[f] = trans[f] * lo * dp
    return fw_arr, fo_arr


def accumulate_cell_inflow(const int64_t[::1] ca, const int64_t[::1] cb,
                           const double[::1] flux, Py_ssize_t n):
    cdef Py_ssize_t nf = ca.shape[0], f, i
    gain_arr = np.zeros(n)
    loss_arr = np.zeros(n)
    cdef double[::1] gain = gain_arr, loss = loss_arr
    for f in range(nf):
        gain[cb[f]] += flux[f]
    for f in range(nf):
        loss[ca[f]] += flux[f]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = gain[i] - loss[i]
    return out_arr


def accumulate_cell_outflow(const int64_t[::1] ca, const int64_t[::1] cb,
                            const double[::1] flux, Py_ssize_t n):
    cdef Py_ssize_t nf = ca.shape[0], f, i
    out_a_arr = np.zeros(n)
    out_b_arr = np.zeros(n)
    cdef double[::1] out_a = out_a_arr, out_b = out_b_arr
    for f in range(nf):
        if flux[f] > 0.0:
            out_a[ca[f]] += flux[f]
    for f in range(nf):
        if flux[f] < 0.0:
            out_b[cb[f]] += -flux[f]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = out_a[i] + out_b[i]
    return out_arr


def tpfa_csr_values(const int64_t[::1] ca, const int64_t[::1] cb,
                    const double[::1] trans, const double[::1] lam_face,
                    const int64_t[::1] slot_ab, const int64_t[::1] slot_ba,
                    const int64_t[::1] slot_diag, Py_ssize_t nnz):
    cdef Py_ssize_t nf = ca.shape[0], n = slot_diag.shape[0], f, i
    cdef double tlam
    vals_arr = np.zeros(nnz)
    diag_a_arr = np.zeros(n)
    diag_b_arr = np.zeros(n)
    cdef double[::1] vals = vals_arr, diag_a = diag_a_arr, diag_b = diag_b_arr
    for f in range(nf):
        tlam = trans[f] * lam_face[f]
        vals[slot_ab[f]] = -tlam
        vals[slot_ba[f]] = -tlam
    for f in range(nf):
        diag_a[ca[f]] += trans[f] * lam_face[f]
    for f in range(nf):
        diag_b[cb[f]] += trans[f] * lam_face[f]
    for i in range(n):
        vals[slot_diag[i]] = diag_a[i] + diag_b[i]
    return vals_arr


def clipped_saturation_update(const double[::1] s, const double[::1] net_w,
                              double dt, const double[::1] pore_volume,
                              double lo, double hi):
    cdef Py_ssize_t n = s.shape[0], i
    cdef double raw
    new_arr = np.empty(n)
    clip_arr = np.empty(n)
    cdef double[::1] new = new_arr, clip = clip_arr
    for i in range(n):
        raw = s[i] + dt * net_w[i] / pore_volume[i]
        if raw < lo:
            new[i] = lo
        elif raw > hi:
            new[i] = hi
        else:
            new[i] = raw
        clip[i] = abs(raw - new[i]) * pore_volume[i]
    return new_arr, clip_arr
