# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled array kernels: raw bidifferential values and third-kind
differential values. Semantics match kernels_py exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def bidiff_values(cnp.ndarray fm_in, lam1_in, y1_in, lam2_in, y2_in):
    lam1, lam2, y1, y2 = np.broadcast_arrays(
        np.asarray(lam1_in, dtype=complex), np.asarray(lam2_in, dtype=complex),
        np.asarray(y1_in, dtype=complex), np.asarray(y2_in, dtype=complex))
    shape = lam1.shape
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] fm = np.ascontiguousarray(fm_in, dtype=complex)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] l1 = np.ascontiguousarray(lam1.ravel())
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] l2 = np.ascontiguousarray(lam2.ravel())
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] a1 = np.ascontiguousarray(y1.ravel())
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] a2 = np.ascontiguousarray(y2.ravel())
    cdef Py_ssize_t npts = l1.shape[0], n = fm.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(npts, dtype=complex)
    cdef Py_ssize_t i, a, b
    cdef double complex f, row, d
    for i in range(npts):
        f = 0
        for a in range(n - 1, -1, -1):
            row = 0
            for b in range(n - 1, -1, -1):
                row = row * l2[i] + fm[a, b]
            f = f * l1[i] + row
        d = l1[i] - l2[i]
        out[i] = (f + 2.0 * a1[i] * a2[i]) / (4.0 * a1[i] * a2[i] * d * d)
    return out.reshape(shape) if shape else out[0]


def third_kind_values(lam_in, y_in, lam_q, y_q, lam_y, y_y, pcoef_in):
    lam_b, y_b = np.broadcast_arrays(np.asarray(lam_in, dtype=complex),
                                     np.asarray(y_in, dtype=complex))
    shape = lam_b.shape
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] lam = np.ascontiguousarray(lam_b.ravel())
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] y = np.ascontiguousarray(y_b.ravel())
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] pc = np.ascontiguousarray(pcoef_in, dtype=complex)
    cdef double complex lq = lam_q, yq = y_q, ly = lam_y, yy = y_y
    cdef Py_ssize_t npts = lam.shape[0], np_ = pc.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(npts, dtype=complex)
    cdef Py_ssize_t i, k
    cdef double complex p, aq, ay
    for i in range(npts):
        aq = (y[i] + yq) / (2.0 * y[i] * (lam[i] - lq))
        ay = (y[i] + yy) / (2.0 * y[i] * (lam[i] - ly))
        p = 0
        for k in range(np_ - 1, -1, -1):
            p = p * lam[i] + pc[k]
        out[i] = aq - ay + p / y[i]
    return out.reshape(shape) if shape else out[0]
