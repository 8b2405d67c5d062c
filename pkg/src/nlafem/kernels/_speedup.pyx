# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element assembly kernels (same contracts as kernels._numpy)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def stiffness_local(double[:, :, ::1] dN, double[::1] w,
                    double[:, :, ::1] jinv, double[::1] detj, double kappa):
    cdef Py_ssize_t ne = jinv.shape[0]
    cdef Py_ssize_t nq = dN.shape[0]
    cdef Py_ssize_t nl = dN.shape[1]
    if nl > 8:
        raise ValueError("at most 8 local basis functions supported")
    out_arr = np.zeros((ne, nl, nl))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j
    cdef double gx_i, gy_i, gx_j, gy_j, wq, s
    cdef double g[8][2]
    for e in range(ne):
        for q in range(nq):
            for i in range(nl):
                g[i][0] = dN[q, i, 0] * jinv[e, 0, 0] + dN[q, i, 1] * jinv[e, 1, 0]
                g[i][1] = dN[q, i, 0] * jinv[e, 0, 1] + dN[q, i, 1] * jinv[e, 1, 1]
            wq = w[q] * detj[e] * kappa
            for i in range(nl):
                for j in range(nl):
                    out[e, i, j] += wq * (g[i][0] * g[j][0] + g[i][1] * g[j][1])
    return out_arr


def weighted_mass_local(double[:, ::1] N, double[::1] w,
                        double[::1] detj, double[:, ::1] wvals):
    cdef Py_ssize_t ne = detj.shape[0]
    cdef Py_ssize_t nq = N.shape[0]
    cdef Py_ssize_t nl = N.shape[1]
    out_arr = np.zeros((ne, nl, nl))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j
    cdef double wq
    for e in range(ne):
        for q in range(nq):
            wq = w[q] * detj[e] * wvals[e, q]
            for i in range(nl):
                for j in range(nl):
                    out[e, i, j] += wq * N[q, i] * N[q, j]
    return out_arr
