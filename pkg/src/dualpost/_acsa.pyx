# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loop of the accelerated stochastic dual iteration.

Operates on table-backed objectives: per-sample costs are rows of dense
arrays indexed by the drawn support index.  Tables carry a block axis so a
sample may contribute several independent smooth-max groups (single-action
problems use one block; set-valued problems use one block per class).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log, sqrt

cnp.import_array()


def acsa_stage(
    double[:, :, ::1] loss,        # (n, blocks, actions)
    double[:, :, :, ::1] cost,     # (n, m, blocks, actions)
    long long[::1] idx,            # (T,) support indices, pre-drawn
    double[::1] lam0,              # (m,)
    double mu,
    double smoothness,
    double beta,
    double prox_rho,
    double[::1] prox_shift,        # (m,)
    double prox_const,
    double[::1] trace_obj,         # (T,) or (0,)
    double[::1] trace_norm,        # (T,) or (0,)
):
    """Run one projected accelerated stage; returns the aggregate iterate."""
    cdef Py_ssize_t T = idx.shape[0]
    cdef Py_ssize_t m = lam0.shape[0]
    cdef Py_ssize_t nb = loss.shape[1]
    cdef Py_ssize_t na = loss.shape[2]
    cdef bint record = trace_obj.shape[0] == T

    lam_arr = np.array(lam0, dtype=np.float64, copy=True)
    ag_arr = np.array(lam0, dtype=np.float64, copy=True)
    md_arr = np.zeros(m, dtype=np.float64)
    g_arr = np.zeros(m, dtype=np.float64)
    s_arr = np.zeros(na, dtype=np.float64)
    p_arr = np.zeros(na, dtype=np.float64)
    cdef double[::1] lam = lam_arr
    cdef double[::1] ag = ag_arr
    cdef double[::1] md = md_arr
    cdef double[::1] g = g_arr
    cdef double[::1] s = s_arr
    cdef double[::1] p = p_arr

    cdef Py_ssize_t t, i, j, b, a
    cdef double alpha, gamma, den, c_ag, c_lam, c_prev, c_md, c_grad
    cdef double acc, top, z, val, upd, nrm

    for t in range(1, T + 1):
        i = idx[t - 1]
        alpha = 2.0 / (t + 1.0)
        gamma = 4.0 * smoothness / (t * (t + 1.0))
        den = gamma + (1.0 - alpha * alpha) * mu
        c_ag = (1.0 - alpha) * (mu + gamma) / den
        c_lam = alpha * ((1.0 - alpha) * mu + gamma) / den
        for j in range(m):
            md[j] = c_ag * ag[j] + c_lam * lam[j]
            g[j] = 0.0
        val = 0.0

        for b in range(nb):
            top = -INFINITY
            for a in range(na):
                acc = -loss[i, b, a]
                for j in range(m):
                    acc -= cost[i, j, b, a] * md[j]
                s[a] = acc
                if acc > top:
                    top = acc
            z = 0.0
            for a in range(na):
                p[a] = exp(beta * (s[a] - top))
                z += p[a]
            for a in range(na):
                p[a] /= z
            for j in range(m):
                acc = 0.0
                for a in range(na):
                    acc += cost[i, j, b, a] * p[a]
                g[j] -= acc
            if record:
                val += top + log(z) / beta

        if prox_rho != 0.0:
            for j in range(m):
                g[j] += prox_rho * md[j] - prox_shift[j]

        c_prev = ((1.0 - alpha) * mu + gamma) / (mu + gamma)
        c_md = alpha * mu / (mu + gamma)
        c_grad = alpha / (mu + gamma)
        for j in range(m):
            upd = c_prev * lam[j] + c_md * md[j] - c_grad * g[j]
            lam[j] = upd if upd > 0.0 else 0.0
            ag[j] = alpha * lam[j] + (1.0 - alpha) * ag[j]

        if record:
            if prox_rho != 0.0:
                acc = 0.0
                for j in range(m):
                    acc += md[j] * md[j]
                val += 0.5 * prox_rho * acc
                acc = 0.0
                for j in range(m):
                    acc += prox_shift[j] * md[j]
                val += prox_const - acc
            nrm = 0.0
            for j in range(m):
                nrm += ag[j] * ag[j]
            trace_obj[t - 1] = val
            trace_norm[t - 1] = sqrt(nrm)

    return ag_arr
