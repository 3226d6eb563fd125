# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled extended value iteration sweeps."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef double _l1_value(const double[:] p, double radius, const double[:] u,
                      const Py_ssize_t[:] desc) noexcept nogil:
    cdef Py_ssize_t S = p.shape[0]
    cdef Py_ssize_t best = desc[0]
    cdef Py_ssize_t k, j
    cdef double mass = 0.0, value = 0.0
    cdef double deficit, x, y, take
    for j in range(S):
        mass += p[j]
        value += p[j] * u[j]
    deficit = 1.0 - mass
    if deficit < 0.0:
        deficit = 0.0
    x = 0.5 * (radius + deficit)
    if x > 1.0 - p[best]:
        x = 1.0 - p[best]
    if x < deficit:
        x = deficit
    value += x * u[best]
    y = x - deficit
    k = S - 1
    while y > 0.0 and k > 0:
        j = desc[k]
        take = p[j] if p[j] < y else y
        value -= take * u[j]
        y -= take
        k -= 1
    return value


cdef double _box_value(const double[:] lo, const double[:] hi, const double[:] u,
                       const Py_ssize_t[:] desc) noexcept nogil:
    cdef Py_ssize_t S = lo.shape[0]
    cdef Py_ssize_t k, j
    cdef double rem = 1.0, value = 0.0, gap
    for j in range(S):
        rem -= lo[j]
        value += lo[j] * u[j]
    k = 0
    while rem > 0.0 and k < S:
        j = desc[k]
        gap = hi[j] - lo[j]
        if gap > rem:
            gap = rem
        if gap > 0.0:
            value += gap * u[j]
            rem -= gap
        k += 1
    return value


def _finish(v, double lo, double hi, Py_ssize_t it, bint converged):
    new = v.max(1)
    return new - new.min(), v.argmax(1), 0.5 * (hi + lo), it, converged


def evi_l1(const double[:, :, :] center, const double[:, :] radius, const double[:, :] rbar,
           double eps, Py_ssize_t cap, double alpha=0.0):
    cdef Py_ssize_t S = center.shape[0], A = center.shape[1]
    cdef Py_ssize_t s, a, it
    cdef double best, val, lo, hi, m
    u_arr = np.zeros(S)
    v_arr = np.zeros((S, A))
    new_arr = np.zeros(S)
    cdef double[:] u = u_arr
    cdef double[:, :] v = v_arr
    cdef double[:] new = new_arr
    cdef const Py_ssize_t[:] desc
    for it in range(1, cap + 1):
        desc_arr = np.argsort(-u_arr, kind="stable").astype(np.intp)
        desc = desc_arr
        with nogil:
            for s in range(S):
                best = -1e300
                for a in range(A):
                    val = rbar[s, a] + (1.0 - alpha) * _l1_value(center[s, a], radius[s, a], u, desc) + alpha * u[s]
                    v[s, a] = val
                    if val > best:
                        best = val
                new[s] = best
            lo = 1e300
            hi = -1e300
            for s in range(S):
                val = new[s] - u[s]
                if val < lo:
                    lo = val
                if val > hi:
                    hi = val
        if hi - lo <= eps:
            return _finish(v_arr, lo, hi, it, True)
        m = new_arr.min()
        for s in range(S):
            u[s] = new[s] - m
    return _finish(v_arr, lo, hi, cap, False)


def evi_box(const double[:, :, :] lo_b, const double[:, :, :] hi_b, const double[:, :] rbar,
             double eps, Py_ssize_t cap, double alpha=0.0):
    cdef Py_ssize_t S = lo_b.shape[0], A = lo_b.shape[1]
    cdef Py_ssize_t s, a, it
    cdef double best, val, lo, hi, m
    u_arr = np.zeros(S)
    v_arr = np.zeros((S, A))
    new_arr = np.zeros(S)
    cdef double[:] u = u_arr
    cdef double[:, :] v = v_arr
    cdef double[:] new = new_arr
    cdef const Py_ssize_t[:] desc
    for it in range(1, cap + 1):
        desc_arr = np.argsort(-u_arr, kind="stable").astype(np.intp)
        desc = desc_arr
        with nogil:
            for s in range(S):
                best = -1e300
                for a in range(A):
                    val = rbar[s, a] + (1.0 - alpha) * _box_value(lo_b[s, a], hi_b[s, a], u, desc) + alpha * u[s]
                    v[s, a] = val
                    if val > best:
                        best = val
                new[s] = best
            lo = 1e300
            hi = -1e300
            for s in range(S):
                val = new[s] - u[s]
                if val < lo:
                    lo = val
                if val > hi:
                    hi = val
        if hi - lo <= eps:
            return _finish(v_arr, lo, hi, it, True)
        m = new_arr.min()
        for s in range(S):
            u[s] = new[s] - m
    return _finish(v_arr, lo, hi, cap, False)
