# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: rectangular assignment, weighted Nelson-Aalen, step integrals.

Every routine here has a line-for-line twin in ``_pykernels.py``; both must
perform floating-point operations in the same order so the two backends agree
bit for bit on assignments and to rounding on totals.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, exp

cnp.import_array()


def solve_assignment(cost):
    """Exact minimum-cost assignment of every row to a distinct column.

    Shortest augmenting path with row/column potentials (Jonker-Volgenant
    family). Requires ``n_rows <= n_cols``.

    Returns
    -------
    col4row : ndarray of int64
    total : float
    """
    cdef const double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t nr = c.shape[0], nc = c.shape[1]
    if nr > nc:
        raise ValueError("solve_assignment needs n_rows <= n_cols")

    u_arr = np.zeros(nr)
    v_arr = np.zeros(nc)
    col4row_arr = np.full(nr, -1, dtype=np.int64)
    row4col_arr = np.full(nc, -1, dtype=np.int64)
    shortest_arr = np.empty(nc)
    path_arr = np.empty(nc, dtype=np.int64)
    sc_arr = np.zeros(nc, dtype=np.uint8)
    sr_arr = np.empty(nr, dtype=np.int64)

    cdef double[::1] u = u_arr, v = v_arr, shortest = shortest_arr
    cdef long long[::1] col4row = col4row_arr, row4col = row4col_arr
    cdef long long[::1] path = path_arr, sr = sr_arr
    cdef unsigned char[::1] sc = sc_arr

    cdef Py_ssize_t cur, i, j, k, jbest, sink, nsr, tmp
    cdef double min_val, r, lowest

    for cur in range(nr):
        for j in range(nc):
            shortest[j] = INFINITY
            path[j] = -1
            sc[j] = 0
        nsr = 0
        i = cur
        min_val = 0.0
        sink = -1
        while sink < 0:
            sr[nsr] = i
            nsr += 1
            lowest = INFINITY
            jbest = -1
            for j in range(nc):
                if sc[j]:
                    continue
                r = min_val + c[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    path[j] = i
                    shortest[j] = r
                if shortest[j] < lowest:
                    lowest = shortest[j]
                    jbest = j
                elif shortest[j] == lowest and jbest >= 0 and row4col[jbest] >= 0 and row4col[j] < 0:
                    jbest = j
            if jbest < 0 or lowest == INFINITY:
                raise ValueError("assignment is infeasible")
            min_val = lowest
            sc[jbest] = 1
            if row4col[jbest] < 0:
                sink = jbest
            else:
                i = row4col[jbest]

        u[cur] += min_val
        for k in range(1, nsr):
            i = sr[k]
            u[i] += min_val - shortest[col4row[i]]
        for j in range(nc):
            if sc[j]:
                v[j] -= min_val - shortest[j]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            tmp = col4row[i]
            col4row[i] = j
            j = tmp
            if i == cur:
                break

    cdef double total = 0.0
    for i in range(nr):
        total += c[i, col4row[i]]
    return col4row_arr, total


def weighted_nelson_aalen(t, ev, num_w, den_w, double tau):
    """Jump times and hazard increments from time-sorted inputs.

    Increment at event time ``u`` is ``sum(num_w * ev at u) / sum(den_w over t >= u)``.
    Only event times ``<= tau`` are emitted.
    """
    cdef const double[::1] ts = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] es = np.ascontiguousarray(ev, dtype=np.float64)
    cdef const double[::1] nw = np.ascontiguousarray(num_w, dtype=np.float64)
    cdef const double[::1] dw = np.ascontiguousarray(den_w, dtype=np.float64)
    cdef Py_ssize_t n = ts.shape[0], i, start, k, out = 0

    suffix_arr = np.empty(n + 1)
    cdef double[::1] suffix = suffix_arr
    suffix[n] = 0.0
    # suffix[i] = dw[i] + dw[i+1] + ... accumulated from the end
    cdef double acc = 0.0
    for i in range(n - 1, -1, -1):
        acc = acc + dw[i]
        suffix[i] = acc

    times_arr = np.empty(n)
    inc_arr = np.empty(n)
    cdef double[::1] times = times_arr, inc = inc_arr
    cdef double dn, risk
    cdef int has_event

    i = 0
    while i < n:
        start = i
        dn = 0.0
        has_event = 0
        while i < n and ts[i] == ts[start]:
            if es[i] != 0.0:
                has_event = 1
                dn = dn + nw[i] * es[i]
            i += 1
        if has_event and ts[start] <= tau:
            risk = suffix[start]
            if risk <= 0.0:
                raise ZeroDivisionError(f"empty weighted risk set at event time {ts[start]!r}")
            times[out] = ts[start]
            inc[out] = dn / risk
            out += 1
    return times_arr[:out].copy(), inc_arr[:out].copy()


def step_integral(times, values, double initial, double tau):
    """Integral over [0, tau] of a right-continuous step function."""
    cdef const double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[::1] vs = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = ts.shape[0], k
    cdef double area = 0.0, prev_t = 0.0, prev_v = initial
    for k in range(n):
        if ts[k] >= tau:
            break
        area = area + prev_v * (ts[k] - prev_t)
        prev_t = ts[k]
        prev_v = vs[k]
    area = area + prev_v * (tau - prev_t)
    return area


def rmst_from_increments(times, increments, double tau):
    """RMST of exp(-cumsum(increments)) over [0, tau]."""
    cdef const double[::1] ts = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[::1] inc = np.ascontiguousarray(increments, dtype=np.float64)
    cdef Py_ssize_t n = ts.shape[0], k
    cdef double area = 0.0, prev_t = 0.0, surv = 1.0, cum = 0.0
    for k in range(n):
        if ts[k] >= tau:
            break
        area = area + surv * (ts[k] - prev_t)
        prev_t = ts[k]
        cum = cum + inc[k]
        surv = exp(-cum)
    area = area + surv * (tau - prev_t)
    return area
