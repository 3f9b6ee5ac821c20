"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built, or when ``CCRMST_PURE_PYTHON=1``.
"""
import numpy as np


def solve_assignment(cost):
    """Exact minimum-cost assignment of every row to a distinct column.

    Shortest augmenting path with row/column potentials. Requires
    ``n_rows <= n_cols``. The column scan of each Dijkstra step is
    vectorized; the step order and tie-breaking match the compiled kernel.

    Returns
    -------
    col4row : ndarray of int64
    total : float
    """
    c = np.ascontiguousarray(cost, dtype=np.float64)
    nr, nc = c.shape
    if nr > nc:
        raise ValueError("solve_assignment needs n_rows <= n_cols")

    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1, dtype=np.int64)
    row4col = np.full(nc, -1, dtype=np.int64)

    for cur in range(nr):
        shortest = np.full(nc, np.inf)
        path = np.full(nc, -1, dtype=np.int64)
        sc = np.zeros(nc, dtype=bool)
        sr = []
        i = cur
        min_val = 0.0
        sink = -1
        while sink < 0:
            sr.append(i)
            free = ~sc
            r = min_val + c[i] - u[i] - v
            better = free & (r < shortest)
            path[better] = i
            shortest[better] = r[better]
            cand = np.where(free, shortest, np.inf)
            lowest = cand.min()
            if not np.isfinite(lowest):
                raise ValueError("assignment is infeasible")
            ties = np.flatnonzero(cand == lowest)
            open_ties = ties[row4col[ties] < 0]
            j = int(open_ties[0]) if open_ties.size else int(ties[0])
            min_val = lowest
            sc[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = int(row4col[j])

        u[cur] += min_val
        for i in sr[1:]:
            u[i] += min_val - shortest[col4row[i]]
        v[sc] -= min_val - shortest[sc]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, int(col4row[i])
            if i == cur:
                break

    total = 0.0
    for i in range(nr):
        total += c[i, col4row[i]]
    return col4row, float(total)


def weighted_nelson_aalen(t, ev, num_w, den_w, tau):
    """Jump times and hazard increments from time-sorted inputs."""
    t = np.asarray(t, dtype=np.float64)
    ev = np.asarray(ev, dtype=np.float64)
    num_w = np.asarray(num_w, dtype=np.float64)
    den_w = np.asarray(den_w, dtype=np.float64)
    if t.size == 0:
        return np.empty(0), np.empty(0)

    suffix = np.cumsum(den_w[::-1])[::-1]
    starts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])
    dn = np.add.reduceat(num_w * ev, starts)
    n_ev = np.add.reduceat((ev != 0).astype(np.int64), starts)
    keep = (n_ev > 0) & (t[starts] <= tau)
    starts = starts[keep]
    risk = suffix[starts]
    if np.any(risk <= 0.0):
        bad = t[starts][risk <= 0.0][0]
        raise ZeroDivisionError(f"empty weighted risk set at event time {bad!r}")
    return t[starts].copy(), dn[keep] / risk


def step_integral(times, values, initial, tau):
    """Integral over [0, tau] of a right-continuous step function."""
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    inside = times < tau
    t = times[inside]
    levels = np.r_[initial, values[inside]]
    edges = np.r_[0.0, t, tau]
    return float(np.dot(levels, np.diff(edges)))


def rmst_from_increments(times, increments, tau):
    """RMST of exp(-cumsum(increments)) over [0, tau]."""
    surv = np.exp(-np.cumsum(np.asarray(increments, dtype=np.float64)))
    return step_integral(times, surv, 1.0, tau)
