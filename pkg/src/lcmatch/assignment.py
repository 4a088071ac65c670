"""Exact rectangular linear assignment by shortest augmenting paths."""
from __future__ import annotations

import numpy as np

from .errors import InfeasibleAssignment


def solve_assignment(cost) -> np.ndarray:
    """Minimum-cost assignment of every row to a distinct column.

    Dijkstra-style shortest augmenting paths with dual potentials (the
    Jonker-Volgenant family). Requires ``rows <= columns``.

    Parameters
    ----------
    cost : array_like, shape (m, k) with m <= k
        Finite costs.

    Returns
    -------
    ndarray of int, shape (m,)
        Column assigned to each row.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a matrix")
    nr, nc = cost.shape
    if nr > nc:
        raise InfeasibleAssignment(f"{nr} rows cannot be assigned to {nc} columns")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1)
    row4col = np.full(nc, -1)

    for cur in range(nr):
        shortest = np.full(nc, np.inf)
        path = np.full(nc, -1)
        seen_rows = np.zeros(nr, dtype=bool)
        seen_cols = np.zeros(nc, dtype=bool)
        min_val = 0.0
        i = cur
        sink = -1
        while sink < 0:
            seen_rows[i] = True
            reduced = min_val + cost[i] - u[i] - v
            better = ~seen_cols & (reduced < shortest)
            path[better] = i
            shortest[better] = reduced[better]
            masked = np.where(seen_cols, np.inf, shortest)
            lowest = masked.min()
            if not np.isfinite(lowest):
                raise InfeasibleAssignment("no augmenting path")
            ties = np.flatnonzero(masked == lowest)
            free = ties[row4col[ties] < 0]
            j = int(free[0] if free.size else ties[0])
            min_val = lowest
            seen_cols[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = int(row4col[j])

        u[cur] += min_val
        others = np.flatnonzero(seen_rows)
        others = others[others != cur]
        u[others] += min_val - shortest[col4row[others]]
        v[seen_cols] -= min_val - shortest[seen_cols]

        j = sink
        while True:
            i = int(path[j])
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur:
                break
    return col4row
