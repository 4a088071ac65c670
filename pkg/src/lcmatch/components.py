"""Connected components of a bipartite acceptability graph."""
from __future__ import annotations

import numpy as np


def connected_components(n_nodes: int, u, v) -> np.ndarray:
    """Label nodes by connected component given undirected edges ``(u[k], v[k])``.

    Array union-find: every round hooks each root onto the smallest root it
    shares an edge with, then compresses paths by pointer jumping. Labels
    only ever decrease, so no cycles form. The returned label of a node is
    the smallest node id in its component.
    """
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    parent = np.arange(n_nodes, dtype=np.int64)
    while True:
        ru = parent[u]
        rv = parent[v]
        cross = ru != rv
        if not np.any(cross):
            break
        ru, rv = ru[cross], rv[cross]
        lo = np.minimum(ru, rv)
        hi = np.maximum(ru, rv)
        np.minimum.at(parent, hi, lo)
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt
        u, v = u[cross], v[cross]
    return parent
