"""Pure-Python versions of the compiled kernels in ``_core.pyx``.

Same signatures and the same floating-point operation order, so results agree
bit for bit with the extension on every input the tests exercise.
"""
from collections import deque

import numpy as np


def brandes(indptr, indices, edge_ids, n_edges):
    """Node and edge betweenness of an undirected simple graph in CSR form.

    ``edge_ids[k]`` names the undirected edge stored at CSR slot ``k`` (both
    directions of an edge carry the same id).  Each unordered pair is counted
    once, so the per-source sums are halved.
    """
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    edge_ids = np.asarray(edge_ids).tolist()
    n = len(indptr) - 1
    node_bc = [0.0] * n
    edge_bc = [0.0] * n_edges
    for s in range(n):
        stack = []
        sigma = [0.0] * n
        dist = [-1] * n
        sigma[s] = 1.0
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            dv = dist[v]
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue.append(w)
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            dw = dist[w]
            coeff = (1.0 + delta[w]) / sigma[w]
            for k in range(indptr[w], indptr[w + 1]):
                v = indices[k]
                if dist[v] == dw - 1:
                    c = sigma[v] * coeff
                    edge_bc[edge_ids[k]] += c
                    delta[v] += c
            if w != s:
                node_bc[w] += delta[w]
    return (np.array(node_bc) * 0.5, np.array(edge_bc) * 0.5)


def bfs_stats(indptr, indices):
    """Per node: sum of BFS distances to reachable nodes and eccentricity."""
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    n = len(indptr) - 1
    sums = np.zeros(n, dtype=np.int64)
    ecc = np.zeros(n, dtype=np.int64)
    for s in range(n):
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        total = 0
        far = 0
        while queue:
            v = queue.popleft()
            dv = dist[v]
            total += dv
            if dv > far:
                far = dv
            for k in range(indptr[v], indptr[v + 1]):
                w = indices[k]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue.append(w)
        sums[s] = total
        ecc[s] = far
    return sums, ecc


def best_split(X, order, in_node, g, h, G, H, lam, gamma, min_child_hessian):
    """Exact greedy split search for one tree node.

    ``order[f]`` is the stable ascending argsort of column ``f`` over all rows;
    ``in_node`` marks the rows that reach the node.  Returns
    ``(feature, threshold, gain)`` with ``feature == -1`` if no admissible
    candidate has positive gain.  Gains within a rounding tolerance of the best
    count as ties, which keep the lowest feature, then the lowest threshold.
    """
    root_term = G * G / (H + lam)
    eps = 1e-12 * (1.0 + root_term)
    per_feature = []
    top = -np.inf
    for f in range(X.shape[1]):
        idx = order[f][in_node[order[f]].astype(bool)]
        if idx.size < 2:
            per_feature.append(None)
            continue
        v = X[idx, f]
        GL = np.cumsum(g[idx])[:-1]
        HL = np.cumsum(h[idx])[:-1]
        GR = G - GL
        HR = H - HL
        ok = (v[:-1] < v[1:]) & (HL >= min_child_hessian) & (HR >= min_child_hessian)
        if not ok.any():
            per_feature.append(None)
            continue
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - root_term) - gamma
        gain = np.where(ok, gain, -np.inf)
        per_feature.append((v, gain))
        top = max(top, float(gain.max()))
    if not top > eps:
        return -1, 0.0, 0.0
    for f, item in enumerate(per_feature):
        if item is None:
            continue
        v, gain = item
        hits = np.flatnonzero(gain >= top - eps)
        if hits.size:
            i = int(hits[0])
            a, b = v[i], v[i + 1]
            thr = 0.5 * (a + b)
            if thr <= a:
                thr = b
            return f, float(thr), float(gain[i])
    return -1, 0.0, 0.0


def partition_order(order, side):
    """Stable split of each feature's row order into rows with ``side`` set
    (left) and the rest (right)."""
    order = np.asarray(order, dtype=np.int64)
    sel = np.asarray(side, dtype=bool)[order]
    n_features = order.shape[0]
    return order[sel].reshape(n_features, -1), order[~sel].reshape(n_features, -1)
