"""Slow, obviously-correct reference computations for small inputs.

These share no code with the production routines: dense linear algebra in
place of power iteration, shortest-path enumeration in place of Brandes,
definition-level peeling in place of bucketed k-shell, brute-force split and
partition search.  The test suite and ``gnrisk selftest`` compare the two.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def _dominant_projection(M: np.ndarray, start: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """Limit of power iteration on symmetric PSD ``M`` from ``start``: the
    projection of ``start`` onto the top eigenspace, L2-normalised."""
    vals, vecs = np.linalg.eigh(M)
    top = vals[-1]
    if top <= 0:
        return np.zeros(M.shape[0])
    span = vecs[:, vals >= top - rel_tol * max(1.0, abs(top))]
    x = span @ (span.T @ start)
    norm = np.linalg.norm(x)
    return np.abs(x / norm) if norm > 0 else x


def dense_hits(n: int, edges) -> tuple:
    A = np.zeros((n, n))
    for a, b in edges:
        A[a, b] = 1.0
    if not A.any():
        return np.zeros(n), np.zeros(n)
    u = np.full(n, 1.0 / math.sqrt(n))
    auth = _dominant_projection(A.T @ A, A.T @ u)
    hub = A @ auth
    return auth, hub / np.linalg.norm(hub)


def dense_eigenvector(n: int, pairs) -> np.ndarray:
    A = np.zeros((n, n))
    for a, b in pairs:
        A[a, b] = A[b, a] = 1.0
    if not A.any():
        return np.zeros(n)
    # shift by the identity so the spectrum is non-negative on the top end
    return _dominant_projection(A + np.eye(n) * (np.abs(np.linalg.eigvalsh(A)).max() + 1.0),
                                np.full(n, 1.0 / math.sqrt(n)))


def dense_pagerank(n: int, edges, damping: float = 0.85) -> np.ndarray:
    """Solve the PageRank linear system directly (dangling columns uniform)."""
    M = np.zeros((n, n))
    out = np.zeros(n)
    for a, b in edges:
        out[a] += 1
    for a, b in edges:
        M[b, a] += 1.0 / out[a]
    M[:, out == 0] = 1.0 / n
    x = np.linalg.solve(np.eye(n) - damping * M, np.full(n, (1.0 - damping) / n))
    return x / x.sum()


def floyd_warshall(n: int, pairs) -> np.ndarray:
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for a, b in pairs:
        D[a, b] = D[b, a] = 1.0
    for k in range(n):
        D = np.minimum(D, D[:, [k]] + D[[k], :])
    return D


def closeness(n: int, pairs) -> np.ndarray:
    D = floyd_warshall(n, pairs)
    out = np.zeros(n)
    for v in range(n):
        reach = np.isfinite(D[v])
        total = D[v][reach].sum()
        out[v] = (reach.sum() - 1) / total if total > 0 else 0.0
    return out


def _all_shortest_paths(s: int, t: int, adj: list, D: np.ndarray) -> list:
    paths = []

    def walk(path):
        v = path[-1]
        if v == t:
            paths.append(list(path))
            return
        for w in adj[v]:
            if D[w, t] == D[v, t] - 1:
                path.append(w)
                walk(path)
                path.pop()

    walk([s])
    return paths


def betweenness(n: int, pairs) -> tuple:
    """Exact node and edge betweenness (Fractions) by enumerating every
    shortest path of every unordered pair."""
    adj = [[] for _ in range(n)]
    eid = {}
    for e, (a, b) in enumerate(pairs):
        adj[a].append(b)
        adj[b].append(a)
        eid[(a, b)] = eid[(b, a)] = e
    D = floyd_warshall(n, pairs)
    node = [Fraction(0)] * n
    edge = [Fraction(0)] * len(pairs)
    for s, t in itertools.combinations(range(n), 2):
        if not np.isfinite(D[s, t]):
            continue
        paths = _all_shortest_paths(s, t, adj, D)
        share = Fraction(1, len(paths))
        for p in paths:
            for v in p[1:-1]:
                node[v] += share
            for a, b in zip(p, p[1:]):
                edge[eid[(a, b)]] += share
    return node, edge


def kshell(n: int, pairs) -> np.ndarray:
    """Core number straight from the definition: the largest k for which the
    node survives repeated deletion of nodes with degree below k."""
    adj = [set() for _ in range(n)]
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    core = np.zeros(n, dtype=np.int64)
    for k in range(1, n + 1):
        alive = set(range(n))
        changed = True
        while changed:
            changed = False
            for v in list(alive):
                if len(adj[v] & alive) < k:
                    alive.discard(v)
                    changed = True
        if not alive:
            break
        for v in alive:
            core[v] = k
    return core


def diameter(n: int, pairs) -> int:
    D = floyd_warshall(n, pairs)
    finite = D[np.isfinite(D)]
    return int(finite.max()) if finite.size else 0


def exhaustive_split(X, g, h, lam: float, gamma: float, min_child_hessian: float) -> list:
    """Every admissible (gain, feature, threshold), evaluated by direct
    summation over the rows each side receives."""
    X = np.asarray(X, dtype=np.float64)
    out = []
    for f in range(X.shape[1]):
        vals = sorted(set(X[:, f].tolist()))
        for a, b in zip(vals, vals[1:]):
            thr = (a + b) / 2.0
            if not thr > a:
                thr = b
            left = X[:, f] < thr
            GL, HL = math.fsum(g[left]), math.fsum(h[left])
            GR, HR = math.fsum(g[~left]), math.fsum(h[~left])
            if HL < min_child_hessian or HR < min_child_hessian:
                continue
            gain = 0.5 * (GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - (GL + GR) ** 2 / (HL + HR + lam)) - gamma
            out.append((gain, f, thr))
    return out


def best_exhaustive_split(X, g, h, lam: float, gamma: float, min_child_hessian: float):
    """Highest-gain candidate (lowest feature, then threshold, on ties), or
    ``None`` if no candidate has positive gain."""
    cands = [c for c in exhaustive_split(X, g, h, lam, gamma, min_child_hessian) if c[0] > 0]
    if not cands:
        return None
    return max(cands, key=lambda c: (c[0], -c[1], -c[2]))


def golden_section(fn, lo: float, hi: float, tol: float = 1e-12) -> float:
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    while b - a > tol:
        if fn(c) < fn(d):
            b, d = d, c
            c = b - ratio * (b - a)
        else:
            a, c = c, d
            d = a + ratio * (b - a)
    return 0.5 * (a + b)


def exact_quadratic(linear: float, quadratic: float):
    """``x -> linear*x + quadratic*x**2`` evaluated in exact rationals, so a
    line search can resolve the minimum below float rounding noise."""
    a, b = Fraction(linear), Fraction(quadratic)
    return lambda x: a * Fraction(x) + b * Fraction(x) * Fraction(x)


def brute_modularity(n: int, pairs) -> float:
    """Best modularity over every partition of ``n`` nodes (set partitions
    via restricted growth strings; fine up to about nine nodes)."""
    m = len(pairs)
    if m == 0:
        return 0.0
    deg = np.zeros(n)
    for a, b in pairs:
        deg[a] += 1
        deg[b] += 1
    best = -1.0

    def score(labels):
        q = 0.0
        for a, b in pairs:
            if labels[a] == labels[b]:
                q += 1.0 / m
        for c in set(labels):
            tot = sum(deg[v] for v in range(n) if labels[v] == c)
            q -= (tot / (2.0 * m)) ** 2
        return q

    def grow(labels, top):
        nonlocal best
        if len(labels) == n:
            best = max(best, score(labels))
            return
        for c in range(top + 2):
            grow(labels + [c], max(top, c))

    grow([0], 0)
    return best


def spearman(a, b) -> float:
    """Rank correlation with average ranks for ties."""
    def ranks(x):
        x = np.asarray(x, dtype=np.float64)
        order = np.argsort(x, kind="stable")
        r = np.empty(x.size)
        i = 0
        while i < x.size:
            j = i
            while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
                j += 1
            r[order[i:j + 1]] = 0.5 * (i + j)
            i = j + 1
        return r
    ra, rb = ranks(a), ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(np.dot(ra, ra) * np.dot(rb, rb)))
    return float(np.dot(ra, rb) / denom) if denom > 0 else 0.0
