"""Per-node structural scores of one subnetwork.

HITS and PageRank follow edge direction (guarantor -> borrower, so a high
authority means "guaranteed by many").  Eigenvector, betweenness, closeness
and k-shell use the undirected view.  Power iterations start from the uniform
vector, so every score is a deterministic function of the topology.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import Subnetwork

MEASURES = ("authority", "hub", "pagerank", "kshell", "eigenvector", "betweenness", "closeness")


class ConvergenceWarning(UserWarning):
    pass


def _normalize(x: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.dot(x, x))
    return x / norm if norm > 0 else x


def hits(sub: Subnetwork, tol: float = 1e-9, max_iter: int = 1000):
    """Authority and hub vectors, each L2-normalised.

    Iterates ``auth <- A^T hub, hub <- A auth`` until the largest absolute
    change in either vector drops below ``tol``.  An edgeless component gets
    all-zero scores.
    """
    n = sub.n
    if sub.n_edges == 0:
        return np.zeros(n), np.zeros(n)
    src, dst = sub.src, sub.dst
    hub = np.full(n, 1.0 / np.sqrt(n))
    auth = np.zeros(n)
    for _ in range(max_iter):
        new_auth = _normalize(np.bincount(dst, weights=hub[src], minlength=n))
        new_hub = _normalize(np.bincount(src, weights=new_auth[dst], minlength=n))
        change = max(np.abs(new_auth - auth).max(), np.abs(new_hub - hub).max())
        auth, hub = new_auth, new_hub
        if change < tol:
            break
    else:
        warnings.warn(f"HITS did not converge in {max_iter} iterations on GN{sub.index}",
                      ConvergenceWarning, stacklevel=2)
    return auth, hub


def pagerank(sub: Subnetwork, damping: float = 0.85, tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Directed PageRank; dangling mass is spread uniformly.  Sums to 1."""
    n = sub.n
    if n == 0:
        return np.zeros(0)
    src, dst = sub.src, sub.dst
    out_deg = np.bincount(src, minlength=n).astype(float)
    dangling = out_deg == 0
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        flow = np.bincount(dst, weights=x[src] / out_deg[src], minlength=n) if src.size else np.zeros(n)
        new = damping * (flow + x[dangling].sum() / n) + (1.0 - damping) / n
        new /= new.sum()
        change = np.abs(new - x).sum()
        x = new
        if change < tol:
            break
    else:
        warnings.warn(f"PageRank did not converge in {max_iter} iterations on GN{sub.index}",
                      ConvergenceWarning, stacklevel=2)
    return x


def eigenvector_centrality(sub: Subnetwork, tol: float = 1e-9, max_iter: int = 1000) -> np.ndarray:
    """Dominant eigenvector of the undirected adjacency, L2-normalised.

    Iterates on ``A + I`` so bipartite components converge instead of
    oscillating; the fixed point is the same Perron vector.
    """
    n = sub.n
    pairs = sub.undirected_edges
    if pairs.shape[0] == 0:
        return np.zeros(n)
    u, v = pairs[:, 0], pairs[:, 1]
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(max_iter):
        new = x + np.bincount(u, weights=x[v], minlength=n) + np.bincount(v, weights=x[u], minlength=n)
        new = _normalize(new)
        change = np.abs(new - x).max()
        x = new
        if change < tol:
            break
    else:
        warnings.warn(f"eigenvector centrality did not converge in {max_iter} iterations on GN{sub.index}",
                      ConvergenceWarning, stacklevel=2)
    return x


def kshell(sub: Subnetwork) -> np.ndarray:
    """Core number of every node (undirected), by bucketed min-degree peeling."""
    n = sub.n
    neigh = sub.neighbors()
    deg = [len(a) for a in neigh]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    max_deg = max(deg)
    bins = [0] * (max_deg + 1)
    for d in deg:
        bins[d] += 1
    start = 0
    for d in range(max_deg + 1):
        bins[d], start = start, start + bins[d]
    pos = [0] * n
    vert = [0] * n
    for v in range(n):
        pos[v] = bins[deg[v]]
        vert[pos[v]] = v
        bins[deg[v]] += 1
    for d in range(max_deg, 0, -1):
        bins[d] = bins[d - 1]
    bins[0] = 0
    for i in range(n):
        v = vert[i]
        for u in neigh[v]:
            if deg[u] > deg[v]:
                du = deg[u]
                pu = pos[u]
                pw = bins[du]
                w = vert[pw]
                if u != w:
                    pos[u], pos[w] = pw, pu
                    vert[pu], vert[pw] = w, u
                bins[du] += 1
                deg[u] -= 1
    return np.array(deg, dtype=np.int64)


def betweenness(sub: Subnetwork) -> np.ndarray:
    """Unnormalised Brandes betweenness on the undirected view."""
    if sub.n == 0:
        return np.zeros(0)
    indptr, indices, eids = sub.csr
    node_bc, _ = _kernels.brandes(indptr, indices, eids, sub.undirected_edges.shape[0])
    return node_bc


def closeness(sub: Subnetwork) -> np.ndarray:
    """``(n - 1) / sum of distances`` within the component; 0 when isolated."""
    n = sub.n
    if n <= 1:
        return np.zeros(n)
    indptr, indices, _ = sub.csr
    sums, _ = _kernels.bfs_stats(indptr, indices)
    return (n - 1) / sums.astype(float)


@dataclass
class CentralityScores:
    """All node scores of one component, indexed like ``sub.node_ids``."""

    node_ids: list
    authority: np.ndarray
    hub: np.ndarray
    pagerank: np.ndarray
    kshell: np.ndarray
    eigenvector: np.ndarray
    betweenness: np.ndarray
    closeness: np.ndarray
    in_degree: np.ndarray
    out_degree: np.ndarray
    has_edges: bool

    @property
    def betweenness_normalized(self) -> np.ndarray:
        n = len(self.node_ids)
        if n < 3:
            return np.zeros(n)
        return self.betweenness / ((n - 1) * (n - 2) / 2.0)


def compute_scores(sub: Subnetwork, max_iter: int = 100000) -> CentralityScores:
    """Every measure for one component.  The iteration cap is higher than the
    single-measure default because chained clusters have a small spectral gap."""
    auth, hub = hits(sub, max_iter=max_iter)
    return CentralityScores(
        node_ids=list(sub.node_ids),
        authority=auth,
        hub=hub,
        pagerank=pagerank(sub),
        kshell=kshell(sub),
        eigenvector=eigenvector_centrality(sub, max_iter=max_iter),
        betweenness=betweenness(sub),
        closeness=closeness(sub),
        in_degree=np.bincount(sub.dst, minlength=sub.n).astype(np.int64),
        out_degree=np.bincount(sub.src, minlength=sub.n).astype(np.int64),
        has_edges=sub.n_edges > 0,
    )
