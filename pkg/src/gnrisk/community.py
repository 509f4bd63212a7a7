"""Community detection on subnetworks and per-community default rates."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .graph import Subnetwork, undirected_csr
from .loan_data import LoanDataset

METHODS = ("edge_betweenness", "label_propagation")


@dataclass
class Partition:
    node_ids: list
    labels: np.ndarray  # dense community id per node, numbered by first appearance
    modularity: float
    method: str

    @property
    def n_communities(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def members(self) -> list:
        groups = [[] for _ in range(self.n_communities)]
        for v, c in enumerate(self.labels.tolist()):
            groups[c].append(v)
        return groups


def relabel(labels) -> np.ndarray:
    seen: dict = {}
    return np.array([seen.setdefault(c, len(seen)) for c in np.asarray(labels).tolist()], dtype=np.int64)


def modularity(n: int, pairs: np.ndarray, labels) -> float:
    """Newman modularity of ``labels`` on the undirected simple graph ``pairs``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    m = pairs.shape[0]
    if m == 0:
        return 0.0
    labels = np.asarray(labels)
    k = labels.max() + 1
    deg = np.bincount(pairs.ravel(), minlength=n).astype(float)
    internal = np.bincount(labels[pairs[:, 0]][labels[pairs[:, 0]] == labels[pairs[:, 1]]], minlength=k)
    tot = np.bincount(labels, weights=deg, minlength=k)
    return float(np.sum(internal / m - (tot / (2.0 * m)) ** 2))


def _component_of(start: int, adj: list, alive: np.ndarray) -> list:
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w, e in adj[v]:
            if alive[e] and w not in seen:
                seen.add(w)
                queue.append(w)
    return sorted(seen)


def _edge_betweenness(nodes: list, pairs: np.ndarray, edge_idx: np.ndarray) -> np.ndarray:
    local = {v: i for i, v in enumerate(nodes)}
    sub_pairs = np.array([[local[a], local[b]] for a, b in pairs[edge_idx].tolist()], dtype=np.int64).reshape(-1, 2)
    indptr, indices, eids = undirected_csr(len(nodes), sub_pairs)
    _, ebc = _kernels.brandes(indptr, indices, eids, sub_pairs.shape[0])
    return ebc


def girvan_newman(sub: Subnetwork, max_communities: int | None = None) -> Partition:
    """Remove the highest-betweenness edges repeatedly and keep the split with
    the best modularity.

    Edges tied for the maximum are removed together, so the dendrogram does
    not depend on how the nodes happen to be numbered.  Betweenness is
    recomputed only inside the components that lost an edge.
    """
    n = sub.n
    pairs = sub.undirected_edges
    m = pairs.shape[0]
    if m == 0:
        labels = np.arange(n, dtype=np.int64)
        return Partition(list(sub.node_ids), labels, 0.0, "edge_betweenness")
    adj = [[] for _ in range(n)]
    for e, (a, b) in enumerate(pairs.tolist()):
        adj[a].append((b, e))
        adj[b].append((a, e))
    alive = np.ones(m, dtype=bool)
    labels = np.full(n, -1, dtype=np.int64)
    # the subnetwork is connected, but tolerate a forest of pieces
    n_comm = 0
    for v in range(n):
        if labels[v] < 0:
            labels[_component_of(v, adj, alive)] = n_comm
            n_comm += 1
    ebc = np.zeros(m)
    for c in range(n_comm):
        idx = np.flatnonzero(labels[pairs[:, 0]] == c)
        if idx.size:
            ebc[idx] = _edge_betweenness(np.flatnonzero(labels == c).tolist(), pairs, idx)
    best_labels = labels.copy()
    best_q = modularity(n, pairs, labels)
    limit = max_communities if max_communities is not None else n
    while alive.any():
        top = ebc[alive].max()
        cut = np.flatnonzero(alive & (ebc >= top - 1e-9 * max(1.0, top)))
        alive[cut] = False
        split = labels.copy()
        count = n_comm
        touched = []
        for old in sorted(set(labels[pairs[cut, 0]].tolist())):
            members = np.flatnonzero(labels == old).tolist()
            pending = set(members)
            first = True
            while pending:
                comp = _component_of(min(pending), adj, alive)
                pending.difference_update(comp)
                if first:
                    split[comp] = old
                    first = False
                else:
                    split[comp] = count
                    count += 1
                touched.append(comp)
        if count > limit:
            break
        labels, n_comm = split, count
        q = modularity(n, pairs, labels)
        if q > best_q:
            best_q, best_labels = q, labels.copy()
        for comp in touched:
            in_comp = np.zeros(n, dtype=bool)
            in_comp[comp] = True
            idx = np.flatnonzero(alive & in_comp[pairs[:, 0]] & in_comp[pairs[:, 1]])
            if idx.size:
                ebc[idx] = _edge_betweenness(comp, pairs, idx)
    return Partition(list(sub.node_ids), relabel(best_labels), float(best_q), "edge_betweenness")


def label_propagation(sub: Subnetwork, max_sweeps: int = 100) -> Partition:
    """Asynchronous label propagation in ascending node order; a node takes the
    most frequent neighbour label, the lowest label on ties."""
    n = sub.n
    neigh = sub.neighbors()
    labels = list(range(n))
    for _ in range(max_sweeps):
        changed = False
        for v in range(n):
            if not neigh[v]:
                continue
            counts: dict = {}
            for w in neigh[v]:
                counts[labels[w]] = counts.get(labels[w], 0) + 1
            top = max(counts.values())
            new = min(c for c, k in counts.items() if k == top)
            if new != labels[v]:
                labels[v] = new
                changed = True
        if not changed:
            break
    dense = relabel(labels)
    return Partition(list(sub.node_ids), dense, modularity(n, sub.undirected_edges, dense), "label_propagation")


def detect_communities(sub: Subnetwork, method: str = "edge_betweenness",
                       max_communities: int | None = None) -> Partition:
    if sub.n == 0:
        raise ValueError("empty subnetwork")
    if method == "edge_betweenness":
        return girvan_newman(sub, max_communities)
    if method == "label_propagation":
        return label_propagation(sub)
    raise ValueError(f"unknown community method {method!r}; expected one of {METHODS}")


# ------------------------------------------------------------------ default rates

def defaulted_customers(ds: LoanDataset, cutoff) -> set:
    """Borrowers with at least one defaulted repayment due on or before ``cutoff``."""
    rep = ds.repayments
    keep = (rep["due_date"].to_numpy("datetime64[D]") <= np.datetime64(cutoff, "D")) & ds.default_flags
    contracts = set(rep["contract_id"].to_numpy()[keep])
    con = ds.contracts
    return set(con["borrower_id"].to_numpy()[con["contract_id"].isin(contracts).to_numpy()])


@dataclass
class CommunityRiskTable:
    community: np.ndarray
    size: np.ndarray
    default_count: np.ndarray
    default_rate: np.ndarray

    def rows(self) -> list:
        return [
            {"community": int(c), "size": int(s), "default_count": int(d), "default_rate": float(r)}
            for c, s, d, r in zip(self.community, self.size, self.default_count, self.default_rate)
        ]

    def to_json(self) -> str:
        return json.dumps(self.rows(), indent=2) + "\n"


def community_default_rate(partition: Partition, ds: LoanDataset | None, cutoff=None, focal=None,
                           defaulted: set | None = None) -> CommunityRiskTable:
    """Customer-level default rate of every community as of ``cutoff``.

    With ``focal`` set, that customer is removed from its own community's
    numerator and denominator so a node never sees its own label.
    """
    if defaulted is None:
        defaulted = defaulted_customers(ds, cutoff)
    k = partition.n_communities
    flags = np.array([c in defaulted for c in partition.node_ids], dtype=np.int64)
    size = np.bincount(partition.labels, minlength=k).astype(np.int64)
    count = np.bincount(partition.labels, weights=flags, minlength=k).astype(np.int64)
    if focal is not None and focal in partition.node_ids:
        c = partition.labels[partition.node_ids.index(focal)]
        size[c] -= 1
        count[c] -= flags[partition.node_ids.index(focal)]
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(size > 0, count / np.maximum(size, 1), 0.0)
    return CommunityRiskTable(np.arange(k), size, count, rate)
