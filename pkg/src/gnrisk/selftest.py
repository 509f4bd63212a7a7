"""Oracle suites: production routines against the references in ``oracles``."""
from __future__ import annotations

import itertools
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import oracles
from .centrality import betweenness, closeness, eigenvector_centrality, hits, kshell, pagerank
from .gbdt import TrainParams, best_split, grad_hess, leaf_weight, logistic_loss
from .graph import Subnetwork


@dataclass
class SuiteResult:
    name: str
    passed: bool
    cases: int
    failures: list
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"; first failure: {self.failures[0]}" if self.failures else ""
        return f"{status} {self.name}: {self.cases} cases in {self.seconds:.2f}s{extra}"


def connected_graphs(max_nodes: int = 5):
    """Every connected labelled simple graph on 2..max_nodes nodes."""
    for n in range(2, max_nodes + 1):
        slots = list(itertools.combinations(range(n), 2))
        for mask in range(1, 1 << len(slots)):
            pairs = [slots[i] for i in range(len(slots)) if mask >> i & 1]
            if oracles.diameter(n, pairs) and np.isfinite(oracles.floyd_warshall(n, pairs)).all():
                yield n, pairs


def random_connected_graph(rng, max_nodes: int = 8):
    n = int(rng.integers(2, max_nodes + 1))
    pairs = {(int(rng.integers(0, v)), v) for v in range(1, n)}  # random spanning tree
    for a, b in itertools.combinations(range(n), 2):
        if rng.random() < 0.3:
            pairs.add((a, b))
    return n, sorted(pairs)


def _orient(pairs, rng=None):
    if rng is None:
        return list(pairs)
    return [(a, b) if rng.random() < 0.5 else (b, a) for a, b in pairs]


def _check_graph(n, directed, tol=1e-6):
    sub = Subnetwork.from_edges(n, directed)
    undirected = [tuple(p) for p in sub.undirected_edges.tolist()]
    problems = []
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        auth, hub = hits(sub)
        eig = eigenvector_centrality(sub)
        pr = pagerank(sub)
    o_auth, o_hub = oracles.dense_hits(n, directed)
    if np.abs(auth - o_auth).max() > tol or np.abs(hub - o_hub).max() > tol:
        problems.append("hits")
    if np.abs(eig - oracles.dense_eigenvector(n, undirected)).max() > tol:
        problems.append("eigenvector")
    if np.abs(pr - oracles.dense_pagerank(n, directed)).max() > tol:
        problems.append("pagerank")
    node_bc, _ = oracles.betweenness(n, undirected)
    if np.abs(betweenness(sub) - np.array([float(x) for x in node_bc])).max() > 1e-9:
        problems.append("betweenness")
    if np.abs(closeness(sub) - oracles.closeness(n, undirected)).max() > 1e-9:
        problems.append("closeness")
    if not np.array_equal(kshell(sub), oracles.kshell(n, undirected)):
        problems.append("kshell")
    return problems


def centrality_suite(seed: int = 0, n_random: int = 100) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    failures, cases = [], 0
    graphs = [(n, _orient(p)) for n, p in connected_graphs(5)]
    graphs += [(n, _orient(p, rng)) for n, p in connected_graphs(4)]
    for _ in range(n_random):
        n, p = random_connected_graph(rng, 8)
        graphs.append((n, _orient(p, rng)))
    for n, directed in graphs:
        cases += 1
        try:
            bad = _check_graph(n, directed)
        except Exception as exc:  # a convergence warning counts as a failure
            bad = [f"{type(exc).__name__}: {exc}"]
        if bad:
            failures.append(f"n={n} edges={directed}: {','.join(bad)}")
    return SuiteResult("centrality oracles", not failures, cases, failures, time.perf_counter() - t0)


def gbdt_suite(seed: int = 0, n_nodes: int = 1000) -> SuiteResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    failures, cases = [], 0
    for i in range(n_nodes):
        n = int(rng.integers(2, 13))
        F = int(rng.integers(1, 4))
        if i % 3 == 0:
            X = rng.integers(0, 4, size=(n, F)).astype(float)  # plenty of ties
        else:
            X = np.round(rng.normal(size=(n, F)), 3)
        g = rng.normal(size=n)
        h = rng.uniform(0.01, 0.25, size=n)
        params = TrainParams(lam=float(rng.choice([0.0, 0.5, 1.0])), gamma=float(rng.choice([0.0, 0.05])),
                             min_child_hessian=float(rng.choice([0.0, 0.1, 0.3])))
        got = best_split(X, g, h, params)
        cands = [c for c in oracles.exhaustive_split(X, g, h, params.lam, params.gamma, params.min_child_hessian)
                 if c[0] > 0]
        cases += 1
        if not cands:
            if got is not None:
                failures.append(f"node {i}: expected no split, got {got}")
            continue
        top = max(c[0] for c in cands)
        near = sorted((c[1], c[2]) for c in cands if c[0] >= top - 1e-9)
        if got is None or abs(got.gain - top) > 1e-9 or (got.feature, got.threshold) not in near:
            failures.append(f"node {i}: got {got}, best {top} at {near}")
        elif len(near) == 1 and (got.feature, got.threshold) != near[0]:
            failures.append(f"node {i}: got {got}, expected {near[0]}")
    for _ in range(200):
        G, H, lam = float(rng.normal() * 5), float(rng.uniform(0, 10)), float(rng.uniform(0.1, 2))
        w = oracles.golden_section(oracles.exact_quadratic(G, 0.5 * (H + lam)), -100.0, 100.0)
        cases += 1
        if abs(w - leaf_weight(G, H, lam)) > 1e-8:
            failures.append(f"leaf_weight G={G} H={H} lam={lam}")
    step = 1e-6
    for z in np.linspace(-5, 5, 41):
        for y in (0, 1):
            g, h = grad_hess(z, y)
            fd_g = (logistic_loss([z + step], [y]) - logistic_loss([z - step], [y])) / (2 * step)
            gp, _ = grad_hess(z + step, y)
            gm, _ = grad_hess(z - step, y)
            fd_h = (gp - gm) / (2 * step)
            cases += 1
            if abs(g - fd_g) > 1e-4 or abs(h - fd_h) > 1e-4:
                failures.append(f"grad_hess z={z} y={y}")
    return SuiteResult("gbdt oracles", not failures, cases, failures, time.perf_counter() - t0)


def run_all() -> list:
    return [centrality_suite(), gbdt_suite()]
