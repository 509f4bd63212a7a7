"""Hybrid feature vectors per (customer, quarter) and quarterly default labels.

Five categories of dimensions:

BP  basic profile        (registration data)
CR  credit behaviour     (loan and repayment history before the cutoff)
AL  active loans         (contracts running during the quarter)
NS  network structure    (scores on the guarantee-network snapshot)
CM  community behaviour  (default rates of the node's detected community)

The feature cutoff of a quarter is the first day of the next quarter; nothing
dated on or after it is read.  The network snapshot is taken on the last day
of the quarter.
"""
from __future__ import annotations

import hashlib
import io
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import total_ordering

import numpy as np
import pandas as pd

from .centrality import compute_scores
from .community import detect_communities
from .graph import GuaranteeNetwork, build_network, components
from .loan_data import (
    BUSINESS_NATURES,
    CAPITAL_RETURN_TYPES,
    ENTERPRISE_SCALES,
    INTEREST_RETURN_TYPES,
    LoanDataset,
    month_index,
)

CATEGORIES = ("BP", "CR", "AL", "NS", "CM")
MONTHS_SINCE_DEFAULT_CAP = 120

ABLATIONS = {
    "NW": ("BP", "CR", "AL"),
    "NW+CM": ("BP", "CR", "AL", "CM"),
    "NW+N": ("BP", "CR", "AL", "NS"),
    "H": ("BP", "CR", "AL", "NS", "CM"),
}


class LeakageError(ValueError):
    """The network snapshot does not match the feature window."""


@total_ordering
@dataclass(frozen=True)
class Quarter:
    year: int
    q: int

    @classmethod
    def parse(cls, text) -> "Quarter":
        if isinstance(text, Quarter):
            return text
        m = re.fullmatch(r"\s*(\d{4})\s*-?\s*[Qq]([1-4])\s*", str(text))
        if not m:
            raise ValueError(f"not a quarter: {text!r} (expected e.g. 2013Q1)")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.year}Q{self.q}"

    def __lt__(self, other) -> bool:
        return (self.year, self.q) < (other.year, other.q)

    def shift(self, k: int) -> "Quarter":
        i = self.year * 4 + (self.q - 1) + k
        return Quarter(i // 4, i % 4 + 1)

    @property
    def start(self) -> np.datetime64:
        return np.datetime64(f"{self.year}-{3 * (self.q - 1) + 1:02d}-01", "D")

    @property
    def end(self) -> np.datetime64:
        """Exclusive end: the first day of the following quarter."""
        return self.shift(1).start

    @property
    def as_of(self) -> np.datetime64:
        return self.end - 1


@dataclass(frozen=True)
class WindowQuad:
    """Train on ``train`` features, labelled by ``observation``; predict the
    ``prediction`` cohort and score it against ``evaluation`` outcomes."""

    train: Quarter
    observation: Quarter
    prediction: Quarter
    evaluation: Quarter

    @classmethod
    def starting(cls, q) -> "WindowQuad":
        q = Quarter.parse(q)
        return cls(q, q.shift(1), q.shift(1), q.shift(2))


def dimension_spec() -> list:
    """Ordered (name, category) pairs of the full hybrid vector."""
    dims = [("log_registered_capital", "BP")]
    dims += [(f"scale_{s}", "BP") for s in ENTERPRISE_SCALES]
    dims += [("employee_count", "BP")]
    dims += [(f"nature_{s}", "BP") for s in BUSINESS_NATURES]
    dims += [("firm_age_months", "BP")]
    dims += [(n, "CR") for n in ("hist_loan_count", "hist_loan_amount", "hist_default_count",
                                 "hist_default_amount", "hist_default_rate", "months_since_default",
                                 "has_history")]
    dims += [(n, "AL") for n in ("active_loan_amount", "active_contract_count", "mean_remaining_term")]
    dims += [(f"capital_{s}", "AL") for s in CAPITAL_RETURN_TYPES]
    dims += [(f"interest_{s}", "AL") for s in INTEREST_RETURN_TYPES]
    dims += [(n, "NS") for n in ("in_degree", "out_degree", "authority", "hub", "pagerank", "kshell",
                                 "eigenvector", "betweenness", "betweenness_norm", "closeness",
                                 "component_size", "component_diameter")]
    dims += [(n, "CM") for n in ("community_default_rate", "community_size", "defaulted_neighbors")]
    return dims


@dataclass
class FeatureMatrix:
    customer_ids: list
    quarter: str
    X: np.ndarray
    dimensions: list
    categories: dict
    y: np.ndarray | None = None

    @property
    def shape(self):
        return self.X.shape

    def select(self, categories) -> "FeatureMatrix":
        """Column subset holding the given categories (no recomputation)."""
        keep = [j for j, d in enumerate(self.dimensions) if self.categories[d] in set(categories)]
        dims = [self.dimensions[j] for j in keep]
        return FeatureMatrix(list(self.customer_ids), self.quarter, self.X[:, keep], dims,
                             {d: self.categories[d] for d in dims}, self.y)

    def ablation(self, name: str) -> "FeatureMatrix":
        return self.select(ABLATIONS[name])

    def with_labels(self, y) -> "FeatureMatrix":
        return FeatureMatrix(list(self.customer_ids), self.quarter, self.X, list(self.dimensions),
                             dict(self.categories), np.asarray(y, dtype=np.int64))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.dimensions.index(name)]

    def fingerprint(self, columns=None) -> str:
        cols = self.dimensions if columns is None else columns
        idx = [self.dimensions.index(c) for c in cols]
        h = hashlib.sha256()
        h.update("\x1f".join(self.customer_ids).encode())
        h.update("\x1f".join(cols).encode())
        h.update(np.ascontiguousarray(self.X[:, idx]).tobytes())
        return h.hexdigest()

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = ["customer_id"] + list(self.dimensions) + (["label"] if self.y is not None else [])
        buf.write(",".join(header) + "\n")
        for i, cid in enumerate(self.customer_ids):
            vals = [repr(float(v)) for v in self.X[i]]
            if self.y is not None:
                vals.append(str(int(self.y[i])))
            buf.write(cid + "," + ",".join(vals) + "\n")
        return buf.getvalue()

    def categories_json(self) -> str:
        return json.dumps({"quarter": self.quarter, "dimensions": self.dimensions,
                           "categories": self.categories}, indent=2) + "\n"


# ------------------------------------------------------------------ instances

def select_instances(ds: LoanDataset, window) -> list:
    """Customers with a contract active on some day of the quarter, sorted."""
    q = Quarter.parse(window.train if isinstance(window, WindowQuad) else window)
    con = ds.contracts
    start = con["start_date"].to_numpy("datetime64[D]")
    active = (start < q.end) & (ds.maturity_dates > q.start)
    return sorted(set(con["borrower_id"].to_numpy()[active]))


def label(ds: LoanDataset, customer: str, observation_window) -> int:
    return int(labels(ds, [customer], observation_window)[0])


def labels(ds: LoanDataset, customers, observation_window) -> np.ndarray:
    """1 iff some repayment of the customer due inside the quarter defaulted."""
    q = Quarter.parse(observation_window)
    rep = ds.repayments
    due = rep["due_date"].to_numpy("datetime64[D]")
    hit = (due >= q.start) & (due < q.end) & ds.default_flags
    bad_contracts = set(rep["contract_id"].to_numpy()[hit])
    con = ds.contracts
    bad = set(con["borrower_id"].to_numpy()[con["contract_id"].isin(bad_contracts).to_numpy()])
    return np.array([1 if c in bad else 0 for c in customers], dtype=np.int64)


# ---------------------------------------------------------- network analysis

@dataclass
class NetworkAnalysis:
    """Scores and communities of every component of one snapshot."""

    net: GuaranteeNetwork
    nodes: pd.DataFrame  # indexed by customer id
    neighbors: dict = field(default_factory=dict)
    method: str = "edge_betweenness"


_NODE_COLUMNS = ("customer_id", "component", "in_degree", "out_degree", "authority", "hub", "pagerank", "kshell",
                 "eigenvector", "betweenness", "betweenness_norm", "closeness", "component_size",
                 "component_diameter", "community")


def _analyse_component(sub, method, max_communities):
    scores = compute_scores(sub)
    part = detect_communities(sub, method=method, max_communities=max_communities)
    return sub, scores, part


def analyze_network(net: GuaranteeNetwork, method: str = "edge_betweenness", max_communities: int | None = 30,
                    threads: int = 1) -> NetworkAnalysis:
    comps = components(net)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _analyse_component(s, method, max_communities), comps))
    else:
        results = [_analyse_component(s, method, max_communities) for s in comps]
    cols: dict = {c: [] for c in _NODE_COLUMNS}
    neighbors = {}
    comm_offset = 0
    for sub, sc, part in results:
        n = sub.n
        cols["customer_id"].append(np.asarray(sub.node_ids, dtype=object))
        cols["component"].append(np.full(n, sub.index, dtype=np.int64))
        cols["in_degree"].append(sc.in_degree.astype(float))
        cols["out_degree"].append(sc.out_degree.astype(float))
        cols["authority"].append(sc.authority)
        cols["hub"].append(sc.hub)
        cols["pagerank"].append(sc.pagerank if sc.has_edges else np.zeros(n))
        cols["kshell"].append(sc.kshell.astype(float))
        cols["eigenvector"].append(sc.eigenvector)
        cols["betweenness"].append(sc.betweenness)
        cols["betweenness_norm"].append(sc.betweenness_normalized)
        cols["closeness"].append(sc.closeness)
        cols["component_size"].append(np.full(n, float(n)))
        cols["component_diameter"].append(np.full(n, float(sub.diameter)))
        cols["community"].append(part.labels + comm_offset)
        comm_offset += part.n_communities
        for v, nb in enumerate(sub.neighbors()):
            if nb:
                neighbors[sub.node_ids[v]] = [sub.node_ids[w] for w in nb]
    if results:
        nodes = pd.DataFrame({c: np.concatenate(v) for c, v in cols.items()}).set_index("customer_id")
    else:
        nodes = pd.DataFrame(columns=["component", "community"]).rename_axis("customer_id")
    return NetworkAnalysis(net=net, nodes=nodes, neighbors=neighbors, method=method)


# ------------------------------------------------------------------- assembly

def _months_between(earlier, later) -> np.ndarray:
    """Whole months from ``earlier`` to ``later`` (partial months drop)."""
    e = np.asarray(earlier, dtype="datetime64[D]")
    la = np.asarray(later, dtype="datetime64[D]")
    months = month_index(la) - month_index(e)
    day_e = (e - e.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64)
    day_l = (la - la.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64)
    return months - (day_l < day_e)


def assemble(ds: LoanDataset, window, net: GuaranteeNetwork | None = None,
             analysis: NetworkAnalysis | None = None, method: str = "edge_betweenness",
             max_communities: int | None = 30, threads: int = 1) -> FeatureMatrix:
    """Hybrid feature matrix of the quarter's instances (labels not attached).

    ``net`` / ``analysis`` may be passed to reuse a snapshot; their date must be
    the quarter's last day.
    """
    q = Quarter.parse(window.train if isinstance(window, WindowQuad) else window)
    ws, we = q.start, q.end
    if analysis is not None:
        net = analysis.net
    if net is None:
        net = build_network(ds, q.as_of)
    if np.datetime64(net.as_of, "D") != q.as_of:
        raise LeakageError(f"network snapshot {net.as_of} does not match window {q} (expected {q.as_of})")
    if analysis is None:
        analysis = analyze_network(net, method=method, max_communities=max_communities, threads=threads)

    ids = select_instances(ds, q)
    n = len(ids)
    spec = dimension_spec()
    names = [d for d, _ in spec]
    col = {d: j for j, d in enumerate(names)}
    X = np.zeros((n, len(names)))
    if n == 0:
        return FeatureMatrix([], str(q), X, names, dict(spec))
    pos = pd.Series(np.arange(n), index=ids)

    # BP
    cu = ds.customers.set_index("customer_id").reindex(ids)
    X[:, col["log_registered_capital"]] = np.log1p(cu["registered_capital"].to_numpy(float))
    for s in ENTERPRISE_SCALES:
        X[:, col[f"scale_{s}"]] = (cu["enterprise_scale"].to_numpy() == s)
    X[:, col["employee_count"]] = cu["employee_count"].to_numpy(float)
    for s in BUSINESS_NATURES:
        X[:, col[f"nature_{s}"]] = (cu["business_nature"].to_numpy() == s)
    reg = cu["registration_date"].to_numpy("datetime64[D]")
    X[:, col["firm_age_months"]] = _months_between(reg, np.full(n, we)).clip(0)

    # CR
    con = ds.contracts
    c_borrower = con["borrower_id"].to_numpy()
    c_start = con["start_date"].to_numpy("datetime64[D]")
    c_mat = ds.maturity_dates
    in_inst = con["borrower_id"].isin(pos.index).to_numpy()
    hist = in_inst & (c_start < ws)  # loans taken in this window are AL, not history
    if hist.any():
        hb = pos[c_borrower[hist]].to_numpy()
        X[:, col["hist_loan_count"]] = np.bincount(hb, minlength=n)
        X[:, col["hist_loan_amount"]] = np.bincount(hb, weights=con["loan_amount"].to_numpy(float)[hist], minlength=n)

    rep = ds.repayments
    r_due = rep["due_date"].to_numpy("datetime64[D]")
    borrower_of = pd.Series(c_borrower, index=con["contract_id"].to_numpy())
    r_borrower = borrower_of.reindex(rep["contract_id"].to_numpy()).to_numpy()
    seen = (r_due < we) & pd.Series(r_borrower).isin(pos.index).to_numpy()
    n_seen = np.zeros(n)
    if seen.any():
        rb = pos[r_borrower[seen]].to_numpy()
        flags = ds.default_flags[seen]
        n_seen = np.bincount(rb, minlength=n).astype(float)
        d_count = np.bincount(rb, weights=flags.astype(float), minlength=n)
        d_amount = np.bincount(rb, weights=rep["amount_due"].to_numpy(float)[seen] * flags, minlength=n)
        X[:, col["hist_default_count"]] = d_count
        X[:, col["hist_default_amount"]] = d_amount
        X[:, col["hist_default_rate"]] = np.divide(d_count, n_seen, out=np.zeros(n), where=n_seen > 0)
        last = np.full(n, np.datetime64("NaT"), dtype="datetime64[D]")
        if flags.any():
            frame = pd.DataFrame({"i": rb[flags], "due": r_due[seen][flags]}).groupby("i")["due"].max()
            last[frame.index.to_numpy()] = frame.to_numpy("datetime64[D]")
        since = np.full(n, float(MONTHS_SINCE_DEFAULT_CAP))
        has_def = ~np.isnat(last)
        since[has_def] = np.minimum(_months_between(last[has_def], np.full(has_def.sum(), we)),
                                    MONTHS_SINCE_DEFAULT_CAP)
        X[:, col["months_since_default"]] = since
    else:
        X[:, col["months_since_default"]] = MONTHS_SINCE_DEFAULT_CAP
    X[:, col["has_history"]] = (n_seen > 0) | (X[:, col["hist_loan_count"]] > 0)

    # AL
    active = in_inst & (c_start < we) & (c_mat > ws)
    ab = pos[c_borrower[active]].to_numpy()
    X[:, col["active_loan_amount"]] = np.bincount(ab, weights=con["loan_amount"].to_numpy(float)[active], minlength=n)
    cnt = np.bincount(ab, minlength=n).astype(float)
    X[:, col["active_contract_count"]] = cnt
    remaining = _months_between(np.full(active.sum(), we), c_mat[active]).clip(0).astype(float)
    rem_sum = np.bincount(ab, weights=remaining, minlength=n)
    X[:, col["mean_remaining_term"]] = np.divide(rem_sum, cnt, out=np.zeros(n), where=cnt > 0)
    for s in CAPITAL_RETURN_TYPES:
        hit = con["capital_return_type"].to_numpy()[active] == s
        X[:, col[f"capital_{s}"]] = np.bincount(ab[hit], minlength=n) > 0
    for s in INTEREST_RETURN_TYPES:
        hit = con["interest_return_type"].to_numpy()[active] == s
        X[:, col[f"interest_{s}"]] = np.bincount(ab[hit], minlength=n) > 0

    # NS; instances absent from the snapshot are treated as isolated nodes
    nodes = analysis.nodes.reindex(ids)
    present = nodes["component"].notna().to_numpy()
    for d, cat in spec:
        if cat == "NS":
            X[:, col[d]] = nodes[d].to_numpy(float) if d in nodes else 0.0
    X[~present, col["component_size"]] = 1.0
    X[~present] = np.where(np.isnan(X[~present]), 0.0, X[~present])

    # CM
    cutoff = q.as_of
    from .community import defaulted_customers
    defaulted = defaulted_customers(ds, cutoff)
    all_nodes = analysis.nodes
    if len(all_nodes):
        flag = pd.Series([c in defaulted for c in all_nodes.index], index=all_nodes.index, dtype=float)
        comm = all_nodes["community"].astype(np.int64)
        size = comm.map(comm.value_counts())
        count = comm.map(flag.groupby(comm).sum())
        own = flag
        rate = ((count - own) / (size - 1)).where(size > 1, 0.0)
        X[:, col["community_default_rate"]] = rate.reindex(ids).fillna(0.0).to_numpy()
        X[:, col["community_size"]] = size.reindex(ids).fillna(1.0).to_numpy()
    else:
        X[:, col["community_size"]] = 1.0
    X[:, col["defaulted_neighbors"]] = [
        sum(1 for w in analysis.neighbors.get(c, ()) if w in defaulted) for c in ids
    ]
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    return FeatureMatrix(ids, str(q), X, names, dict(spec))


def build_matrix(ds: LoanDataset, quarter, label_quarter=None, **kw) -> FeatureMatrix:
    """Assemble features for ``quarter`` and attach labels from ``label_quarter``
    (default: the next quarter)."""
    q = Quarter.parse(quarter)
    fm = assemble(ds, q, **kw)
    lq = q.shift(1) if label_quarter is None else Quarter.parse(label_quarter)
    return fm.with_labels(labels(ds, fm.customer_ids, lq))
