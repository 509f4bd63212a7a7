"""Guarantee network snapshots, weakly connected subnetworks and the
structural statistics of the loan book."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
import pandas as pd

from . import _kernels
from .loan_data import LoanDataset, month_index, records_to_dataset

SIZE_BUCKETS = ((1, 49, "1-49"), (50, 299, "50-299"), (300, None, "300+"))
PERIOD_BUCKETS = ((1, 12, "one_year"), (13, 36, "two_three_year"), (37, None, "long"))


@dataclass
class GuaranteeNetwork:
    """Directed guarantor -> borrower graph at one date.

    Parallel edges are collapsed to one carrying the earliest signing date.
    ``node_ids`` is sorted, so node ``i`` is the i-th smallest customer id.
    """

    node_ids: list
    src: np.ndarray
    dst: np.ndarray
    signed: np.ndarray
    as_of: np.datetime64

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @cached_property
    def index(self) -> dict:
        return {c: i for i, c in enumerate(self.node_ids)}

    def edge_list(self) -> list:
        return [(self.node_ids[a], self.node_ids[b]) for a, b in zip(self.src.tolist(), self.dst.tolist())]


def _as_dataset(data) -> LoanDataset:
    if isinstance(data, LoanDataset):
        return data
    return records_to_dataset(list(data))


def build_network(data, as_of, active_only: bool = True) -> GuaranteeNetwork:
    """Snapshot of the guarantee network on ``as_of``.

    An edge guarantor -> borrower is present when a guarantee was signed on or
    before ``as_of`` for a contract that has started and not yet matured
    (maturity = start + term months, exclusive).  Borrowers holding an active
    contract are nodes even without edges.  With ``active_only=False`` every
    guarantee signed by ``as_of`` counts, matured or not, and every borrower
    with a contract started by then is a node.
    """
    ds = _as_dataset(data)
    as_of = np.datetime64(as_of, "D")
    con = ds.contracts
    start = con["start_date"].to_numpy("datetime64[D]")
    maturity = ds.maturity_dates
    if active_only:
        live = (start <= as_of) & (as_of < maturity)
    else:
        live = start <= as_of
    live_ids = pd.Series(live, index=con["contract_id"].to_numpy())

    gu = ds.guarantees
    borrower_of = pd.Series(con["borrower_id"].to_numpy(), index=con["contract_id"].to_numpy())
    g_live = gu["contract_id"].map(live_ids).fillna(False).to_numpy(bool)
    g_live &= gu["signed_date"].to_numpy("datetime64[D]") <= as_of
    edges = pd.DataFrame({
        "g": gu["guarantor_id"].to_numpy()[g_live],
        "b": borrower_of.reindex(gu["contract_id"].to_numpy()[g_live]).to_numpy(),
        "signed": gu["signed_date"].to_numpy("datetime64[D]")[g_live],
    })
    edges = edges[edges["g"] != edges["b"]]
    edges = edges.groupby(["g", "b"], sort=True, as_index=False)["signed"].min()

    nodes = set(edges["g"]).union(edges["b"]).union(con["borrower_id"].to_numpy()[live])
    node_ids = sorted(nodes)
    index = {c: i for i, c in enumerate(node_ids)}
    src = np.array([index[c] for c in edges["g"]], dtype=np.int64)
    dst = np.array([index[c] for c in edges["b"]], dtype=np.int64)
    order = np.lexsort((dst, src))
    return GuaranteeNetwork(
        node_ids=node_ids,
        src=src[order],
        dst=dst[order],
        signed=edges["signed"].to_numpy("datetime64[D]")[order],
        as_of=as_of,
    )


@dataclass
class Subnetwork:
    """One weakly connected component, relabelled to local indices 0..n-1.

    ``index`` is the 1-based GN number: components ordered by descending size,
    ties by smallest contained customer id.
    """

    index: int
    node_ids: list
    src: np.ndarray
    dst: np.ndarray
    global_nodes: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n: int, edges, node_ids=None, index: int = 1) -> "Subnetwork":
        edges = sorted({(int(a), int(b)) for a, b in edges if a != b})
        src = np.array([a for a, _ in edges], dtype=np.int64)
        dst = np.array([b for _, b in edges], dtype=np.int64)
        if node_ids is None:
            node_ids = [str(i) for i in range(n)]
        return cls(index=index, node_ids=list(node_ids), src=src, dst=dst,
                   global_nodes=np.arange(n, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @cached_property
    def undirected_edges(self) -> np.ndarray:
        """Sorted unique (u, v) pairs with u < v."""
        if self.src.size == 0:
            return np.zeros((0, 2), dtype=np.int64)
        pairs = np.stack([np.minimum(self.src, self.dst), np.maximum(self.src, self.dst)], axis=1)
        return np.unique(pairs, axis=0)

    @cached_property
    def csr(self):
        """Undirected simple graph as (indptr, indices, edge_ids)."""
        return undirected_csr(self.n, self.undirected_edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.src, self.dst] = 1.0
        return a

    def neighbors(self) -> list:
        indptr, indices, _ = self.csr
        return [indices[indptr[v]:indptr[v + 1]].tolist() for v in range(self.n)]

    @cached_property
    def diameter(self) -> int:
        if self.n <= 1:
            return 0
        indptr, indices, _ = self.csr
        _, ecc = _kernels.bfs_stats(indptr, indices)
        return int(ecc.max())


def undirected_csr(n: int, pairs: np.ndarray):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    m = pairs.shape[0]
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    eids = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((cols, rows))
    rows, cols, eids = rows[order], cols[order], eids[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64), eids.astype(np.int64)


def _find_roots(n: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(src.tolist(), dst.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    return np.array([find(i) for i in range(n)], dtype=np.int64)


def components(net: GuaranteeNetwork) -> list:
    """Weakly connected components, largest first."""
    if net.n_nodes == 0:
        return []
    roots = _find_roots(net.n_nodes, net.src, net.dst)
    # the root is the smallest member index, i.e. the smallest customer id
    uniq, inverse, counts = np.unique(roots, return_inverse=True, return_counts=True)
    comp_order = np.lexsort((uniq, -counts))
    rank = np.empty_like(comp_order)
    rank[comp_order] = np.arange(comp_order.size)
    node_comp = rank[inverse]
    edge_comp = node_comp[net.src]
    local = np.empty(net.n_nodes, dtype=np.int64)
    members = [[] for _ in range(uniq.size)]
    for v, c in enumerate(node_comp.tolist()):
        local[v] = len(members[c])
        members[c].append(v)
    edge_groups = [[] for _ in range(uniq.size)]
    for e, c in enumerate(edge_comp.tolist()):
        edge_groups[c].append(e)
    out = []
    for c in range(uniq.size):
        nodes = np.array(members[c], dtype=np.int64)
        es = np.array(edge_groups[c], dtype=np.int64)
        out.append(Subnetwork(
            index=c + 1,
            node_ids=[net.node_ids[v] for v in members[c]],
            src=local[net.src[es]] if es.size else np.zeros(0, dtype=np.int64),
            dst=local[net.dst[es]] if es.size else np.zeros(0, dtype=np.int64),
            global_nodes=nodes,
        ))
    return out


@dataclass
class ComplexityMetrics:
    month: str
    avg_diameter: float
    n_components: int
    n_nodes: int
    n_edges: int


def diameter_stats(net: GuaranteeNetwork, month=None, comps=None) -> ComplexityMetrics:
    """Average component diameter (undirected BFS) plus size counts."""
    if comps is None:
        comps = components(net)
    if month is None:
        month = str(np.datetime64(net.as_of, "M"))
    avg = float(np.mean([c.diameter for c in comps])) if comps else 0.0
    return ComplexityMetrics(month=str(month), avg_diameter=avg, n_components=len(comps),
                             n_nodes=net.n_nodes, n_edges=net.n_edges)


def complexity_by_month(ds: LoanDataset, months=None) -> list:
    """Month-end snapshots' complexity, one row per month of the loan book."""
    if months is None:
        dates = ds.contracts["start_date"].to_numpy("datetime64[D]")
        if dates.size == 0:
            return []
        first = dates.min().astype("datetime64[M]")
        rep_due = ds.repayments["due_date"].to_numpy("datetime64[D]")
        last = max(dates.max(), rep_due.max() if rep_due.size else dates.max()).astype("datetime64[M]")
        months = np.arange(first, last + 1)
    out = []
    for m in months:
        m = np.datetime64(m, "M")
        as_of = (m + 1).astype("datetime64[D]") - 1
        out.append(diameter_stats(build_network(ds, as_of), month=str(m)))
    return out


# ------------------------------------------------------------------------ stats

def _bucket(value: int, buckets) -> str:
    for lo, hi, name in buckets:
        if value >= lo and (hi is None or value <= hi):
            return name
    raise ValueError(value)


@dataclass
class StatsReport:
    n_customers: int
    n_guarantee_relations: int
    n_contracts: int
    n_repayments: int
    n_defaults: int
    default_rate: float
    loan_period_histogram: list
    defaults_by_month: list
    default_month_offset_histogram: list
    first_year_default_share: float
    component_size_vs_default_rate: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def csv_tables(self) -> dict:
        """Plot-ready CSV text keyed by file name."""
        out = {}
        for name, rows in (
            ("loan_period.csv", self.loan_period_histogram),
            ("defaults_by_month.csv", self.defaults_by_month),
            ("default_offset.csv", self.default_month_offset_histogram),
            ("component_sizes.csv", self.component_size_vs_default_rate),
        ):
            out[name] = rows_to_csv(rows)
        return out


def rows_to_csv(rows: list, columns=None) -> str:
    buf = io.StringIO()
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def customer_default_table(ds: LoanDataset, cutoff=None) -> pd.DataFrame:
    """Per-borrower repayment counts and defaults (optionally due on or before ``cutoff``)."""
    rep = ds.repayments
    flags = ds.default_flags
    if cutoff is not None:
        keep = rep["due_date"].to_numpy("datetime64[D]") <= np.datetime64(cutoff, "D")
        rep, flags = rep[keep], flags[keep]
    borrower = pd.Series(ds.contracts["borrower_id"].to_numpy(), index=ds.contracts["contract_id"].to_numpy())
    frame = pd.DataFrame({"customer_id": borrower.reindex(rep["contract_id"].to_numpy()).to_numpy(),
                          "default": flags.astype(np.int64)})
    return frame.groupby("customer_id")["default"].agg(["size", "sum"]).rename(
        columns={"size": "n_repayments", "sum": "n_defaults"})


def overall_stats(ds: LoanDataset) -> StatsReport:
    """Loan-book statistics: volumes, default rate, period and offset
    histograms, monthly default series and component-size buckets."""
    con, rep = ds.contracts, ds.repayments
    flags = ds.default_flags
    n_rep = int(len(rep))
    n_def = int(flags.sum())

    terms = con["term_months"].to_numpy()
    period_counts = {name: 0 for _, _, name in PERIOD_BUCKETS}
    for t in terms.tolist():
        period_counts[_bucket(t, PERIOD_BUCKETS)] += 1
    loan_period = [{"bucket": k, "n_contracts": v, "share": (v / len(terms) if len(terms) else 0.0)}
                   for k, v in period_counts.items()]

    due = rep["due_date"].to_numpy("datetime64[D]")
    by_month = []
    if n_rep:
        months = due.astype("datetime64[M]")
        frame = pd.DataFrame({"month": months, "d": flags.astype(np.int64)})
        agg = frame.groupby("month")["d"].agg(["size", "sum"])
        for m, row in agg.iterrows():
            by_month.append({"month": str(np.datetime64(m, "M")), "n_repayments": int(row["size"]),
                             "n_defaults": int(row["sum"]), "default_rate": float(row["sum"] / row["size"])})

    start_of = pd.Series(con["start_date"].to_numpy("datetime64[D]"), index=con["contract_id"].to_numpy())
    offsets = []
    if n_def:
        d_due = due[flags]
        d_start = start_of.reindex(rep["contract_id"].to_numpy()[flags]).to_numpy("datetime64[D]")
        off = month_index(d_due) - month_index(d_start)
        # a due date earlier in its month than the start day has not completed the month
        days_due = (d_due - d_due.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64)
        days_start = (d_start - d_start.astype("datetime64[M]").astype("datetime64[D]")).astype(np.int64)
        off = off - (days_due < days_start)
        vals, counts = np.unique(off, return_counts=True)
        offsets = [{"month_offset": int(v), "n_defaults": int(c)} for v, c in zip(vals, counts)]
        first_year = float((off <= 12).sum() / off.size)
    else:
        first_year = 0.0

    size_rows = _component_size_rows(ds)
    return StatsReport(
        n_customers=int(len(ds.customers)),
        n_guarantee_relations=int(len(ds.guarantees)),
        n_contracts=int(len(con)),
        n_repayments=n_rep,
        n_defaults=n_def,
        default_rate=(n_def / n_rep) if n_rep else 0.0,
        loan_period_histogram=loan_period,
        defaults_by_month=by_month,
        default_month_offset_histogram=offsets,
        first_year_default_share=first_year,
        component_size_vs_default_rate=size_rows,
    )


def cumulative_network(ds: LoanDataset) -> GuaranteeNetwork:
    """Every guarantee relation ever signed, regardless of maturity."""
    dates = [ds.contracts["start_date"].to_numpy("datetime64[D]"),
             ds.guarantees["signed_date"].to_numpy("datetime64[D]")]
    dates = np.concatenate(dates)
    last = dates.max() if dates.size else np.datetime64("1970-01-01")
    return build_network(ds, last, active_only=False)


def _component_size_rows(ds: LoanDataset) -> list:
    net = cumulative_network(ds)
    comps = components(net)
    per_cust = customer_default_table(ds)
    total_nodes = max(net.n_nodes, 1)
    acc = {name: dict(n_components=0, n_customers=0, n_repayments=0, n_defaults=0, n_defaulted_customers=0)
           for _, _, name in SIZE_BUCKETS}
    for c in comps:
        row = acc[_bucket(c.n, SIZE_BUCKETS)]
        row["n_components"] += 1
        row["n_customers"] += c.n
        sub = per_cust.reindex(c.node_ids).fillna(0)
        row["n_repayments"] += int(sub["n_repayments"].sum())
        row["n_defaults"] += int(sub["n_defaults"].sum())
        row["n_defaulted_customers"] += int((sub["n_defaults"] > 0).sum())
    out = []
    n_comp = max(len(comps), 1)
    for _, _, name in SIZE_BUCKETS:
        r = acc[name]
        out.append({
            "bucket": name,
            "n_components": r["n_components"],
            "component_share": r["n_components"] / n_comp,
            "n_customers": r["n_customers"],
            "customer_share": r["n_customers"] / total_nodes,
            "default_rate": (r["n_defaults"] / r["n_repayments"]) if r["n_repayments"] else 0.0,
            "customer_default_rate": (r["n_defaulted_customers"] / r["n_customers"]) if r["n_customers"] else 0.0,
        })
    return out

