"""Seeded synthetic loan book with a planted guarantee network and default process.

Generation happens in three stages:

1. Plant the network.  Component sizes follow the small/mid/large mix; small
   components grow by uniform attachment, mid and large ones are chains of
   clusters grown by preferential attachment on guarantor out-degree.  Every
   planted edge gets an activation month.
2. Write contracts (renewal chains per borrower), guarantees (the borrower's
   activated in-edges at signing) and monthly repayment schedules.
3. Simulate defaults month by month.  A firm with a repayment due is
   distressed with probability ``planted_hazard``; distress defaults its
   repayments in their first twelve months, seasoned ones only rarely.  The
   hazard intercept is bisected so the realised repayment default rate hits
   the target.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

import numpy as np
import pandas as pd

from .loan_data import (
    BUSINESS_NATURES,
    CAPITAL_RETURN_TYPES as CAPITAL_RETURN,
    ENTERPRISE_SCALES as SCALES,
    INTEREST_RETURN_TYPES as INTEREST_RETURN,
    LoanDataset,
    _frame_from_columns,
)


class InfeasibleConfig(ValueError):
    pass


# A book whose borrower intake doubles every year and whose relations are
# mostly signed late, so the network densifies across the timeline.
GROWTH_OVERRIDES = {"volume_growth": 1.0, "initial_edge_share": 0.05}


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 5000
    start_month: str = "2012-01"
    n_months: int = 48
    target_default_rate: float = 0.0677
    share_small: float = 0.851
    share_large: float = 0.066
    one_year: float = 0.7127
    two_three_year: float = 0.13
    long: float = 0.1573
    beta_authority: float = 4.0
    beta_hub: float = -2.0
    beta_community: float = 8.0  # community features then add about as much as network structure
    beta_quarter_end: float = 0.8
    intercept: float | None = None  # None: calibrate to target_default_rate
    seed: int = 42
    initial_edge_share: float = 0.5
    entry_months: int = 12
    volume_growth: float = 0.0  # yearly growth of new borrowers' entry; 0 disables
    renewal_prob: float = 0.85
    second_chain_prob: float = 0.25
    borrower_share: float = 0.8
    max_guarantors: int = 5
    hub_scale: float = 8.0
    seasoned_default_prob: float = 0.02
    calibration_steps: int = 20

    def __post_init__(self):
        for name in ("target_default_rate", "share_small", "share_large", "one_year", "two_three_year",
                     "long", "initial_edge_share", "renewal_prob", "second_chain_prob", "borrower_share",
                     "seasoned_default_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InfeasibleConfig(f"{name} must lie in [0, 1], got {v}")
        if self.share_small + self.share_large > 1.0 + 1e-12:
            raise InfeasibleConfig("share_small + share_large exceeds 1")
        if self.one_year + self.two_three_year + self.long > 1.0 + 1e-12:
            raise InfeasibleConfig("loan period mix exceeds 1")
        if self.n_customers < 1 or self.n_months < 1:
            raise InfeasibleConfig("n_customers and n_months must be positive")
        if self.beta_authority < 0 or self.beta_hub > 0 or self.beta_community < 0 or self.beta_quarter_end < 0:
            raise InfeasibleConfig("hazard coefficient signs: authority, community, quarter_end >= 0; hub <= 0")
        if self.max_guarantors < 1:
            raise InfeasibleConfig("max_guarantors must be at least 1")

    def replace(self, **kw) -> "SynthConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SynthConfig":
        """Build from string values (a parsed key=value file); unknown keys raise."""
        kinds = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in mapping.items():
            if key not in kinds:
                raise KeyError(f"unknown synth config key {key!r}")
            kind = str(kinds[key])
            if isinstance(raw, str):
                if "int" in kind and "float" not in kind:
                    kw[key] = int(raw)
                elif "float" in kind:
                    kw[key] = None if raw.lower() in ("", "none") else float(raw)
                else:
                    kw[key] = raw
            else:
                kw[key] = raw
        return cls(**kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def timeline_start(self) -> np.datetime64:
        return np.datetime64(self.start_month, "M")


# ---------------------------------------------------------------- planted graph

@dataclass
class PlantedGraph:
    n: int
    src: np.ndarray  # guarantor index
    dst: np.ndarray  # borrower index
    activation: np.ndarray  # month index the relation becomes usable
    component: np.ndarray
    community: np.ndarray
    is_borrower: np.ndarray
    component_sizes: list


def _small_size_pmf(alpha: float = 2.0) -> np.ndarray:
    k = np.arange(1, 50, dtype=float)
    p = k ** -alpha
    return p / p.sum()


def plan_component_sizes(cfg: SynthConfig, rng: np.random.Generator) -> list:
    n = cfg.n_customers
    share_mid = max(0.0, 1.0 - cfg.share_small - cfg.share_large)
    pmf = _small_size_pmf()
    e_small = float(np.dot(np.arange(1, 50), pmf))
    e_mid = (299 - 50) / math.log(299 / 50)
    e_large = 383.0
    per_comp = cfg.share_small * e_small + share_mid * e_mid + cfg.share_large * e_large
    c_total = n / per_comp
    n_large = int(round(c_total * cfg.share_large))
    n_mid = int(round(c_total * share_mid))
    n_small = max(int(round(c_total * cfg.share_small)), 0)
    if cfg.share_large > 0 and n_large == 0:
        raise InfeasibleConfig(f"n_customers={n} is too small to realise any component with more than 300 nodes")
    if n_large * 300 + n_mid * 50 + n_small > n:
        raise InfeasibleConfig(f"n_customers={n} cannot hold {n_large} large and {n_mid} mid components")
    large = rng.integers(300, 467, size=n_large).tolist()
    mid = np.exp(rng.uniform(math.log(50), math.log(300), size=n_mid)).astype(int).clip(50, 299).tolist()
    small = (rng.choice(49, size=n_small, p=pmf) + 1).tolist()

    residual = n - sum(large) - sum(mid) - sum(small)
    # absorb the residual into mid/large sizes, then small ones, within bucket bounds
    for sizes, lo, hi in ((large, 300, 466), (mid, 50, 299), (small, 1, 49)):
        i = 0
        guard = 0
        while residual != 0 and sizes and guard < 100 * len(sizes) * 50:
            step = 1 if residual > 0 else -1
            j = i % len(sizes)
            if lo <= sizes[j] + step <= hi:
                sizes[j] += step
                residual -= step
            i += 1
            guard += 1
    while residual > 0:
        add = min(residual, int(rng.choice(49, p=pmf)) + 1)
        small.append(add)
        residual -= add
    if residual < 0:
        raise InfeasibleConfig("could not fit component sizes into n_customers")
    sizes = large + mid + small
    return sizes


def _grow_cluster(rng, nodes: list, offset_edges: list, is_borrower: np.ndarray, preferential: bool,
                  m_p: float, cfg: SynthConfig, anchor_pool: list | None):
    """Attach ``nodes`` one by one; returns the planted edges of the cluster."""
    out_deg: dict = {}
    members: list = []
    borrowers: list = []
    edges = offset_edges
    for t, v in enumerate(nodes):
        if t == 0:
            role_b = rng.random() < 0.5 or (len(nodes) == 1 and anchor_pool is None)
            if anchor_pool:
                # bridge into an earlier cluster of the same component
                if role_b:
                    g = anchor_pool[int(rng.integers(len(anchor_pool)))]
                    edges.append((g, v))
                else:
                    pool_b = [u for u in anchor_pool if is_borrower[u]]
                    if pool_b:
                        edges.append((v, pool_b[int(rng.integers(len(pool_b)))]))
                    else:
                        role_b = True
                        g = anchor_pool[int(rng.integers(len(anchor_pool)))]
                        edges.append((g, v))
            is_borrower[v] = role_b
            members.append(v)
            out_deg[v] = 0
            if role_b:
                borrowers.append(v)
            continue
        role_b = rng.random() < cfg.borrower_share or not borrowers
        if role_b:
            m = 1 + (int(rng.binomial(cfg.max_guarantors - 1, m_p)) if m_p > 0 else 0)
            m = min(m, len(members))
            if preferential:
                w = np.array([out_deg[u] + 1.0 for u in members])
                picks = rng.choice(len(members), size=m, replace=False, p=w / w.sum())
            else:
                picks = rng.choice(len(members), size=m, replace=False)
            for i in sorted(picks.tolist()):
                g = members[i]
                edges.append((g, v))
                out_deg[g] += 1
            is_borrower[v] = True
            borrowers.append(v)
        else:
            k = min(1 + int(rng.binomial(2, 0.3)), len(borrowers))
            picks = rng.choice(len(borrowers), size=k, replace=False)
            for i in sorted(picks.tolist()):
                edges.append((v, borrowers[i]))
            out_deg[v] = k
            is_borrower[v] = False
        out_deg.setdefault(v, 0)
        members.append(v)
    return members


def plant_graph(cfg: SynthConfig, rng: np.random.Generator) -> PlantedGraph:
    sizes = plan_component_sizes(cfg, rng)
    n = cfg.n_customers
    perm = rng.permutation(n)
    is_borrower = np.zeros(n, dtype=bool)
    component = np.zeros(n, dtype=np.int64)
    community = np.zeros(n, dtype=np.int64)
    edges: list = []
    pos = 0
    next_comm = 0
    for ci, size in enumerate(sizes):
        nodes = perm[pos:pos + size].tolist()
        pos += size
        component[nodes] = ci
        if size < 50:
            community[nodes] = next_comm
            next_comm += 1
            _grow_cluster(rng, nodes, edges, is_borrower, preferential=False, m_p=0.0, cfg=cfg, anchor_pool=None)
            continue
        n_clusters = max(1, int(round(size / 40)))
        cuts = np.linspace(0, size, n_clusters + 1).round().astype(int)
        pool: list = []
        for j in range(n_clusters):
            chunk = nodes[cuts[j]:cuts[j + 1]]
            community[chunk] = next_comm
            next_comm += 1
            members = _grow_cluster(rng, chunk, edges, is_borrower, preferential=True, m_p=0.3, cfg=cfg,
                                    anchor_pool=pool or None)
            pool.extend(members)
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    # drop duplicate relations (a bridge may repeat an in-cluster pick)
    e = np.unique(e, axis=0)
    return PlantedGraph(n=n, src=e[:, 0], dst=e[:, 1], activation=np.zeros(e.shape[0], dtype=np.int64),
                        component=component, community=community, is_borrower=is_borrower,
                        component_sizes=sizes)


def draw_activation(cfg: SynthConfig, g: PlantedGraph, last_start: np.ndarray, rng) -> None:
    """Delay a share of relations to a month no later than the borrower's last
    contract start, so every relation is signed at least once."""
    delayed = rng.random(g.src.size) >= cfg.initial_edge_share
    latest = last_start[g.dst]
    when = np.floor(rng.random(g.src.size) * (latest + 1)).astype(np.int64)
    g.activation = np.where(delayed & (latest > 0), when, 0).astype(np.int64)


# ------------------------------------------------------------------ loan book

@dataclass
class LoanBook:
    borrower: np.ndarray
    start_month: np.ndarray
    start_day: np.ndarray
    term: np.ndarray
    amount: np.ndarray
    capital_type: np.ndarray
    interest_type: np.ndarray
    # repayment level
    r_contract: np.ndarray = field(default=None)
    r_month: np.ndarray = field(default=None)
    r_age: np.ndarray = field(default=None)


def _draw_term(rng, cfg: SynthConfig) -> int:
    u = rng.random()
    if u < cfg.one_year:
        return 12
    if u < cfg.one_year + cfg.two_three_year:
        return 24 if rng.random() < 0.6 else 36
    if u < cfg.one_year + cfg.two_three_year + cfg.long:
        return 96 if rng.random() < 0.6 else 120
    return int(rng.choice([6, 18, 48, 60]))


def _entry_month(rng, cfg: SynthConfig) -> int:
    if cfg.volume_growth <= 0:
        return int(rng.integers(0, max(1, min(cfg.entry_months, cfg.n_months))))
    months = np.arange(cfg.n_months)
    w = (1.0 + cfg.volume_growth) ** (months / 12.0)
    return int(rng.choice(cfg.n_months, p=w / w.sum()))


def write_loan_book(cfg: SynthConfig, g: PlantedGraph, scale_idx: np.ndarray, rng) -> LoanBook:
    rows = []
    for b in np.flatnonzero(g.is_borrower).tolist():
        chains = [_entry_month(rng, cfg)]
        if rng.random() < cfg.second_chain_prob:
            chains.append(int(rng.integers(chains[0], cfg.n_months)))
        for s in chains:
            while s < cfg.n_months:
                term = _draw_term(rng, cfg)
                day = int(rng.integers(1, 29))
                base = 10 ** (6 + scale_idx[b] * 0.5)
                amount = int(round(base * rng.lognormal(0.0, 0.6))) * 100
                rows.append((b, s, day, term, max(amount, 100),
                             int(rng.integers(3)), int(rng.integers(3))))
                if rng.random() >= cfg.renewal_prob:
                    break
                s = s + term + int(rng.integers(0, 3))
    arr = np.array(rows, dtype=np.int64).reshape(-1, 7)
    order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0]))
    arr = arr[order]
    book = LoanBook(borrower=arr[:, 0], start_month=arr[:, 1], start_day=arr[:, 2], term=arr[:, 3],
                    amount=arr[:, 4], capital_type=arr[:, 5], interest_type=arr[:, 6])
    # monthly schedule, truncated at the end of the timeline
    n_due = np.clip(np.minimum(book.term, cfg.n_months - 1 - book.start_month), 0, None)
    book.r_contract = np.repeat(np.arange(arr.shape[0]), n_due)
    first = np.cumsum(n_due) - n_due
    book.r_age = np.arange(book.r_contract.size) - np.repeat(first, n_due) + 1
    book.r_month = book.start_month[book.r_contract] + book.r_age
    return book


# -------------------------------------------------------------- default process

@dataclass
class PlantedState:
    """Latent per-firm drivers of the default process, one column per month."""

    authority: np.ndarray  # (n_firms, n_months) in [0, 1]
    hub: np.ndarray  # (n_firms, n_months) in [0, 1]
    community: np.ndarray
    community_size: np.ndarray
    defaulted: np.ndarray  # (n_firms, n_months) firm had a default in that month
    intercept: float = 0.0

    def community_share(self, firm: int, month: int) -> float:
        """Share of the firm's community (excluding itself) that defaulted before ``month``."""
        c = self.community[firm]
        before = self.defaulted[:, :month].any(axis=1)
        others = int(before[self.community == c].sum()) - int(before[firm])
        size = int(self.community_size[c]) - 1
        return others / size if size > 0 else 0.0


def _logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


def is_quarter_end(cfg: SynthConfig, month: int) -> bool:
    cal = (cfg.timeline_start + month).astype(object).month
    return cal % 3 == 0


def planted_hazard(firm: int, month: int, state: PlantedState, cfg: SynthConfig,
                   intercept: float | None = None) -> float:
    """Probability that ``firm`` is distressed in ``month``."""
    b0 = state.intercept if intercept is None else intercept
    z = (b0
         + cfg.beta_authority * state.authority[firm, month]
         + cfg.beta_hub * state.hub[firm, month]
         + cfg.beta_community * state.community_share(firm, month)
         + cfg.beta_quarter_end * float(is_quarter_end(cfg, month)))
    return float(_logistic(z))


def latent_proxies(cfg: SynthConfig, g: PlantedGraph):
    n, T = g.n, cfg.n_months
    act = np.minimum(g.activation, T - 1)
    in_new = np.zeros((n, T))
    out_new = np.zeros((n, T))
    np.add.at(in_new, (g.dst, act), 1.0)
    np.add.at(out_new, (g.src, act), 1.0)
    in_deg = np.cumsum(in_new, axis=1)
    out_deg = np.cumsum(out_new, axis=1)
    authority = np.minimum(1.0, in_deg / cfg.max_guarantors)
    hub = np.minimum(1.0, np.log1p(out_deg) / math.log1p(cfg.hub_scale))
    return authority, hub


@dataclass
class _SimInputs:
    authority: np.ndarray
    hub: np.ndarray
    quarter_end: np.ndarray
    community: np.ndarray
    community_size: np.ndarray
    young: np.ndarray  # (n, T) count of due repayments aged <= 12 months
    active: np.ndarray  # (n, T) firm has any repayment due
    r_firm: np.ndarray
    r_month: np.ndarray
    r_young: np.ndarray
    u_firm: np.ndarray  # (n, T) distress draws
    u_seasoned: np.ndarray  # per repayment draws for seasoned repayments


def _simulate(inp: _SimInputs, cfg: SynthConfig, intercept: float):
    n, T = inp.authority.shape
    n_comm = inp.community_size.size
    distressed = np.zeros((n, T), dtype=bool)
    ever = np.zeros(n, dtype=bool)
    denom = np.maximum(inp.community_size - 1, 1).astype(float)
    season_hit = np.zeros((n, T), dtype=bool)
    old = ~inp.r_young
    hit = old & (inp.u_seasoned < cfg.seasoned_default_prob)
    np.logical_or.at(season_hit, (inp.r_firm[hit], inp.r_month[hit]), True)
    defaulted = np.zeros((n, T), dtype=bool)
    for m in range(T):
        counts = np.bincount(inp.community, weights=ever, minlength=n_comm)
        share = (counts[inp.community] - ever) / denom[inp.community]
        z = (intercept + cfg.beta_authority * inp.authority[:, m] + cfg.beta_hub * inp.hub[:, m]
             + cfg.beta_community * share + cfg.beta_quarter_end * inp.quarter_end[m])
        d = inp.active[:, m] & (inp.u_firm[:, m] < _logistic(z))
        distressed[:, m] = d
        month_default = d & ((inp.young[:, m] > 0) | season_hit[:, m])
        defaulted[:, m] = month_default
        ever |= month_default
    r_default = distressed[inp.r_firm, inp.r_month] & (inp.r_young | (inp.u_seasoned < cfg.seasoned_default_prob))
    return r_default, defaulted


def calibrate_intercept(inp: _SimInputs, cfg: SynthConfig) -> float:
    """Bisection on the realised repayment default rate (common random numbers
    keep the rate monotone in the intercept)."""
    if inp.r_firm.size == 0:
        return 0.0
    lo, hi = -15.0, 5.0
    for _ in range(cfg.calibration_steps):
        mid = 0.5 * (lo + hi)
        rate = _simulate(inp, cfg, mid)[0].mean()
        if rate < cfg.target_default_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------- driver

@dataclass
class SynthResult:
    dataset: LoanDataset
    state: PlantedState
    graph: PlantedGraph


def generate(cfg: SynthConfig | None = None) -> LoanDataset:
    """Synthetic loan book; a pure function of ``cfg`` (seed included)."""
    return generate_full(cfg or SynthConfig()).dataset


def generate_full(cfg: SynthConfig) -> SynthResult:
    streams = [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(cfg.seed).spawn(6)]
    r_graph, r_firm, r_book, r_sim, r_pay, r_sign = streams
    g = plant_graph(cfg, r_graph)
    n, T = cfg.n_customers, cfg.n_months

    scale_idx = r_firm.choice(4, size=n, p=[0.45, 0.35, 0.15, 0.05])
    nature = r_firm.integers(len(BUSINESS_NATURES), size=n)
    capital = (np.round(10 ** (5.5 + scale_idx * 0.7 + r_firm.normal(0, 0.4, size=n))) * 100).astype(np.int64)
    employees = np.round(np.exp(1.5 + scale_idx * 1.1 + r_firm.normal(0, 0.5, size=n))).astype(np.int64)
    start = cfg.timeline_start.astype("datetime64[D]")
    registration = start - r_firm.integers(60, 20 * 365, size=n).astype("timedelta64[D]")

    book = write_loan_book(cfg, g, scale_idx, r_book)
    n_con = book.borrower.size
    last_start = np.zeros(n, dtype=np.int64)
    np.maximum.at(last_start, book.borrower, book.start_month)
    draw_activation(cfg, g, last_start, r_graph)

    authority, hub = latent_proxies(cfg, g)
    months_cal = (cfg.timeline_start + np.arange(T)).astype("datetime64[M]").astype(np.int64) % 12 + 1
    r_firm_idx = book.borrower[book.r_contract]
    young_r = book.r_age <= 12
    young = np.zeros((n, T), dtype=np.int64)
    np.add.at(young, (r_firm_idx[young_r], book.r_month[young_r]), 1)
    active = np.zeros((n, T), dtype=bool)
    active[r_firm_idx, book.r_month] = True
    comm_size = np.bincount(g.community)
    inp = _SimInputs(
        authority=authority, hub=hub, quarter_end=(months_cal % 3 == 0).astype(float),
        community=g.community, community_size=comm_size, young=young, active=active,
        r_firm=r_firm_idx, r_month=book.r_month, r_young=young_r,
        u_firm=r_sim.random((n, T)), u_seasoned=r_sim.random(book.r_contract.size),
    )
    intercept = cfg.intercept if cfg.intercept is not None else calibrate_intercept(inp, cfg)
    r_default, defaulted = _simulate(inp, cfg, intercept)
    state = PlantedState(authority=authority, hub=hub, community=g.community, community_size=comm_size,
                         defaulted=defaulted, intercept=intercept)

    # ---- tables
    cust_ids = np.array([f"F{i:05d}" for i in range(n)], dtype=object)
    customers = _frame_from_columns("customers", {
        "customer_id": cust_ids,
        "business_nature": np.array(BUSINESS_NATURES, dtype=object)[nature],
        "registered_capital": capital,
        "enterprise_scale": np.array(SCALES, dtype=object)[scale_idx],
        "employee_count": employees,
        "registration_date": registration,
    })
    con_ids = np.array([f"L{i:06d}" for i in range(n_con)], dtype=object)
    start_dates = ((cfg.timeline_start + book.start_month).astype("datetime64[D]")
                   + (book.start_day - 1).astype("timedelta64[D]"))
    contracts = _frame_from_columns("contracts", {
        "contract_id": con_ids,
        "borrower_id": cust_ids[book.borrower],
        "loan_amount": book.amount,
        "start_date": start_dates,
        "term_months": book.term,
        "capital_return_type": np.array(CAPITAL_RETURN, dtype=object)[book.capital_type],
        "interest_return_type": np.array(INTEREST_RETURN, dtype=object)[book.interest_type],
    })

    # guarantees: the borrower's relations active when the contract starts
    in_edges = pd.DataFrame({"b": g.dst, "g": g.src, "act": g.activation}).sort_values(["b", "g"], kind="stable")
    con_frame = pd.DataFrame({"c": np.arange(n_con), "b": book.borrower, "s": book.start_month})
    pairs = con_frame.merge(in_edges, on="b", how="inner", sort=False)
    pairs = pairs[pairs["act"] <= pairs["s"]].sort_values(["c", "g"], kind="stable")
    gc = pairs["c"].to_numpy(np.int64)
    gg = pairs["g"].to_numpy(np.int64)
    share = r_sign.uniform(0.3, 1.0, size=gc.size)
    guarantees = _frame_from_columns("guarantees", {
        "contract_id": con_ids[gc],
        "guarantor_id": cust_ids[gg],
        "guarantee_amount": (np.round(book.amount[gc] * share / 100) * 100).astype(np.int64),
        "signed_date": start_dates[gc] - r_sign.integers(0, 8, size=gc.size).astype("timedelta64[D]"),
    })

    # repayments
    rc = book.r_contract
    due = ((cfg.timeline_start + book.r_month).astype("datetime64[D]")
           + (book.start_day[rc] - 1).astype("timedelta64[D]"))
    term = book.term[rc]
    principal = book.amount[rc]
    interest = np.round(principal * 0.005 / 100).astype(np.int64) * 100
    cap_type = book.capital_type[rc]
    per_month = np.where(cap_type == 1, np.round(principal / term / 100).astype(np.int64) * 100, 0)
    last = book.r_age == term
    amount_due = interest + per_month + np.where(last & (cap_type != 1), principal, 0)
    end_of_timeline = (cfg.timeline_start + T).astype("datetime64[D]") - 1
    early = r_pay.integers(0, 4, size=rc.size).astype("timedelta64[D]")
    late = r_pay.integers(1, 91, size=rc.size).astype("timedelta64[D]")
    unpaid_draw = r_pay.random(rc.size) < 0.6
    paid = np.where(r_default, due + late, due - early)
    unpaid = r_default & (unpaid_draw | (paid > end_of_timeline))
    paid = paid.astype("datetime64[D]")
    paid[unpaid] = np.datetime64("NaT")
    amount_paid = np.where(unpaid, 0, amount_due)
    repayments = _frame_from_columns("repayments", {
        "contract_id": con_ids[rc],
        "due_date": due,
        "amount_due": amount_due,
        "paid_date": paid,
        "amount_paid": amount_paid,
    })
    ds = LoanDataset(customers, contracts, guarantees, repayments)
    return SynthResult(dataset=ds, state=state, graph=g)


def parse_config_file(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
