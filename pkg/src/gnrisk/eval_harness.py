"""Rolling quarterly back-test with feature ablations and split-count importance."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .features import ABLATIONS, Quarter, WindowQuad, assemble, labels
from .gbdt import TrainParams, importance, train
from .loan_data import LoanDataset

SUPER_GROUPS = {"node_wise": ("BP", "CR", "AL"), "network": ("NS",), "community": ("CM",)}


def schedule(start, n: int, last_quarter=None) -> list:
    """``n`` windows advancing one quarter at a time from ``start``.

    With ``last_quarter`` given (the final quarter the data covers), a schedule
    whose last evaluation quarter falls after it is rejected.
    """
    if n < 1:
        raise ValueError("number of windows must be at least 1")
    q0 = Quarter.parse(start)
    quads = [WindowQuad.starting(q0.shift(i)) for i in range(n)]
    if last_quarter is not None and quads[-1].evaluation > Quarter.parse(last_quarter):
        raise ValueError(f"timeline ends at {Quarter.parse(last_quarter)} but the schedule needs "
                         f"outcomes through {quads[-1].evaluation}")
    return quads


@dataclass(frozen=True)
class Metric:
    """A metric value, or ``None`` with the reason it is undefined."""

    value: float | None
    reason: str | None = None


def auc(scores, labels_) -> Metric:
    """Mann-Whitney AUC with ties counted half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels_)
    pos, neg = s[y == 1], s[y == 0]
    if pos.size == 0 or neg.size == 0:
        return Metric(None, "single-class labels")
    order = np.sort(neg)
    below = np.searchsorted(order, pos, side="left")
    ties = np.searchsorted(order, pos, side="right") - below
    stat = (below.sum() + 0.5 * ties.sum()) / (pos.size * neg.size)
    return Metric(float(stat))


def recall(scores, labels_, threshold: float = 0.5) -> Metric:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels_)
    p = int(np.sum(y == 1))
    if p == 0:
        return Metric(None, "no positive labels")
    return Metric(float(np.sum((y == 1) & (s >= threshold)) / p))


@dataclass
class RollingConfig:
    start: str = "2013Q1"
    n_windows: int = 10
    ablations: tuple = ("NW", "NW+CM", "NW+N", "H")
    threshold: float = 0.5
    params: TrainParams = field(default_factory=TrainParams)
    method: str = "edge_betweenness"
    max_communities: int | None = 30
    threads: int = 1

    def __post_init__(self):
        if self.n_windows < 1:
            raise ValueError("n_windows must be at least 1")
        if not self.ablations:
            raise ValueError("at least one ablation is required")
        unknown = set(self.ablations) - set(ABLATIONS)
        if unknown:
            raise ValueError(f"unknown ablations {sorted(unknown)}; expected from {list(ABLATIONS)}")
        self.ablations = tuple(a for a in ABLATIONS if a in set(self.ablations))


@dataclass
class Cell:
    window: str
    ablation: str
    auc: float | None
    recall: float | None
    positives: int
    instances: int
    note: str | None = None


@dataclass
class RollingReport:
    config: dict
    cells: list
    importance: list  # one dict per window: shares per category and super-group
    fingerprints: list

    def cell(self, window: str, ablation: str) -> Cell:
        for c in self.cells:
            if c.window == window and c.ablation == ablation:
                return c
        raise KeyError((window, ablation))

    @property
    def windows(self) -> list:
        seen = []
        for c in self.cells:
            if c.window not in seen:
                seen.append(c.window)
        return seen

    @property
    def ablations(self) -> list:
        seen = []
        for c in self.cells:
            if c.ablation not in seen:
                seen.append(c.ablation)
        return seen

    def series(self, metric: str, ablation: str) -> list:
        return [getattr(self.cell(w, ablation), metric) for w in self.windows]

    def mean(self, metric: str, ablation: str) -> float | None:
        vals = [v for v in self.series(metric, ablation) if v is not None]
        return float(np.mean(vals)) if vals else None

    def summary(self) -> dict:
        return {a: {"mean_auc": self.mean("auc", a), "mean_recall": self.mean("recall", a)}
                for a in self.ablations}

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "windows": [
                {"window": w, "cells": [c.__dict__ for c in self.cells if c.window == w]}
                for w in self.windows
            ],
            "importance": self.importance,
            "fingerprints": self.fingerprints,
            "summary": self.summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def _metric_csv(self, metric: str) -> str:
        lines = ["window," + ",".join(self.ablations)]
        for w in self.windows:
            vals = [getattr(self.cell(w, a), metric) for a in self.ablations]
            lines.append(w + "," + ",".join("" if v is None else repr(v) for v in vals))
        return "\n".join(lines) + "\n"

    def csv_tables(self) -> dict:
        cats = ["BP", "CR", "AL", "NS", "CM"]
        groups = list(SUPER_GROUPS)
        lines = ["window,empty," + ",".join(groups + cats)]
        for imp in self.importance:
            vals = [imp["groups"][g] for g in groups] + [imp["categories"].get(c, 0.0) for c in cats]
            lines.append(f"{imp['window']},{int(imp['empty'])}," + ",".join(repr(v) for v in vals))
        return {
            "auc_by_window.csv": self._metric_csv("auc"),
            "recall_by_window.csv": self._metric_csv("recall"),
            "importance_by_window.csv": "\n".join(lines) + "\n",
        }


def _fit_and_score(train_m, eval_m, ablation: str, window: str, cfg: RollingConfig):
    tr, ev = train_m.ablation(ablation), eval_m.ablation(ablation)
    pos = int(ev.y.sum())
    base = dict(window=window, ablation=ablation, positives=pos, instances=len(ev.y))
    if train_m.y.min() == train_m.y.max():
        return Cell(auc=None, recall=None, note="single-class training labels", **base), None
    model = train(tr, cfg.params)
    p = model.predict(ev.X)
    a, r = auc(p, ev.y), recall(p, ev.y, cfg.threshold)
    note = a.reason or r.reason
    return Cell(auc=a.value, recall=r.value, note=note, **base), model


def run_rolling(ds: LoanDataset, cfg: RollingConfig | None = None, progress=None) -> RollingReport:
    """Train on each window's features and labels, then score the next cohort.

    Each quarter is assembled once; the ablations are column subsets of it.
    """
    cfg = cfg or RollingConfig()
    last_due = ds.repayments["due_date"].max()
    last_q = Quarter(int(last_due.year), (int(last_due.month) - 1) // 3 + 1) if len(ds.repayments) else None
    quads = schedule(cfg.start, cfg.n_windows, last_q)
    cache: dict = {}

    def matrix(q: Quarter):
        if q not in cache:
            fm = assemble(ds, q, method=cfg.method, max_communities=cfg.max_communities, threads=cfg.threads)
            cache[q] = fm.with_labels(labels(ds, fm.customer_ids, q.shift(1)))
        return cache[q]

    cells, imps, prints = [], [], []
    for quad in quads:
        name = str(quad.evaluation)
        tr, ev = matrix(quad.train), matrix(quad.prediction)
        prints.append({"window": name, "train": tr.fingerprint(), "predict": ev.fingerprint()})
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(lambda a: _fit_and_score(tr, ev, a, name, cfg), cfg.ablations))
        else:
            results = [_fit_and_score(tr, ev, a, name, cfg) for a in cfg.ablations]
        models = {}
        for a, (cell, model) in zip(cfg.ablations, results):
            cells.append(cell)
            models[a] = model
        full = models.get("H")
        if full is not None:
            imp = importance(full)
            groups = {g: sum(imp.shares.get(c, 0.0) for c in cats) for g, cats in SUPER_GROUPS.items()}
            imps.append({"window": name, "empty": imp.empty, "categories": imp.shares, "groups": groups,
                         "counts": imp.category_counts})
        if progress is not None:
            progress(quad, cells[-len(cfg.ablations):])
        cache.pop(quad.train, None)
    conf = {"start": str(Quarter.parse(cfg.start)), "n_windows": cfg.n_windows, "ablations": list(cfg.ablations),
            "threshold": cfg.threshold, "params": cfg.params.to_dict(), "method": cfg.method,
            "max_communities": cfg.max_communities}
    return RollingReport(config=conf, cells=cells, importance=imps, fingerprints=prints)
