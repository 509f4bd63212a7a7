"""Command-line entry point: ``gnrisk <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error.  Every run writes
``manifest.json`` (inputs, config hash, versions, outputs) into --out-dir.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import platform
import sys

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .centrality import MEASURES, compute_scores
from .community import METHODS, community_default_rate, defaulted_customers, detect_communities
from .eval_harness import RollingConfig, run_rolling
from .features import ABLATIONS, LeakageError, Quarter, assemble, build_matrix, labels
from .gbdt import TrainParams, TreeEnsemble, train
from .graph import (
    build_network,
    complexity_by_month,
    components,
    customer_default_table,
    overall_stats,
    rows_to_csv,
)
from .loan_data import TABLES, DataError, load_tables, validate, write_tables
from .synth import InfeasibleConfig, SynthConfig, generate

TRAIN_KEYS = {"K": int, "eta": float, "max_depth": int, "gamma": float, "lambda": float,
              "min_child_hessian": float, "base_score": float}
ROLLING_KEYS = {"start": str, "windows": int, "threshold": float, "method": str, "max_communities": int,
                "ablations": str}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ helpers

def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects outputs and writes them plus the manifest under --out-dir."""

    def __init__(self, args, config: dict):
        self.args = args
        self.config = config
        self.out_dir = args.out_dir
        self.outputs = []
        self.inputs = []
        os.makedirs(self.out_dir, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        path = os.path.join(self.out_dir, name)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.outputs.append(name)

    def add_input(self, path: str) -> None:
        self.inputs.append({"path": os.path.basename(path), "sha256": _sha256_file(path)})

    def finish(self) -> None:
        flags = {k: v for k, v in sorted(vars(self.args).items())
                 if k not in ("func", "data_dir", "out_dir", "config")}
        cfg_text = json.dumps(self.config, sort_keys=True)
        manifest = {
            "command": self.args.command,
            "flags": flags,
            "config": self.config,
            "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
            "inputs": self.inputs,
            "outputs": [{"path": n, "sha256": _sha256_file(os.path.join(self.out_dir, n))}
                        for n in sorted(set(self.outputs))],
            "versions": {"gnrisk": __version__, "numpy": np.__version__, "python": platform.python_version(),
                         "kernels": BACKEND},
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, indent=2) + "\n")


def _read_config(args) -> dict:
    if not args.config:
        return {}
    from .synth import parse_config_file
    try:
        return parse_config_file(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _split_config(raw: dict) -> tuple:
    synth_keys = {f.name for f in dataclasses.fields(SynthConfig)}
    synth, train_kw, rolling = {}, {}, {}
    for k, v in raw.items():
        if k in synth_keys:
            synth[k] = v
        elif k in TRAIN_KEYS:
            try:
                train_kw[k] = TRAIN_KEYS[k](v)
            except ValueError:
                raise UsageError(f"config key {k}: cannot parse {v!r}") from None
        elif k in ROLLING_KEYS:
            rolling[k] = v
        else:
            raise UsageError(f"unknown config key {k!r}")
    return synth, train_kw, rolling


def _train_params(args, raw: dict) -> TrainParams:
    _, kw, _ = _split_config(raw)
    for k in TRAIN_KEYS:
        v = getattr(args, k.replace("lambda", "lam"), None)
        if v is not None:
            kw[k] = v
    try:
        return TrainParams.from_dict(kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load(run: Run):
    if not run.args.data_dir:
        raise UsageError("--data-dir is required")
    ds = load_tables(run.args.data_dir)
    for t in TABLES:
        run.add_input(os.path.join(run.args.data_dir, f"{t}.csv"))
    return ds


def _date(text: str):
    try:
        return np.datetime64(text, "D")
    except ValueError:
        raise UsageError(f"not a date: {text!r} (expected YYYY-MM-DD)") from None


def _quarter(text: str) -> Quarter:
    try:
        return Quarter.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _last_day(ds) -> np.datetime64:
    dates = [ds.contracts["start_date"].max(), ds.repayments["due_date"].max()]
    return max(np.datetime64(d, "D") for d in dates if d == d)


# ------------------------------------------------------------------ commands

def cmd_synth(args) -> int:
    raw = _read_config(args)
    synth, _, _ = _split_config(raw)
    if args.seed is not None:
        synth["seed"] = args.seed
    try:
        cfg = SynthConfig.from_mapping(synth)
    except InfeasibleConfig:
        raise
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    run = Run(args, cfg.to_dict())
    ds = generate(cfg)
    write_tables(ds, args.out_dir)
    run.outputs += [f"{t}.csv" for t in TABLES]
    run.finish()
    return 0


def cmd_stats(args) -> int:
    run = Run(args, {})
    ds = _load(run)
    report = validate(ds)
    if not report.ok:
        for v in list(report)[:20]:
            print(f"{v.table}.csv row {v.row + 2} ({v.key}): {v.rule}", file=sys.stderr)
        print(f"{len(report)} validation violations", file=sys.stderr)
        return 2
    stats = overall_stats(ds)
    run.write("stats.json", stats.to_json())
    for name, text in stats.csv_tables().items():
        run.write(name, text)
    run.finish()
    return 0


def cmd_graph(args) -> int:
    run = Run(args, {})
    ds = _load(run)
    as_of = _date(args.as_of) if args.as_of else _last_day(ds)
    net = build_network(ds, as_of)
    rows = [{"component": c.index, "n_nodes": c.n, "n_edges": c.n_edges, "diameter": c.diameter}
            for c in components(net)]
    run.write("components.csv", rows_to_csv(rows, ["component", "n_nodes", "n_edges", "diameter"]))
    run.write("complexity_by_month.csv", rows_to_csv([dataclasses.asdict(m) for m in complexity_by_month(ds)]))
    run.finish()
    return 0


def _deciles(values: np.ndarray, rate: np.ndarray) -> list:
    """Equal-count bins by ascending score, with the mean default rate per bin."""
    order = np.argsort(values, kind="stable")
    out = []
    for d, idx in enumerate(np.array_split(order, 10)):
        if idx.size:
            out.append((d + 1, int(idx.size), float(values[idx].mean()), float(rate[idx].mean())))
    return out


def cmd_centrality(args) -> int:
    run = Run(args, {})
    ds = _load(run)
    as_of = _date(args.as_of) if args.as_of else _last_day(ds)
    comps = components(build_network(ds, as_of))
    if args.component is not None:
        comps = [c for c in comps if c.index == args.component]
        if not comps:
            raise UsageError(f"no component GN{args.component} on {as_of}")
    per = customer_default_table(ds, as_of)
    cols = ["component", "customer_id", "in_degree", "out_degree"] + list(MEASURES) + ["default_rate"]
    rows, all_scores, all_rate = [], {m: [] for m in MEASURES}, []
    for sub in comps:
        sc = compute_scores(sub)
        t = per.reindex(sub.node_ids).fillna(0)
        rate = np.where(t["n_repayments"] > 0, t["n_defaults"] / np.maximum(t["n_repayments"], 1), 0.0)
        all_rate.append(rate)
        for i, cid in enumerate(sub.node_ids):
            row = {"component": sub.index, "customer_id": cid, "in_degree": int(sc.in_degree[i]),
                   "out_degree": int(sc.out_degree[i])}
            for m in MEASURES:
                row[m] = float(getattr(sc, m)[i])
                all_scores[m].append(getattr(sc, m)[i])
            row["default_rate"] = float(rate[i])
            rows.append(row)
    run.write("centrality.csv", rows_to_csv(rows, cols))
    rate = np.concatenate(all_rate) if all_rate else np.zeros(0)
    dec = []
    for m in MEASURES:
        for d, size, mean_score, mean_rate in _deciles(np.asarray(all_scores[m], dtype=float), rate):
            dec.append({"measure": m, "decile": d, "n_nodes": size, "mean_score": mean_score,
                        "mean_default_rate": mean_rate})
    run.write("centrality_deciles.csv", rows_to_csv(dec, ["measure", "decile", "n_nodes", "mean_score",
                                                          "mean_default_rate"]))
    run.finish()
    return 0


def cmd_communities(args) -> int:
    run = Run(args, {"method": args.method, "max_communities": args.max_communities})
    ds = _load(run)
    as_of = _date(args.as_of) if args.as_of else _last_day(ds)
    comps = components(build_network(ds, as_of))
    if args.component is not None:
        comps = [c for c in comps if c.index == args.component]
    comps = [c for c in comps if c.n >= args.min_size]
    defaulted = defaulted_customers(ds, as_of)
    members, risk = [], []
    for sub in comps:
        part = detect_communities(sub, method=args.method, max_communities=args.max_communities)
        for cid, c in zip(part.node_ids, part.labels.tolist()):
            members.append({"component": sub.index, "customer_id": cid, "community": c})
        for r in community_default_rate(part, None, defaulted=defaulted).rows():
            risk.append({"component": sub.index, "modularity": part.modularity, **r})
    run.write("communities.csv", rows_to_csv(members, ["component", "customer_id", "community"]))
    run.write("community_risk.csv", rows_to_csv(risk, ["component", "community", "size", "default_count",
                                                       "default_rate", "modularity"]))
    run.write("community_risk.json", json.dumps(risk, indent=2) + "\n")
    run.finish()
    return 0


def cmd_features(args) -> int:
    run = Run(args, {"quarter": args.quarter, "method": args.method, "max_communities": args.max_communities})
    ds = _load(run)
    q = _quarter(args.quarter)
    fm = assemble(ds, q, method=args.method, max_communities=args.max_communities, threads=args.threads)
    if not args.no_labels:
        fm = fm.with_labels(labels(ds, fm.customer_ids, q.shift(1)))
    run.write(f"features_{q}.csv", fm.to_csv())
    run.write(f"features_{q}.categories.json", fm.categories_json())
    run.finish()
    return 0


def cmd_train(args) -> int:
    raw = _read_config(args)
    params = _train_params(args, raw)
    run = Run(args, {"quarter": args.quarter, "ablation": args.ablation, "params": params.to_dict()})
    ds = _load(run)
    q = _quarter(args.quarter)
    fm = build_matrix(ds, q, threads=args.threads).ablation(args.ablation)
    if fm.y.min() == fm.y.max():
        print(f"training labels of {q} are single-class", file=sys.stderr)
        return 2
    model = train(fm, params)
    run.write(args.model_name, model.to_json())
    run.finish()
    return 0


def cmd_predict(args) -> int:
    run = Run(args, {"quarter": args.quarter, "model": os.path.basename(args.model)})
    ds = _load(run)
    try:
        with open(args.model, encoding="utf-8") as fh:
            model = TreeEnsemble.from_json(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read model: {exc}") from None
    except (ValueError, KeyError) as exc:
        raise DataError(f"malformed model file: {exc}", file=args.model) from None
    run.add_input(args.model)
    q = _quarter(args.quarter)
    fm = assemble(ds, q, threads=args.threads)
    missing = [d for d in model.dimension_names if d not in fm.dimensions]
    if missing:
        raise DataError(f"model dimensions absent from the feature matrix: {missing}", file=args.model)
    X = fm.X[:, [fm.dimensions.index(d) for d in model.dimension_names]]
    p = model.predict(X)
    rows = [{"customer_id": c, "probability": float(v)} for c, v in zip(fm.customer_ids, p)]
    run.write(f"predictions_{q}.csv", rows_to_csv(rows, ["customer_id", "probability"]))
    run.finish()
    return 0


def cmd_rolling(args) -> int:
    raw = _read_config(args)
    params = _train_params(args, raw)
    _, _, rolling = _split_config(raw)
    start = args.start or rolling.get("start", "2013Q1")
    windows = args.windows if args.windows is not None else int(rolling.get("windows", 10))
    abl = args.ablations or rolling.get("ablations", ",".join(ABLATIONS))
    threshold = args.threshold if args.threshold is not None else float(rolling.get("threshold", 0.5))
    _quarter(start)
    try:
        cfg = RollingConfig(start=start, n_windows=windows, ablations=tuple(a.strip() for a in abl.split(",")),
                            threshold=threshold, params=params, method=args.method,
                            max_communities=args.max_communities, threads=args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run(args, {"start": start, "windows": windows, "ablations": list(cfg.ablations),
                     "threshold": threshold, "params": params.to_dict(), "method": args.method,
                     "max_communities": args.max_communities})
    ds = _load(run)
    try:
        report = run_rolling(ds, cfg)
    except ValueError as exc:
        if isinstance(exc, LeakageError):
            raise
        raise DataError(str(exc)) from None
    run.write("rolling_report.json", report.to_json())
    for name, text in report.csv_tables().items():
        run.write(name, text)
    run.finish()
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_all
    results = run_all()
    run = Run(args, {})
    lines = [r.line() for r in results]
    for line in lines:
        print(line)
    run.write("selftest.txt", "\n".join(lines) + "\n")
    run.finish()
    return 0 if all(r.passed for r in results) else 2


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--data-dir", default=None, help="directory holding the four input CSV tables")
    g.add_argument("--out-dir", default=".", help="directory receiving every output and manifest.json")
    g.add_argument("--seed", type=int, default=None, help="generator seed (overrides the config file)")
    g.add_argument("--config", default=None, help="key=value file overriding defaults")
    g.add_argument("--threads", type=int, default=1, help="maximum worker threads")

    parser = _Parser(prog="gnrisk", description="Guarantee-network credit-risk pipeline.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"gnrisk {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_, formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    def add_train_flags(p):
        t = p.add_argument_group("training parameters (default: config file, then built-in)")
        defaults = TrainParams()
        t.add_argument("--K", type=int, default=None, help=f"number of trees [{defaults.K}]")
        t.add_argument("--eta", type=float, default=None, help=f"shrinkage [{defaults.eta}]")
        t.add_argument("--max-depth", dest="max_depth", type=int, default=None,
                       help=f"maximum tree depth [{defaults.max_depth}]")
        t.add_argument("--gamma", type=float, default=None, help=f"per-split penalty [{defaults.gamma}]")
        t.add_argument("--lambda", dest="lam", type=float, default=None, help=f"leaf L2 penalty [{defaults.lam}]")
        t.add_argument("--min-child-hessian", dest="min_child_hessian", type=float, default=None,
                       help=f"minimum hessian per child [{defaults.min_child_hessian}]")
        t.add_argument("--base-score", dest="base_score", type=float, default=None,
                       help=f"initial logit [{defaults.base_score}]")

    def add_community_flags(p):
        p.add_argument("--method", choices=METHODS, default="edge_betweenness", help="community detection method")
        p.add_argument("--max-communities", dest="max_communities", type=int, default=30,
                       help="stop edge removal once a component has this many communities")

    add("synth", cmd_synth, "generate a synthetic loan book")
    add("stats", cmd_stats, "overall loan-book statistics")
    p = add("graph", cmd_graph, "network components and monthly complexity")
    p.add_argument("--as-of", dest="as_of", default=None, help="snapshot date (default: last date in the data)")
    p = add("centrality", cmd_centrality, "per-node centrality scores and decile default rates")
    p.add_argument("--as-of", dest="as_of", default=None, help="snapshot date (default: last date in the data)")
    p.add_argument("--component", type=int, default=None, help="restrict to component GN<k>")
    p = add("communities", cmd_communities, "community detection and per-community default rates")
    p.add_argument("--as-of", dest="as_of", default=None, help="snapshot date (default: last date in the data)")
    p.add_argument("--component", type=int, default=None, help="restrict to component GN<k>")
    p.add_argument("--min-size", dest="min_size", type=int, default=1, help="skip components smaller than this")
    add_community_flags(p)
    p = add("features", cmd_features, "dump the hybrid feature matrix of a quarter")
    p.add_argument("--quarter", required=True, help="feature quarter, e.g. 2013Q1")
    p.add_argument("--no-labels", dest="no_labels", action="store_true", help="omit next-quarter labels")
    add_community_flags(p)
    p = add("train", cmd_train, "train a model on one quarter's features and next-quarter labels")
    p.add_argument("--quarter", required=True, help="training quarter, e.g. 2013Q1")
    p.add_argument("--ablation", choices=list(ABLATIONS), default="H", help="feature categories used")
    p.add_argument("--model-name", dest="model_name", default="model.json", help="output file name")
    add_train_flags(p)
    p = add("predict", cmd_predict, "score a quarter's instances with a trained model")
    p.add_argument("--model", required=True, help="model JSON written by `train`")
    p.add_argument("--quarter", required=True, help="quarter whose features are scored")
    p = add("rolling", cmd_rolling, "rolling quarterly back-test with ablations")
    p.add_argument("--start", default=None, help="first training quarter [2013Q1]")
    p.add_argument("--windows", type=int, default=None, help="number of windows [10]")
    p.add_argument("--ablations", default=None, help=f"comma-separated subset of {','.join(ABLATIONS)} [all]")
    p.add_argument("--threshold", type=float, default=None, help="recall operating point [0.5]")
    add_community_flags(p)
    add_train_flags(p)
    add("selftest", cmd_selftest, "run the oracle suites")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (see --help)")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, LeakageError, InfeasibleConfig) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
