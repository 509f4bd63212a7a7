"""Time the compiled kernels against the pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat N]

Inputs come from the seed-42 benchmark loan book (largest component for the
graph kernels) and a 4,000 x 44 random matrix for the split kernels.
"""
import argparse
import timeit

import numpy as np

from gnrisk._kernels import _fallback
from gnrisk.gbdt import presort
from gnrisk.graph import build_network, components
from gnrisk.synth import SynthConfig, generate

try:
    from gnrisk._kernels import _core
except ImportError:
    _core = None


def cases():
    ds = generate(SynthConfig(seed=42))
    sub = components(build_network(ds, np.datetime64("2015-12-31")))[0]
    indptr, indices, eids = sub.csr
    m = sub.undirected_edges.shape[0]
    rng = np.random.default_rng(0)
    X = np.round(rng.normal(size=(4000, 44)), 2)
    order = presort(X)
    g, h = rng.normal(size=4000), rng.uniform(0.01, 0.25, 4000)
    mask = np.ones(4000, dtype=np.uint8)
    side = (rng.random(4000) < 0.5).astype(np.uint8)
    label = f"{sub.n} nodes, {m} edges"
    return [
        (f"brandes ({label})", "brandes", (indptr, indices, eids, m)),
        (f"bfs_stats ({label})", "bfs_stats", (indptr, indices)),
        ("best_split (4000 x 44)", "best_split",
         (X, order, mask, g, h, float(g.sum()), float(h.sum()), 1.0, 0.0, 1.0)),
        ("partition_order (4000 x 44)", "partition_order", (order, side)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _core is None:
        print("compiled extension not built; run `python3 setup.py build_ext --inplace` first")
        return
    print(f"{'kernel':<44}{'cython (s)':>12}{'python (s)':>12}{'speed-up':>10}")
    for name, fn, call in cases():
        fast = min(timeit.repeat(lambda: getattr(_core, fn)(*call), number=1, repeat=args.repeat))
        slow = min(timeit.repeat(lambda: getattr(_fallback, fn)(*call), number=1, repeat=args.repeat))
        print(f"{name:<44}{fast:>12.4f}{slow:>12.4f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
