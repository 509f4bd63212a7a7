"""Hot kernels, compiled when the Cython extension is built.

The extension is preferred; set ``GNRISK_PURE_PYTHON=1`` to force the
pure-Python fallback.  ``BACKEND`` names the active implementation.
"""
import os

from . import _fallback

if os.environ.get("GNRISK_PURE_PYTHON", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None

if _core is not None:
    brandes = _core.brandes
    bfs_stats = _core.bfs_stats
    best_split = _core.best_split
    partition_order = _core.partition_order
    BACKEND = "cython"
else:
    brandes = _fallback.brandes
    bfs_stats = _fallback.bfs_stats
    best_split = _fallback.best_split
    partition_order = _fallback.partition_order
    BACKEND = "python"

__all__ = ["BACKEND", "bfs_stats", "best_split", "brandes", "partition_order"]
