"""Kernel backend selection.

Imports the compiled extension when present, otherwise falls back to the
pure-Python implementations. Set ``TONEMINE_PURE_PYTHON=1`` to force the
fallback (used by the benchmark and by backend-parity tests).
"""
from __future__ import annotations

import os

from . import _pyfallback

if os.environ.get("TONEMINE_PURE_PYTHON"):
    _impl = _pyfallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "c"
    except ImportError:
        _impl = _pyfallback
        BACKEND = "python"

condensed_distances = _impl.condensed_distances
triangle_counts = _impl.triangle_counts
double_edge_swap = _impl.double_edge_swap
louvain_move_pass = _impl.louvain_move_pass

__all__ = [
    "BACKEND",
    "condensed_distances",
    "triangle_counts",
    "double_edge_swap",
    "louvain_move_pass",
]
