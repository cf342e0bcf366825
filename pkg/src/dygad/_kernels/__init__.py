"""Sampling kernels with a compiled fast path and a pure-NumPy fallback.

The compiled extension is preferred when importable; set ``DYGAD_PURE_PYTHON=1``
to force the fallback.  ``BACKEND`` names whichever implementation is active.
"""

import os

if os.environ.get("DYGAD_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _pure as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pure as _impl

BACKEND = _impl.NAME
bfs_distances = _impl.bfs_distances
sample_window = _impl.sample_window

__all__ = ["BACKEND", "bfs_distances", "sample_window"]
