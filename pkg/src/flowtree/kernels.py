"""Kernel backend selection.

The hot inner loops (prefix scans, Euler-tour tree sweeps, and the
congestion-potential descent loop) exist twice: compiled Cython in
``flowtree._kernels`` and pure NumPy in ``flowtree._kernels_py``.  The
compiled extension is preferred when importable; set ``FLOWTREE_PURE=1`` to
force the NumPy fallback.  ``flowtree bench`` compares the two.
"""

from __future__ import annotations

import os

if os.environ.get("FLOWTREE_PURE", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]

scan_inclusive = _impl.scan_inclusive
tree_congestion_nodes = _impl.tree_congestion_nodes
almost_route_loop = _impl.almost_route_loop


def backend_name() -> str:
    return _impl.BACKEND


def available_backends():
    """Names of importable backends (for the benchmark command)."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def get_backend(name: str):
    """Fetch a backend module by name ("cython" or "python")."""
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend: {name!r}")
