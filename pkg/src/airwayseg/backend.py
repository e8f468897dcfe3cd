"""Kernel backend selection.

The hot kernels (box smoothing, peak candidates + NMS, compact flood,
component labeling) exist twice: a Cython extension (``airwayseg._kernels``)
and a pure NumPy/stdlib fallback (``airwayseg._kernels_py``). The compiled
backend is preferred at import; ``AIRWAYSEG_BACKEND=python|compiled`` or
:func:`set_backend` overrides the choice. ``airwayseg bench --backend both``
compares their throughput.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


def resolve(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (compiled | python | auto/None)."""
    if name in (None, "auto"):
        name = os.environ.get("AIRWAYSEG_BACKEND", "auto")
    if name in (None, "auto"):
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError(
                "compiled kernel backend requested but airwayseg._kernels is not built"
            )
        return _compiled
    raise ValueError(f"unknown backend {name!r} (choose compiled, python, or auto)")


_active = resolve()


def get_backend() -> ModuleType:
    return _active


def set_backend(name: str | None) -> ModuleType:
    """Select the process-wide kernel backend; returns the module now active."""
    global _active
    _active = resolve(name)
    return _active
