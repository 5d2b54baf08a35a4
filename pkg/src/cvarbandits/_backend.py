"""Kernel selection.

The compiled extension is used when importable; ``CVARBANDITS_PURE_PYTHON=1``
forces the reference implementation.
"""
from __future__ import annotations

import os

from . import _pycore

kernels = _pycore
compiled = None

if not os.environ.get("CVARBANDITS_PURE_PYTHON"):
    try:
        from . import _core as compiled
    except ImportError:  # extension not built
        compiled = None
    else:
        kernels = compiled

NAME = kernels.NAME


def get(name: str | None = None):
    """Return the kernel module called ``name`` ("cython" or "python"); default is the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pycore
    if name == "cython":
        if compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
