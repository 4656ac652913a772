"""Kernel selection.

The compiled kernel is used when importable; ``FLAGEIN_BACKEND=python``
forces the numpy fallback and ``FLAGEIN_BACKEND=compiled`` makes a missing
extension an import error.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

_KERNELS = {"python": _pykernel}
if _ckernel is not None:
    _KERNELS["compiled"] = _ckernel


def available_backends() -> list[str]:
    return sorted(_KERNELS)


def get_kernel(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` ("auto", "compiled", "python")."""
    if name is None:
        name = os.environ.get("FLAGEIN_BACKEND", "auto")
    name = name.lower()
    if name == "auto":
        return _KERNELS.get("compiled", _pykernel)
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}; choose auto, compiled or python")
    if name not in _KERNELS:
        raise ImportError("compiled kernel flagein._ckernel is not built; reinstall with a C compiler and Cython")
    return _KERNELS[name]


kernel = get_kernel()
