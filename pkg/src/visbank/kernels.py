"""Kernel backend selection.

The compiled ``_kernels`` extension is preferred; if it cannot be imported the
numpy implementations in ``_pykernels`` are used. ``use_backend`` switches the
active backend at runtime (tests and the benchmark exercise both).
"""
from types import ModuleType

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

FILLED = _pykernels.FILLED
MERGED = _pykernels.MERGED
REPLACED = _pykernels.REPLACED

_active: ModuleType = _compiled if _compiled is not None else _pykernels


def available_backends() -> list[str]:
    names = ["python"]
    if _compiled is not None:
        names.insert(0, "compiled")
    return names


def backend_name() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name: str) -> None:
    global _active
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built; reinstall with Cython available")
        _active = _compiled
    elif name == "python":
        _active = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")


def get(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name``, or the active one."""
    if name is None:
        return _active
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown backend {name!r}")
