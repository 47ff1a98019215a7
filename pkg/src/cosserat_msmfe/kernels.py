"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it is importable and
``COSSERAT_MSMFE_PURE_PYTHON`` is not set to ``1``; otherwise the numpy
fallback in ``_pykernels`` is used. Both expose the same three functions.
"""
import os
from types import ModuleType

from . import _pykernels


def _load_compiled() -> ModuleType | None:
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()

BACKENDS = {"python": _pykernels}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

if _compiled is not None and os.environ.get("COSSERAT_MSMFE_PURE_PYTHON") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

_active = BACKENDS[BACKEND]


def get_backend(name: str | None = None) -> ModuleType:
    """Kernel module by name (``"cython"`` or ``"python"``), default active."""
    if name is None:
        return _active
    if name not in BACKENDS:
        raise ValueError(f"kernel backend {name!r} is not available")
    return BACKENDS[name]
