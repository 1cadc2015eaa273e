"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_kernels_py`` takes over.  Setting ``VCZSYNTH_PURE_PYTHON=1``
forces the fallback.
"""

import importlib
import os

from . import _kernels_py


def load_backend(name: str = "auto"):
    """Return the kernel module for ``"cython"``, ``"python"`` or ``"auto"``."""
    if name == "python":
        return _kernels_py
    if name in ("cython", "auto"):
        try:
            return importlib.import_module("vczsynth._ckernels")
        except ImportError:
            if name == "cython":
                raise
            return _kernels_py
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list:
    out = ["python"]
    try:
        load_backend("cython")
        out.insert(0, "cython")
    except ImportError:
        pass
    return out


kernels = load_backend("python" if os.environ.get("VCZSYNTH_PURE_PYTHON") else "auto")
BACKEND = kernels.BACKEND
