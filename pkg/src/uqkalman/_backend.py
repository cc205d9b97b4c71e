"""Select the compiled kernels when available, else the pure-Python ones.

Set ``UQKALMAN_PURE_PYTHON=1`` to force the fallback.
"""
import os
from importlib import import_module

from . import _kernels_py

kernels = _kernels_py
BACKEND = "python"

if not os.environ.get("UQKALMAN_PURE_PYTHON"):
    try:
        from . import _kernels as kernels  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass


def available_backends():
    names = ["python"]
    try:
        import_module("uqkalman._kernels")
        names.append("cython")
    except ImportError:
        pass
    return names


def get_kernels(name=None):
    """Kernel module for ``name`` (``"python"``/``"cython"``) or the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        return import_module("uqkalman._kernels")
    raise ValueError(f"unknown backend {name!r}")
