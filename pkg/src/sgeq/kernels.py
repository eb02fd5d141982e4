"""Kernel backend selection.

The compiled extension ``sgeq._kernels`` is used when it imports cleanly;
otherwise, or when ``SGEQ_PURE_PYTHON`` is set to a non-empty value other
than ``0``, the numpy fallback in ``sgeq._kernels_py`` is used.
"""

import importlib
import os

from . import _kernels_py


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("sgeq._kernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if os.environ.get("SGEQ_PURE_PYTHON", "") not in ("", "0"):
        return "python", _kernels_py
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", _kernels_py


BACKEND, _impl = _select()

nearest = _impl.nearest
accumulate = _impl.accumulate
pack_fields = _impl.pack_fields
unpack_fields = _impl.unpack_fields
