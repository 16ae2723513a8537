"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports; otherwise, or when the
environment variable ``STABL_PURE_PYTHON=1`` is set, the numpy reference
implementation is used.  Both expose the same functions.
"""
from __future__ import annotations

import importlib
import os

from . import _pykernels

NAMES = ("conditional_means", "table_conditional_means", "logistic_step", "logistic_gd", "mlp_train", "tree_build")


def _load_compiled():
    if os.environ.get("STABL_PURE_PYTHON", "") not in ("", "0"):
        return None
    try:
        return importlib.import_module("stabl._ckernels")
    except ImportError:
        return None


_compiled = _load_compiled()
BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels

conditional_means = _impl.conditional_means
table_conditional_means = _impl.table_conditional_means
logistic_step = _impl.logistic_step
logistic_gd = _impl.logistic_gd
mlp_train = _impl.mlp_train
tree_build = _impl.tree_build


def backend(name: str):
    """Return the kernel module for ``"cython"`` or ``"python"`` (for tests and benchmarks)."""
    if name == "python":
        return _pykernels
    if name == "cython":
        mod = importlib.import_module("stabl._ckernels")
        return mod
    raise ValueError(f"unknown backend {name!r}")
