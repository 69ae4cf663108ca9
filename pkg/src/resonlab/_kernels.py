"""Kernel selection: compiled Crank-Nicolson stepper with NumPy fallback.

The compiled extension is optional; if it failed to build (or the
environment variable ``RESONLAB_KERNEL=py`` forces it off) the pure-NumPy
implementation is used.  ``RESONLAB_KERNEL=c`` insists on the extension and
raises if it is missing.  ``benchmarks/bench_cn.py`` compares the two.
"""

from __future__ import annotations

import os

from . import _kernels_py

_choice = os.environ.get("RESONLAB_KERNEL", "auto").lower()

if _choice == "py":
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _cnkernel as _impl  # type: ignore[no-redef]
        HAVE_COMPILED = True
    except ImportError:
        if _choice == "c":
            raise
        _impl = _kernels_py
        HAVE_COMPILED = False

KERNEL_NAME = "compiled" if (HAVE_COMPILED and _choice != "py") else "numpy"

cn_run = _impl.cn_run
cn_run_py = _kernels_py.cn_run

__all__ = ["cn_run", "cn_run_py", "HAVE_COMPILED", "KERNEL_NAME"]
