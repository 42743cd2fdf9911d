"""Kernel backend selection.

The compiled extension is preferred when present; the pure-numpy fallback is
used otherwise. ``FETRIL_KERNELS=c|python`` forces a specific backend (``c``
raises if the extension is missing).
"""

from __future__ import annotations

import os

_choice = os.environ.get("FETRIL_KERNELS", "auto").strip().lower()

if _choice in ("auto", "", "c"):
    try:
        from . import _kernels as _impl
    except ImportError:
        if _choice == "c":
            raise
        from . import _kernels_py as _impl
elif _choice in ("python", "py"):
    from . import _kernels_py as _impl
else:
    raise ValueError(f"unknown FETRIL_KERNELS value: {_choice!r}")

herd_select = _impl.herd_select
svm_primal = _impl.svm_primal


def kernels_backend() -> str:
    """Name of the active kernel backend: 'c' or 'python'."""
    return _impl.BACKEND
