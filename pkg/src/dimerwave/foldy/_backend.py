"""Kernel backend selection.

The compiled extension is used when it imports; setting
``DIMERWAVE_KERNELS=python`` forces the NumPy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("DIMERWAVE_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "compiled"


def get_kernels(name: str | None = None):
    """Kernel module by name ('compiled', 'python') or the active default."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")
