"""Picks the compiled kernels when available, else the pure-Python twin.

Set ``VOROPART_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

if os.environ.get("VOROPART_BACKEND", "").lower() == "python":
    from . import _pykernels as impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _pykernels as impl

        BACKEND = "python"

build_cells = impl.build_cells
clip_cells = impl.clip_cells
ir_query = impl.ir_query
circle_query = impl.circle_query
circle_count = impl.circle_count
circle_count_many = impl.circle_count_many
pair_flatness = impl.pair_flatness
KernelError = impl.KernelError
MAX_VERTS = impl.MAX_VERTS


def load(name: str):
    """Return a kernel module by backend name (``"cython"`` or ``"python"``)."""
    if name == "python":
        from . import _pykernels

        return _pykernels
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
