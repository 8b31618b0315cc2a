"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. Set ``ACQKD_PURE_PYTHON=1`` to force the fallback.
Both backends are bit-identical.
"""

from __future__ import annotations

import os

from . import _kernels_py

_py = _kernels_py
_c = None
if os.environ.get("ACQKD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _c  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on build
        _c = None

_impl = _c if _c is not None else _py
BACKEND = "compiled" if _c is not None else "python"

sample_pulses = _impl.sample_pulses
half_subset = _impl.half_subset
subset_parities = _impl.subset_parities


def backends():
    """Mapping of available backend name to module."""
    out = {"python": _py}
    if _c is not None:
        out["compiled"] = _c
    return out
