"""Backend selection for the hot 1-D step kernels.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is arithmetically identical.  ``IMPULSEGAME_FORCE_PYTHON=1``
forces the fallback (used by the benchmark and the equivalence tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("IMPULSEGAME_FORCE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
combine_1d = _impl.combine_1d
upwind_grad_1d = _impl.upwind_grad_1d
