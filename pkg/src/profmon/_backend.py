"""Selects the scoring-kernel backend at import time.

The compiled extension (profmon._kernels) is preferred; the NumPy module
(profmon._kernels_py) is the fallback. Set PROFMON_BACKEND=python or
PROFMON_BACKEND=cython to force one explicitly.
"""

from __future__ import annotations

import os

_forced = os.environ.get("PROFMON_BACKEND", "").strip().lower()

if _forced == "python":
    from . import _kernels_py as kernels
elif _forced == "cython":
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError as exc:  # pragma: no cover - build-dependent
        raise ImportError(
            "PROFMON_BACKEND=cython but the compiled extension is not built; "
            "reinstall the package or unset PROFMON_BACKEND"
        ) from exc
elif _forced:
    raise ImportError(f"unknown PROFMON_BACKEND value {_forced!r}; use 'python' or 'cython'")
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - build-dependent
        from . import _kernels_py as kernels  # type: ignore[no-redef]

BACKEND_NAME: str = kernels.BACKEND

__all__ = ["kernels", "BACKEND_NAME"]
