"""Selects the numerical kernel backend at import time.

The compiled extension (``fcrkit._kernels``, Cython) is preferred; the pure
numpy fallback (``fcrkit._kernels_py``) is used when the extension is not
built.  Set ``FCRKIT_BACKEND=compiled`` or ``FCRKIT_BACKEND=python`` to force
one (the compiled setting raises if the extension is missing).

Both backends expose the same API and the same algorithms; see
``benchmarks/bench_backends.py`` for a speed comparison.
"""

from __future__ import annotations

import os

from . import _kernels_py
from .errors import ConfigError

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on how the package was built
    _kernels = None

_BACKENDS = {"python": _kernels_py}
if _kernels is not None:
    _BACKENDS["compiled"] = _kernels


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def kernels_for(name: str):
    """Kernel module for an explicit backend name."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ConfigError(
            f"backend {name!r} not available; have {available_backends()}"
        ) from None


def _select():
    forced = os.environ.get("FCRKIT_BACKEND", "").strip().lower()
    if forced in ("", "auto"):
        return _BACKENDS.get("compiled", _kernels_py)
    return kernels_for(forced)


_ACTIVE = _select()


def kernels():
    """The active kernel module."""
    return _ACTIVE


def backend_name() -> str:
    return _ACTIVE.BACKEND_NAME
