"""Stepping-backend selection.

Networks without plastic synapses can run their whole step loop inside a
compiled kernel; if the extension is missing (no compiler at install time)
everything falls back to the NumPy path in ``simulation.py``, which computes
bit-identical results. The choice is made once at import and can be forced
with ``LOIHIEMU_BACKEND=python|compiled`` or per run() call.
"""

from __future__ import annotations

import os

try:
    from . import _kernel as _compiled
except ImportError:
    _compiled = None

_ENV_VAR = "LOIHIEMU_BACKEND"


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _compiled is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get(_ENV_VAR)
    if forced:
        return forced
    return "compiled" if _compiled is not None else "python"


def resolve_backend(name: str | None):
    """Map a backend name to the kernel module (None means the NumPy path)."""
    if name is None:
        name = default_backend()
    if name == "python":
        return None
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError(
                "compiled backend requested but the extension is not built;"
                " reinstall with a C compiler or set LOIHIEMU_BACKEND=python"
            )
        return _compiled
    raise ValueError(f"unknown backend '{name}' (choose 'compiled' or 'python')")
