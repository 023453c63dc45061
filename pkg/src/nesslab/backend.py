"""Kernel selection.

The compiled extension is used when it imports; ``NESSLAB_BACKEND=python``
forces the numpy fallback.  ``use(name)`` switches at runtime (tests and the
benchmark compare both).
"""
from __future__ import annotations

import os

from . import _fallback

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

_active = None


def available() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def use(name: str) -> None:
    global _active
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not built; run `pip install -e .`")
        _active = _compiled
    elif name == "python":
        _active = _fallback
    else:
        raise ValueError(f"unknown backend {name!r}")


def name() -> str:
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def kernel():
    return _active


use("python" if os.environ.get("NESSLAB_BACKEND") == "python" or _compiled is None else "compiled")
