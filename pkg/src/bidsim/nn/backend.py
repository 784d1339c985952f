"""Kernel backend selection.

At import time the compiled extension (``bidsim.nn._kernels``) is used
when present; otherwise the numpy reference (``bidsim.nn._pyops``) is.
``BIDSIM_BACKEND=python`` or ``=ext`` in the environment forces the
choice.  Both backends expose the same functions with identical
semantics; tests and the benchmark switch between them explicitly.
"""

import os
from contextlib import contextmanager

from ..errors import ConfigurationError
from . import _pyops

_BACKENDS = {"python": _pyops}

try:
    from . import _kernels  # noqa: F401  (built by setup.py; optional)

    _BACKENDS["ext"] = _kernels
except ImportError:
    _kernels = None

_forced = os.environ.get("BIDSIM_BACKEND")
if _forced:
    if _forced not in _BACKENDS:
        raise ConfigurationError(
            f"BIDSIM_BACKEND={_forced!r} is not available; "
            f"choices: {sorted(_BACKENDS)}")
    _active = _forced
else:
    _active = "ext" if "ext" in _BACKENDS else "python"

ops = _BACKENDS[_active]


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global ops, _active
    if name not in _BACKENDS:
        raise ConfigurationError(
            f"backend {name!r} is not available; choices: {sorted(_BACKENDS)}")
    _active = name
    ops = _BACKENDS[name]


@contextmanager
def use_backend(name: str):
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
