"""Hot-loop kernels: compiled extension when built, NumPy fallback otherwise.

Both backends evaluate the identical floating-point expression sequence
(the extension is compiled with fp-contraction off), so path outputs are
bit-identical. Set CIRMIL_BACKEND=numpy or =cython to pin a backend;
pinning cython raises if the extension is not built.
"""

import os

from . import _numpy

try:
    from . import _cymilstein
except ImportError:
    _cymilstein = None

_BACKENDS = {"numpy": _numpy}
if _cymilstein is not None:
    _BACKENDS["cython"] = _cymilstein


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    """The kernel module for an explicit backend name."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ImportError(
            f"kernel backend {name!r} not available (built: {available_backends()})"
        ) from None


_env = os.environ.get("CIRMIL_BACKEND")
if _env:
    backend_name = _env
    _active = get_backend(_env)
else:
    backend_name = "cython" if _cymilstein is not None else "numpy"
    _active = _BACKENDS[backend_name]

terminal_batch = _active.terminal_batch
record_batch = _active.record_batch
