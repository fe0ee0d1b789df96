"""Backend selection for the hot loops.

The compiled extension is preferred. Set ``COWQKD_KERNELS=python`` to force
the pure-Python fallback (useful for debugging and for the benchmark).
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("COWQKD_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def available_backends():
    names = {"python": _pykernels}
    try:
        from . import _ckernels

        names["cython"] = _ckernels
    except ImportError:
        pass
    return names


def onepole_filter(x, b0, b1, a1, initial=0.0):
    return _impl.onepole_filter(x, b0, b1, a1, initial)


def slot_energies(x, samples_per_slot, baseline=0.0):
    return _impl.slot_energies(x, samples_per_slot, baseline)
