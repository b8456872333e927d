"""Hot inner loops: pairwise difference quotients and the p-flux.

The compiled extension ``_ckernels`` is used when it has been built;
otherwise the NumPy implementations in ``_pykernels`` are selected.  Set
``SCHAUDERLAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SCHAUDERLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

pair_quotient_max = _impl.pair_quotient_max
pair_envelope = _impl.pair_envelope
element_flux = _impl.element_flux


def backends():
    """Available implementations keyed by name (for tests and benchmarks)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


__all__ = ["BACKEND", "pair_quotient_max", "pair_envelope", "element_flux", "backends"]
