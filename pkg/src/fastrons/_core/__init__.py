"""Hot assembly kernels: compiled Cython extension with a numpy fallback.

The compiled module is used when it imports; setting ``FASTRONS_PURE_PYTHON=1``
forces the fallback.  ``BACKEND`` names the active implementation and
``get_backend(name)`` returns either one explicitly.
"""
import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and os.environ.get("FASTRONS_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"


def get_backend(name=None):
    """Module exposing ``gaussian_metric``, ``gaussian_rhs`` and ``tanh_collocation``."""
    name = BACKEND if name in (None, "auto") else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available; have {sorted(BACKENDS)}") from None


gaussian_metric = get_backend().gaussian_metric
gaussian_rhs = get_backend().gaussian_rhs
tanh_collocation = get_backend().tanh_collocation
