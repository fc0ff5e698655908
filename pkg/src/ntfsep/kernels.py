"""Backend selection for the hot kernels.

The compiled extension ``ntfsep._kernels`` is used when it imports;
otherwise the NumPy versions in ``ntfsep._kernels_py`` are used. Setting
``NTFSEP_PURE_PYTHON=1`` forces the NumPy versions.

The two elementwise power kernels stay on NumPy even with the compiled
backend: NumPy's SIMD exp/log loops beat the compiled loop there (see
``benchmarks/bench_kernels.py``). ``BACKENDS`` still exposes both
implementations of every kernel.
"""

import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and not os.environ.get("NTFSEP_PURE_PYTHON"):
    BACKEND = "compiled"
    _impl = _compiled
else:
    BACKEND = "python"
    _impl = _kernels_py

ELEMENTWISE_NUMPY = True

beta_terms = _kernels_py.beta_terms if ELEMENTWISE_NUMPY else _impl.beta_terms
beta_div_sum = _kernels_py.beta_div_sum if ELEMENTWISE_NUMPY else _impl.beta_div_sum
local_cov = _impl.local_cov
smooth_gains = _impl.smooth_gains

__all__ = [
    "BACKEND",
    "BACKENDS",
    "beta_terms",
    "beta_div_sum",
    "local_cov",
    "smooth_gains",
]
