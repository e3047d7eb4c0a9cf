"""Hot loops, compiled when available.

The Cython extension ``smoothreg._kernels`` is used if it was built;
otherwise the pure-Python implementations are loaded. Setting the
environment variable ``SMOOTHREG_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("SMOOTHREG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

fgm_chain = _impl.fgm_chain
# BLAS-backed lagged cross products match the compiled loop at n=500 and beat it
# from n=2000 up (benchmarks/bench_kernels.py), so this one always uses numpy
bartlett_sum = _kernels_py.bartlett_sum
arma11_filter = _impl.arma11_filter

__all__ = ["BACKEND", "fgm_chain", "bartlett_sum", "arma11_filter"]
