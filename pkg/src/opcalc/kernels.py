"""Backend selection for the matrix-response index-loop kernels.

The compiled extension is used when it was built; otherwise the pure-Python
loops are used. Setting ``OPCALC_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("OPCALC_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

quad_energy = _impl.quad_energy
quad_grad_a = _impl.quad_grad_a
quad_grad_r = _impl.quad_grad_r
quad_hess_aa = _impl.quad_hess_aa
quad_hess_ar = _impl.quad_hess_ar
quad_hess_rr = _impl.quad_hess_rr
