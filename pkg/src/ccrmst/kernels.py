"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``CCRMST_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("CCRMST_PURE_PYTHON") != "1":
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

solve_assignment = _active.solve_assignment
weighted_nelson_aalen = _active.weighted_nelson_aalen
step_integral = _active.step_integral
rmst_from_increments = _active.rmst_from_increments

__all__ = [
    "BACKEND",
    "compiled_backend",
    "python_backend",
    "solve_assignment",
    "weighted_nelson_aalen",
    "step_integral",
    "rmst_from_increments",
]
