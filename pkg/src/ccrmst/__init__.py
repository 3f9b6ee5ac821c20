"""Template-matching ATT on restricted mean survival time under stratified case-cohort sampling."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
