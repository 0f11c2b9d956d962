"""Coupling-based convergence tools for dynamics driven by moving-average Gaussian noise."""

from ._kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
