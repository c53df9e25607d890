"""Desk-scale solver for the truncated, elliptically regularized steady
compressible heat-conducting flow system on a 2D staggered grid, with the
diagnostics (balance residuals, effective viscous flux, overshoot measure,
parameter sweeps) used to study the regularization limit."""

from ._kernels import BACKEND as kernel_backend

__all__ = ["kernel_backend", "__version__"]
__version__ = "0.1.0"
