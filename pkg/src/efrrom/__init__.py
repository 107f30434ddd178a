"""Evolve-filter-relax stabilized POD reduced order models with sparse-grid
stochastic collocation for uncertainty quantification of a convection-dominated
1D Burgers flow.

The hot kernels live in a compiled extension with a pure-python fallback;
``efrrom._kernels.BACKEND`` reports which one is active.
"""

from efrrom._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
