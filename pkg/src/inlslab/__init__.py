"""Numerical lab for the focusing inhomogeneous nonlinear Schrodinger equation.

``i u_t + Delta u + |x|^{-b} |u|^{2 sigma} u = 0`` on R^N with radial data.

Modules
-------
params
    Exact parameters, critical indices, regimes and theorem hypotheses.
strichartz
    Exact admissible pairs and exponent relation systems.
numerics
    Radial grids, the discrete Laplacian and its spectral calculus.
groundstate
    Weinstein functionals, ground states and sharp constants.
evolution
    Split-step time integration and blow-up diagnostics.
cli
    Configuration-driven experiment runner.
"""

from .params import ProblemParams, check_hypotheses, classify_regime, derive_indices

__version__ = "0.1.0"

__all__ = ["ProblemParams", "check_hypotheses", "classify_regime", "derive_indices", "__version__"]
