"""Numerical laboratory for mean field games with a scalar coupling parameter.

Submodules: :mod:`measures` (quantization and W2), :mod:`dynamics` (drifts and
characteristics), :mod:`equilibrium` (mean-field and N-player equilibria),
:mod:`pde` (entropy and viscous solvers), :mod:`analysis` (selection, bounds,
rates) and :mod:`cli`.
"""

__version__ = "0.1.0"
