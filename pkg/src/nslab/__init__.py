"""Pseudo-spectral lab for a renormalized discretization of the 3D stochastic Navier-Stokes equation.

Modules:

* :mod:`nslab.spectral`: Fourier coefficient storage, transforms, dealiased products, Leray projection.
* :mod:`nslab.discrete`: the discretization multipliers and the operators they induce.
* :mod:`nslab.besov`: Littlewood-Paley blocks, Besov norms, paraproducts.
* :mod:`nslab.noise`: the coupled Ornstein-Uhlenbeck noise processes.
* :mod:`nslab.renorm`: renormalization constants and their continuum limits.
* :mod:`nslab.wick`: Wick products and the stochastic tree terms.
* :mod:`nslab.solver`: time stepping of the approximating and reference equations.
* :mod:`nslab.probes`: empirical ratio probes for operator estimates.
* :mod:`nslab.cli`: the ``nslab`` command line.
"""

__version__ = "0.1.0"
