"""Simulation and Monte Carlo verification of harness identities for Lévy processes.

Modules
-------
levy_models   process specs, exponents, moments, counter-seeded samplers
density       transition densities (Fourier and closed form), the density identity
bridges       bridge constructions, importance weights, the enlarged-filtration decomposition
harnesses     harness residuals, forward and reverse martingales, test suites
pfm           past-future martingale constructions and tower tests
mcstats       seeds, orthogonality tests, family-wise thresholds
cli           JSON-configured experiment runner
"""

from .kernels import BACKEND, RNG_VERSION
from .levy_models import (CompoundPoisson, ExponentialLaw, GammaSubordinator, NormalLaw, ProcessSpec,
                          SamplePath, TimeGrid, TwoPointLaw, brownian, center)
from .mcstats import RngSeed

__version__ = "0.1.0"

__all__ = ["BACKEND", "RNG_VERSION", "CompoundPoisson", "ExponentialLaw", "GammaSubordinator",
           "NormalLaw", "ProcessSpec", "RngSeed", "SamplePath", "TimeGrid", "TwoPointLaw",
           "brownian", "center"]
