"""Numerical toolkit for the liberation process of two projections.

The characteristic flow of the Herglotz transform, its domains, inversion
to spectral densities, and a random-matrix Monte Carlo oracle.
"""
from . import closedform, domain, flow, inversion, mc_oracle, measures, transforms
from .errors import (BranchError, ConvergenceError, DivergenceError, DomainError,
                     IntegrationError, LiberationError, NegativeDensityError, PoleError)
from .measures import CircleMeasure, InitialData, preset
from .transforms import TraceParams

__version__ = "0.1.0"

__all__ = [
    "closedform", "domain", "flow", "inversion", "mc_oracle", "measures", "transforms",
    "BranchError", "ConvergenceError", "DivergenceError", "DomainError",
    "IntegrationError", "LiberationError", "NegativeDensityError", "PoleError",
    "CircleMeasure", "InitialData", "TraceParams", "preset",
]
