"""Resonator-shaped laser control of gas mixtures of similar quantum systems.

Submodules
----------
quantum       piecewise-constant Schrodinger propagation and excitation probabilities
control       discrimination objective, exact field gradient, drive chain rule, ascent
cavity        PZT drive -> intracavity field and width-averaged intensity
spectroscopy  Voigt-broadened rovibrational photo-absorption cross section
kinetics      four-fraction transport model, excitation rate, enrichment factor
harness       YAML scenarios, staged runs, CSV/JSON outputs, CLI
"""

__version__ = "0.1.0"

from .errors import (
    CavityControlError,
    ConfigurationError,
    DomainError,
    NumericError,
    UsageError,
    ValidationError,
)

__all__ = [
    "__version__",
    "CavityControlError",
    "ConfigurationError",
    "DomainError",
    "NumericError",
    "UsageError",
    "ValidationError",
]
