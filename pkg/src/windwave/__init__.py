"""Two-fluid steady water waves with wind: laminar flows, bifurcation and branches."""

from __future__ import annotations

from .core import (
    BadInputError,
    InfeasibleError,
    NumericalFailure,
    PhysicalConfig,
    Regime,
    StagnationError,
    Vorticity,
    WindWaveError,
)

__version__ = "0.1.0"

__all__ = [
    "BadInputError",
    "InfeasibleError",
    "NumericalFailure",
    "PhysicalConfig",
    "Regime",
    "StagnationError",
    "Vorticity",
    "WindWaveError",
    "__version__",
]
