"""Excitable kinetics with Hopf and saddle-node-on-cycle bifurcations, coupled by diffusion."""
__version__ = "0.1.0"

from .kinetics import (  # noqa: E402
    FixedPointKind, KineticParams, PhasePoint, Regime, all_fixed_points, classify_regime,
    limit_cycle_radius, snh_alpha,
)
from .rdsolver import InitialCondition, make_grid, run  # noqa: E402

__all__ = [
    "FixedPointKind", "InitialCondition", "KineticParams", "PhasePoint", "Regime",
    "all_fixed_points", "classify_regime", "limit_cycle_radius", "make_grid", "run", "snh_alpha",
]
