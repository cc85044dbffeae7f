"""Trapped Kerr orbits, zero-velocity curves and Vlasov matter shells.

Geometric units G = c = 1 throughout; the mass M of the background black
hole carries the length scale.  Orbit-level quantities (energy, angular
momentum, Carter constant) are per unit particle mass and expressed in
M = 1 units.
"""

from .config import Tolerances, ChartConstants
from .geometry import KerrParams, BLPoint, WeylPoint, MetricComponents, ChartBoundaryError
from .orbits import ConservedSet, RootSet, ParameterRegion, OrbitClass
from .zvc import MetricPerturbation, ZeroVelocityCurve, ShellBox
from .flow import PhaseState, Trajectory, OrbitPeriods
from .matter import ProfilePhi, CutoffPsi, MomentumDomain, StressComponents
from .fields import AxiScalarField, OneFormField, RenormalizedState

__all__ = [
    "Tolerances",
    "ChartConstants",
    "KerrParams",
    "BLPoint",
    "WeylPoint",
    "MetricComponents",
    "ChartBoundaryError",
    "ConservedSet",
    "RootSet",
    "ParameterRegion",
    "OrbitClass",
    "MetricPerturbation",
    "ZeroVelocityCurve",
    "ShellBox",
    "PhaseState",
    "Trajectory",
    "OrbitPeriods",
    "ProfilePhi",
    "CutoffPsi",
    "MomentumDomain",
    "StressComponents",
    "AxiScalarField",
    "OneFormField",
    "RenormalizedState",
]

__version__ = "0.1.0"
