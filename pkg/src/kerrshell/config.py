"""Shared numerical tolerances and chart-decomposition constants."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Tolerances:
    """Default tolerances used across the library.

    algebraic : absolute tolerance for pointwise algebraic identities
    roundtrip : tolerance for coordinate roundtrips
    root_merge : roots closer than root_merge * max(1, r) are merged
        into a double root
    region_boundary : distance in (energy, angular momentum) below which
        a classification is flagged as boundary-indeterminate
    """

    algebraic: float = 1e-10
    roundtrip: float = 1e-9
    root_merge: float = 1e-7
    region_boundary: float = 1e-9
    vertex: float = 1e-10


@dataclass(frozen=True)
class ChartConstants:
    """Constants of the half-plane chart decomposition.

    The four constants obey 0 < e < c < a < b.  Defaults are chosen so
    that, for the shell parameter boxes used in tests, the trapped region
    stays inside the main (axis) chart; they are validated empirically,
    not derived.
    """

    a: float = 8.0
    b: float = 10.0
    c: float = 4.0
    e: float = 2.0

    def __post_init__(self):
        if not (0 < self.e < self.c < self.a < self.b):
            raise ValueError("chart constants must satisfy 0 < e < c < a < b")


@dataclass(frozen=True)
class RegionFractions:
    """Fractions of the Kerr gap quantities used to place the cut lines
    of the five-region decomposition around a trapped curve.

    Only strict orderings are required; the numbers are conventional.
    """

    inner: float = 0.25
    middle: float = 0.5
    outer: float = 0.75


DEFAULT_TOL = Tolerances()
DEFAULT_CHARTS = ChartConstants()
DEFAULT_FRACTIONS = RegionFractions()
