"""Radial and angular quartics, special-orbit curves and the partition of
the (energy, angular momentum) plane.

All quantities are per unit particle mass in M = 1 units: energy eps,
axial angular momentum lz, Carter constant q, spin d = a/M.  A set of
constants labels a *direct* family when d*lz > 0 and a *retrograde*
family when d*lz < 0; d = 0 or lz = 0 is treated as direct by
convention (both branches coincide at d = 0).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_TOL
from .geometry import KerrParams, delta_of_r, sigma2_of, metric_bl


@dataclass(frozen=True)
class ConservedSet:
    """Integrals of motion (eps, lz, q) of a timelike geodesic, M = 1 units."""

    eps: float
    lz: float
    q: float = 0.0

    def __post_init__(self):
        if self.eps**2 < 1.0 and self.q < 0.0:
            raise ValueError("bound orbits (eps^2 < 1) require q >= 0")


class RootCase(enum.Enum):
    NO_ROOTS = "no-roots"
    ONE_ROOT = "one-root"
    TWO_ROOTS = "two-roots"
    THREE_ROOTS = "three-roots"
    DOUBLE_ROOT = "double-root"
    TRIPLE_ROOT = "triple-root"


@dataclass(frozen=True)
class RootSet:
    """Real roots of R in (r_H, infinity), sorted, with multiplicities."""

    roots: tuple[float, ...]
    multiplicities: tuple[int, ...]
    case: RootCase

    @property
    def count(self) -> int:
        return int(sum(self.multiplicities))

    def simple(self) -> tuple[float, ...]:
        return tuple(r for r, m in zip(self.roots, self.multiplicities) if m == 1)


class ParameterRegion(enum.Enum):
    A_BOUND_PLUS = "bound+"
    A_BOUND_MINUS = "bound-"
    A_SCATTERED_PLUS = "scattered+"
    A_SCATTERED_MINUS = "scattered-"
    A_CIRC = "circ"
    A_ABS_BOUND = "abs-bound"
    A_ABS_UNBOUND = "abs-unbound"
    INADMISSIBLE = "inadmissible"
    BOUNDARY = "boundary-indeterminate"


class OrbitClass(enum.Enum):
    TRAPPED = "trapped"
    PLUNGING = "plunging"
    PLUNGING_FROM_INFINITY = "plunging-from-infinity"
    SCATTERED = "scattered"
    SPHERICAL = "spherical"
    CIRCULAR = "circular"
    ASYMPTOTIC_CIRCULAR = "asymptotic-to-circular"
    INDETERMINATE = "indeterminate"


# ---------------------------------------------------------------------------
# The quartics R and T
# ---------------------------------------------------------------------------

def radial_poly_coeffs(eps, lz, q, d):
    """Coefficients [c4..c0] (descending) of
    R(r) = (eps (r^2 + d^2) - d lz)^2 - Delta(r) (r^2 + (lz - d eps)^2 + q).
    """
    A = (lz - d * eps) ** 2 + q
    c4 = eps * eps - 1.0
    c3 = 2.0
    c2 = 2.0 * d * d * eps * eps - 2.0 * eps * d * lz - A - d * d
    c1 = 2.0 * A
    c0 = -d * d * q
    return np.array([c4, c3, c2, c1, c0])


def radial_poly(r, eps, lz, q, d):
    """R(r), the radial quartic."""
    return np.polyval(radial_poly_coeffs(eps, lz, q, d), r)


def radial_poly_deriv(r, eps, lz, q, d):
    """dR/dr."""
    return np.polyval(np.polyder(radial_poly_coeffs(eps, lz, q, d)), r)


def radial_poly_deriv2(r, eps, lz, q, d):
    """d^2 R / dr^2."""
    return np.polyval(np.polyder(radial_poly_coeffs(eps, lz, q, d), 2), r)


def radial_poly_product(r, eps, lz, q, d):
    """R evaluated through the defining product form (test oracle path)."""
    r = np.asarray(r, dtype=float)
    return ((eps * (r * r + d * d) - d * lz) ** 2
            - delta_of_r(r, d) * (r * r + (lz - d * eps) ** 2 + q))


def angular_poly(Y, eps, lz, q, d):
    """T(Y) = q - (q + d^2 (1 - eps^2) + lz^2) Y^2 + d^2 (1 - eps^2) Y^4."""
    Y = np.asarray(Y, dtype=float)
    A = d * d * (1.0 - eps * eps)
    return q - (q + A + lz * lz) * Y * Y + A * Y**4


def angular_roots(eps, lz, q, d):
    """Roots Y^2 of T in [0, 1); returns sorted tuple (may be empty).

    Solves the quadratic in y = Y^2 and keeps the roots in [0, 1).  For
    q = 0 the double root y = 0 is included.
    """
    A = d * d * (1.0 - eps * eps)
    b = q + A + lz * lz
    if A == 0.0:
        if b == 0.0:
            return ()
        y = q / b
        return (y,) if 0.0 <= y < 1.0 else ()
    disc = b * b - 4.0 * q * A
    if disc < 0.0:
        return ()
    sq = np.sqrt(disc)
    ys = sorted(((b - sq) / (2.0 * A), (b + sq) / (2.0 * A)))
    return tuple(y for y in ys if 0.0 <= y < 1.0)


def theta_min(eps, lz, q, d):
    """Smallest polar angle reached by the theta-motion, in (0, pi/2]."""
    ys = angular_roots(eps, lz, q, d)
    if not ys:
        raise ValueError("no angular turning point for these constants")
    return float(np.arccos(np.sqrt(ys[0])))


def carter_of_theta(theta, eps, lz, d):
    """Carter constant of a turning point at polar angle theta:
    q = cos^2(theta) (d^2 (1 - eps^2) + lz^2 / sin^2(theta))."""
    c, s = np.cos(theta), np.sin(theta)
    return c * c * (d * d * (1.0 - eps * eps) + lz * lz / (s * s))


def carter_of_radius(r, eps, lz, d):
    """Carter constant for which r is a radial root:
    q = ((r^2 + d^2) eps - d lz)^2 / Delta - (r^2 + (lz - d eps)^2)."""
    r = np.asarray(r, dtype=float)
    return (((r * r + d * d) * eps - d * lz) ** 2 / delta_of_r(r, d)
            - (r * r + (lz - d * eps) ** 2))


def separability_residual(r, theta, eps, lz, d):
    """Pointwise residual of the separability identity
    -J~(r, theta) + Sigma^-2 (R/Delta + T/sin^2 theta) with the induced q."""
    q = carter_of_theta(theta, eps, lz, d)
    V, W, X, _ = metric_bl(r, theta, d)
    Ds2 = delta_of_r(r, d) * np.sin(theta) ** 2
    minus_J = 1.0 - (X * eps**2 + 2.0 * W * eps * lz - V * lz**2) / Ds2
    S2 = sigma2_of(r, theta, d)
    rhs = -(radial_poly(r, eps, lz, q, d) / delta_of_r(r, d)
            + angular_poly(np.cos(theta), eps, lz, q, d) / np.sin(theta) ** 2) / S2
    return minus_J - rhs


# ---------------------------------------------------------------------------
# Root finding for R on (r_H, infinity)
# ---------------------------------------------------------------------------

def _cubic_real_roots(coeffs):
    """Real roots of a cubic/quadratic/linear polynomial given by
    descending coefficients; uses the closed-form resolvent via numpy
    on the (at most 3x3) companion problem."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size <= 1:
        return np.array([])
    rr = np.roots(c)
    return np.sort(rr[np.abs(rr.imag) < 1e-9 * (1.0 + np.abs(rr.real))].real)


def radial_roots(eps, lz, q, d, tol=DEFAULT_TOL, r_far=None) -> RootSet:
    """All real roots of R in (r_H, infinity) with multiplicities.

    Brackets are derived from the critical points of R (roots of the
    cubic R') together with the endpoint signs R(r_H) >= 0 and the
    quartic asymptotics, then polished with Brent iteration.  Roots
    closer than root_merge * max(1, r) are merged into a double root.
    """
    coeffs = radial_poly_coeffs(eps, lz, q, d)
    r_H = 1.0 + np.sqrt(1.0 - d * d)
    crit = _cubic_real_roots(np.polyder(coeffs))
    crit = crit[crit > r_H]

    def R_eval(x):
        return np.polyval(coeffs, x)

    # outer bracket radius: beyond all critical points R is monotone and
    # carries the sign of the quartic/cubic asymptotics
    if r_far is None:
        r_far = max(100.0, 4.0 * (np.max(crit) if crit.size else r_H),
                    10.0 * (1.0 + abs(lz) + abs(q)))
    asym = 1.0 if eps * eps >= 1.0 else -1.0
    while asym * R_eval(r_far) <= 0.0:
        r_far *= 2.0
    nodes = np.concatenate([[r_H], crit[crit < r_far], [r_far]])

    roots = []
    vals = R_eval(nodes)
    for i in range(len(nodes) - 1):
        a, b = nodes[i], nodes[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0 and a > r_H:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            roots.append(brentq(R_eval, a, b, xtol=1e-14, rtol=8.9e-16))
    # double roots sit at interior critical points where R vanishes to
    # within the merge distance measured through the local curvature
    for rc in crit:
        if any(abs(rc - r0) < tol.root_merge * max(1.0, rc) for r0 in roots):
            continue
        curv = abs(np.polyval(np.polyder(coeffs, 2), rc))
        thresh = 0.5 * max(curv, 1.0) * (tol.root_merge * max(1.0, rc)) ** 2
        if abs(R_eval(rc)) <= thresh:
            roots.append(rc)
            roots.append(rc)

    roots = sorted(roots)
    merged, mults = [], []
    for r0 in roots:
        if merged and abs(r0 - merged[-1]) < tol.root_merge * max(1.0, r0):
            mults[-1] += 1
        else:
            merged.append(r0)
            mults.append(1)

    total = sum(mults)
    if total == 0:
        case = RootCase.NO_ROOTS
    elif 3 in mults:
        case = RootCase.TRIPLE_ROOT
    elif 2 in mults:
        case = RootCase.DOUBLE_ROOT
    elif total == 1:
        case = RootCase.ONE_ROOT
    elif total == 2:
        case = RootCase.TWO_ROOTS
    else:
        case = RootCase.THREE_ROOTS
    return RootSet(tuple(merged), tuple(mults), case)


# ---------------------------------------------------------------------------
# Circular orbits in the equatorial plane
# ---------------------------------------------------------------------------

def _branch_sign(branch) -> float:
    if branch in (+1, "+", "direct"):
        return 1.0
    if branch in (-1, "-", "retrograde"):
        return -1.0
    raise ValueError(f"unknown branch {branch!r}")


def photon_radius(branch, d) -> float:
    """Radius of the circular photon orbit: the lower boundary of the
    circular timelike family on this branch."""
    s = _branch_sign(branch)
    return 2.0 * (1.0 + np.cos((2.0 / 3.0) * np.arccos(-s * d)))


def circular_curves(r, branch, d):
    """Energy and angular momentum (Phi, Psi) of the circular orbit of
    radius r on the given branch; requires r > photon radius."""
    s = _branch_sign(branch)
    r = np.asarray(r, dtype=float)
    if np.any(r <= photon_radius(branch, d)):
        raise ValueError("no circular orbit at or below the photon radius")
    sqr = np.sqrt(r)
    den = r**0.75 * np.sqrt(r * sqr - 3.0 * sqr + s * 2.0 * d)
    phi = (r * sqr - 2.0 * sqr + s * d) / den
    psi = s * (r * r - s * 2.0 * d * sqr + d * d) / den
    return phi, psi


def isco_radius(branch, d) -> float:
    """Marginally stable (ISCO) radius via the closed Z1, Z2 form."""
    s = _branch_sign(branch)
    Z1 = 1.0 + (1.0 - d * d) ** (1.0 / 3.0) * ((1.0 + d) ** (1.0 / 3.0)
                                               + (1.0 - d) ** (1.0 / 3.0))
    Z2 = np.sqrt(3.0 * d * d + Z1 * Z1)
    return 3.0 + Z2 - s * np.sqrt((3.0 - Z1) * (3.0 + Z1 + 2.0 * Z2))


def isco(branch, d):
    """Return (r_ms, eps_min, ell_min) of the branch.  ell_min is the
    signed angular momentum Psi(r_ms)."""
    r_ms = isco_radius(branch, d)
    phi, psi = circular_curves(r_ms, branch, d)
    return r_ms, float(phi), float(psi)


def marginally_bound_radius(branch, d) -> float:
    """Radius of the marginally bound (eps = 1) circular orbit."""
    s = _branch_sign(branch)
    return 2.0 - s * d + 2.0 * np.sqrt(1.0 - s * d)


def rho_mb(branch, d) -> float:
    """Weyl radius of the marginally bound circular orbit,
    sqrt(Delta(r_mb)); the floor of the trapped domain on this branch."""
    return float(np.sqrt(delta_of_r(marginally_bound_radius(branch, d), d)))


def _phi_of_r(r, branch, d):
    return circular_curves(r, branch, d)[0]


def r_max_of_eps(eps, branch, d) -> float:
    """Inverse of Phi on its decreasing piece (r_ph, r_ms]; the inner
    (unstable) circular radius at energy eps."""
    r_ph = photon_radius(branch, d)
    r_ms = isco_radius(branch, d)
    eps_min = float(_phi_of_r(r_ms, branch, d))
    if eps < eps_min:
        raise ValueError("no circular orbit: eps below the ISCO energy")
    if eps == eps_min:
        return r_ms
    lo = r_ph * (1.0 + 1e-13) + 1e-13
    while _phi_of_r(lo, branch, d) < eps:
        lo = 0.5 * (lo + r_ph)
    return brentq(lambda r: _phi_of_r(r, branch, d) - eps, lo, r_ms,
                  xtol=1e-14, rtol=8.9e-16)


def r_min_of_eps(eps, branch, d) -> float:
    """Inverse of Phi on its increasing piece [r_ms, infinity); the outer
    (stable) circular radius, defined for eps_min <= eps < 1."""
    r_ms = isco_radius(branch, d)
    eps_min = float(_phi_of_r(r_ms, branch, d))
    if eps < eps_min:
        raise ValueError("no circular orbit: eps below the ISCO energy")
    if eps >= 1.0:
        raise ValueError("stable circular branch requires eps < 1")
    if eps == eps_min:
        return r_ms
    hi = 2.0 * r_ms
    while _phi_of_r(hi, branch, d) < eps:
        hi *= 2.0
    return brentq(lambda r: _phi_of_r(r, branch, d) - eps, r_ms, hi,
                  xtol=1e-14, rtol=8.9e-16)


def ell_lb(eps, branch, d) -> float:
    """Lower critical angular momentum Psi(r_max(eps)): on it the two
    smallest radial roots coalesce (unstable circular orbit)."""
    return float(circular_curves(r_max_of_eps(eps, branch, d), branch, d)[1])


def ell_ub(eps, branch, d) -> float:
    """Upper critical angular momentum Psi(r_min(eps)) (stable circular
    orbit); defined for eps < 1."""
    return float(circular_curves(r_min_of_eps(eps, branch, d), branch, d)[1])


def angular_momentum_bounds(eps, branch, d):
    """Return (ell_lb, ell_ub) for eps < 1, or (ell_lb, None) for eps >= 1."""
    lb = ell_lb(eps, branch, d)
    ub = ell_ub(eps, branch, d) if eps < 1.0 else None
    return lb, ub


def eps_s(lz, branch, d) -> float:
    """Inverse of ell_lb: energy of the unstable circular orbit with
    angular momentum lz."""
    s = _branch_sign(branch)
    _, eps_min, ell_min = isco(branch, d)
    if s * lz < s * ell_min:
        raise ValueError("no circular orbit: |lz| below the ISCO value")
    lo, hi = eps_min, 2.0
    while s * ell_lb(hi, branch, d) < s * lz:
        hi *= 2.0
    return brentq(lambda e: ell_lb(e, branch, d) - lz, lo, hi,
                  xtol=1e-13, rtol=8.9e-16)


def eps_m(lz, branch, d) -> float:
    """Inverse of ell_ub: energy of the stable circular orbit with
    angular momentum lz (always < 1)."""
    s = _branch_sign(branch)
    _, eps_min, ell_min = isco(branch, d)
    if s * lz < s * ell_min:
        raise ValueError("no circular orbit: |lz| below the ISCO value")
    return brentq(lambda e: ell_ub(e, branch, d) - lz, eps_min, 1.0 - 1e-13,
                  xtol=1e-13, rtol=8.9e-16)


def r_max_of_lz(lz, branch, d) -> float:
    """Radius of the unstable circular orbit with angular momentum lz
    (inverse of Psi on (r_ph, r_ms])."""
    s = _branch_sign(branch)
    r_ph = photon_radius(branch, d)
    r_ms = isco_radius(branch, d)
    f = lambda r: s * (circular_curves(r, branch, d)[1] - lz)
    lo = r_ph * (1.0 + 1e-12) + 1e-12
    while f(lo) < 0.0:
        lo = 0.5 * (lo + r_ph)
    return brentq(f, lo, r_ms, xtol=1e-14, rtol=8.9e-16)


def r_min_of_lz(lz, branch, d) -> float:
    """Radius of the stable circular orbit with angular momentum lz
    (inverse of Psi on [r_ms, infinity))."""
    s = _branch_sign(branch)
    r_ms = isco_radius(branch, d)
    f = lambda r: s * (circular_curves(r, branch, d)[1] - lz)
    hi = 2.0 * r_ms
    while f(hi) < 0.0:
        hi *= 2.0
    return brentq(f, r_ms, hi, xtol=1e-14, rtol=8.9e-16)


# ---------------------------------------------------------------------------
# Spherical orbits (constant r, oscillating theta); requires d != 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SphericalOrbitData:
    r_s: float
    eps: float
    lz: float
    q: float


def spherical_ell(r, eps2, d):
    """ell = lz/eps of the spherical orbit at radius r (retrograde-root
    branch, the one with nonnegative Carter constant)."""
    r = np.asarray(r, dtype=float)
    S = np.sqrt(1.0 - (1.0 - 1.0 / r) / eps2)
    return ((r * r - d * d) - r * delta_of_r(r, d) * S) / (d * (r - 1.0))


def spherical_eta(r, eps2, d):
    """eta = q/eps^2 of the spherical orbit at radius r (same branch)."""
    r = np.asarray(r, dtype=float)
    S = np.sqrt(1.0 - (1.0 - 1.0 / r) / eps2)
    num = (r**3 / (r - 1.0) * (4.0 * d * d - r * (r - 3.0) ** 2)
           + r * r / eps2 * (r * (r - 2.0) ** 2 - d * d)
           - 2.0 * r**3 / (r - 1.0) * delta_of_r(r, d) * (1.0 - S))
    return num / (d * d * (r - 1.0))


def spherical_eta_plus(r, eps2, d):
    """eta of the rejected plus-root branch (negative throughout)."""
    r = np.asarray(r, dtype=float)
    S = np.sqrt(1.0 - (1.0 - 1.0 / r) / eps2)
    num = (r**3 / (r - 1.0) * (4.0 * d * d - r * (r - 3.0) ** 2)
           + r * r / eps2 * (r * (r - 2.0) ** 2 - d * d)
           - 2.0 * r**3 / (r - 1.0) * delta_of_r(r, d) * (1.0 + S))
    return num / (d * d * (r - 1.0))


def spherical_branch(r_s, eps, d) -> SphericalOrbitData:
    """Spherical-orbit data at radius r_s and energy eps; raises when the
    induced Carter constant would be negative."""
    if d == 0.0:
        raise ValueError("spherical branch requires d != 0")
    eps2 = eps * eps
    if eps2 < 1.0 - 1.0 / r_s:
        raise ValueError("no spherical orbit here: eps^2 < 1 - 1/r")
    eta = float(spherical_eta(r_s, eps2, d))
    if eta < 0.0:
        raise ValueError("no spherical orbit here: negative Carter constant")
    ell = float(spherical_ell(r_s, eps2, d))
    return SphericalOrbitData(r_s=float(r_s), eps=float(eps),
                              lz=eps * ell, q=eps2 * eta)


def spherical_monotone_pieces(eps, d):
    """Radial intervals with eta >= 0 on which ell is monotone.

    For eps >= 1 there is one decreasing piece between the two unstable
    circular radii; between the ISCO energies a single interval split at
    the interior minimum of ell; above the retrograde ISCO energy the
    admissible set is two disjoint intervals (the gap carries eta < 0).
    """
    if eps >= 1.0:
        return [(r_max_of_eps(eps, "+", d), r_max_of_eps(eps, "-", d))]
    _, eps_min_m, _ = isco("-", d)
    if eps > eps_min_m:
        return [(r_max_of_eps(eps, "+", d), r_max_of_eps(eps, "-", d)),
                (r_min_of_eps(eps, "-", d), r_min_of_eps(eps, "+", d))]
    rm = r_of_min_ell(eps, d)
    return [(r_max_of_eps(eps, "+", d), rm), (rm, r_min_of_eps(eps, "+", d))]


def r_of_min_ell(eps, d) -> float:
    """Radius minimising ell on the connected admissible interval
    [r_max+(eps), r_min+(eps)] (valid below the retrograde ISCO energy)."""
    from scipy.optimize import minimize_scalar
    lo = r_max_of_eps(eps, "+", d)
    hi = r_min_of_eps(eps, "+", d)
    if hi - lo < 1e-12:
        return lo
    res = minimize_scalar(lambda r: spherical_ell(r, eps * eps, d),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x)


def tilde_ell_min(eps, d) -> float:
    """Smallest lz admitting a spherical orbit at energy eps < 1."""
    rm = r_of_min_ell(eps, d)
    return float(eps * spherical_ell(rm, eps * eps, d))


def spherical_solve(eps, lz, d, tol=DEFAULT_TOL):
    """All spherical radii for the constants (eps, lz): inverts ell on its
    monotone pieces.  Returns a list of SphericalOrbitData."""
    if d == 0.0:
        raise ValueError("spherical solve requires d != 0")
    eps2 = eps * eps
    ell_target = lz / eps
    pieces = [(a + 1e-12, b - 1e-12)
              for a, b in spherical_monotone_pieces(eps, d)]
    out = []
    for a, b in pieces:
        if b - a < 1e-12:
            continue
        fa = spherical_ell(a, eps2, d) - ell_target
        fb = spherical_ell(b, eps2, d) - ell_target
        if fa == 0.0:
            r0 = a
        elif fa * fb < 0.0:
            r0 = brentq(lambda r: spherical_ell(r, eps2, d) - ell_target,
                        a, b, xtol=1e-14, rtol=8.9e-16)
        else:
            continue
        eta = float(spherical_eta(r0, eps2, d))
        if eta >= -tol.algebraic:
            out.append(SphericalOrbitData(r_s=float(r0), eps=eps, lz=lz,
                                          q=max(eta, 0.0) * eps2))
    return out


def polish_double_root(eps, lz, r0, q0, d, maxit=8):
    """Newton-polish a double root of R in the unknowns (r, q):
    solves R(r, q) = dR/dr(r, q) = 0 starting from (r0, q0).

    Keeps closed-form spherical data consistent with the quartic at
    machine precision (the closed forms lose ~r^4 * eps_mach)."""
    r, q = float(r0), float(q0)
    for _ in range(maxit):
        R = radial_poly(r, eps, lz, q, d)
        Rr = radial_poly_deriv(r, eps, lz, q, d)
        Rrr = radial_poly_deriv2(r, eps, lz, q, d)
        D = delta_of_r(r, d)
        Dp = 2.0 * r - 2.0
        # Jacobian of (R, Rr) w.r.t. (r, q): [[Rr, -D], [Rrr, -Dp]]
        det = Rr * (-Dp) - (-D) * Rrr
        if det == 0.0:
            break
        dr = (R * (-Dp) - (-D) * Rr) / det
        dq = (Rr * Rr - R * Rrr) / det
        r, q = r - dr, q - dq
        if abs(dr) < 1e-15 * max(1.0, abs(r)) and abs(dq) < 1e-15 * max(1.0, abs(q)):
            break
    return r, q


# ---------------------------------------------------------------------------
# Parameter-plane partition and orbit classification
# ---------------------------------------------------------------------------

def _normalize_family(eps, lz, d):
    """Reduce to d >= 0 using the (a, lz) -> (-a, -lz) symmetry."""
    if d < 0:
        return eps, -lz, -d
    return eps, lz, d


def is_admissible(eps, lz, d) -> bool:
    """Admissibility of (eps, lz) for future-directed exterior motion."""
    eps, lz, d = _normalize_family(eps, lz, d)
    r_H = 1.0 + np.sqrt(1.0 - d * d)
    if d * lz > 0:
        return eps > 0.0
    return eps > d * lz / (2.0 * r_H)


def classify_region(eps, lz, params_or_d, tol=DEFAULT_TOL) -> ParameterRegion:
    """Locate (eps, lz) in the partition of the admissible plane.

    Values within the boundary tolerance of a separating curve are
    flagged BOUNDARY rather than assigned to a side.
    """
    d = params_or_d.d if isinstance(params_or_d, KerrParams) else float(params_or_d)
    eps, lz, d = _normalize_family(eps, lz, d)
    if not is_admissible(eps, lz, d):
        return ParameterRegion.INADMISSIBLE
    branch = "+" if d * lz > 0 or d == 0.0 or lz == 0.0 else "-"
    sgn = 1.0 if branch == "+" else -1.0
    _, eps_min, ell_min = isco(branch, d)
    btol = tol.region_boundary

    if abs(eps - eps_min) <= btol:
        return ParameterRegion.BOUNDARY
    if eps < eps_min:
        return (ParameterRegion.A_ABS_BOUND if eps < 1.0
                else ParameterRegion.A_ABS_UNBOUND)

    lb = ell_lb(eps, branch, d)
    if abs(lz - lb) <= btol * max(1.0, abs(lb)):
        return ParameterRegion.BOUNDARY
    if eps >= 1.0:
        if abs(eps - 1.0) <= btol:
            return ParameterRegion.BOUNDARY
        if sgn * lz > sgn * lb:
            return (ParameterRegion.A_SCATTERED_PLUS if branch == "+"
                    else ParameterRegion.A_SCATTERED_MINUS)
        return ParameterRegion.A_ABS_UNBOUND

    ub = ell_ub(eps, branch, d)
    if abs(lz - ub) <= btol * max(1.0, abs(ub)):
        return ParameterRegion.BOUNDARY
    if sgn * lb < sgn * lz < sgn * ub:
        return (ParameterRegion.A_BOUND_PLUS if branch == "+"
                else ParameterRegion.A_BOUND_MINUS)
    return ParameterRegion.A_ABS_BOUND


def classify_orbit(cs: ConservedSet, r0, theta0, sign_vr, params_or_d,
                   tol=DEFAULT_TOL) -> OrbitClass:
    """Classify the fate of the geodesic with constants cs released at
    BL position (r0, theta0) with radial velocity sign sign_vr.

    Follows the case tree of the classification of timelike
    future-directed geodesics; positions within tolerance of a double
    radial root are classified as spherical/circular.
    """
    d = params_or_d.d if isinstance(params_or_d, KerrParams) else float(params_or_d)
    eps, lz, q = cs.eps, cs.lz, cs.q
    eps, lz, d = _normalize_family(eps, lz, d)
    if radial_poly(r0, eps, lz, q, d) < -tol.algebraic * max(1.0, r0**4):
        raise ValueError("initial radius outside the allowed region (R < 0)")

    rs = radial_roots(eps, lz, q, d, tol=tol)
    pos_tol = tol.root_merge * max(1.0, r0)

    # on a double root: constant-radius motion
    for r_root, m in zip(rs.roots, rs.multiplicities):
        if m >= 2 and abs(r0 - r_root) <= pos_tol:
            if q <= tol.algebraic and abs(theta0 - np.pi / 2) <= 1e-9:
                return OrbitClass.CIRCULAR
            return OrbitClass.SPHERICAL

    if eps * eps < 1.0:
        if rs.count == 0:
            return OrbitClass.PLUNGING
        if rs.count == 1:
            return OrbitClass.PLUNGING
        if rs.case == RootCase.THREE_ROOTS:
            r0K, r1K, r2K = rs.roots
            if r0 <= r0K + pos_tol:
                return OrbitClass.PLUNGING
            if r1K - pos_tol <= r0 <= r2K + pos_tol:
                return OrbitClass.TRAPPED
            return OrbitClass.INDETERMINATE
        # double root with a companion simple root: boundary family
        if rs.case in (RootCase.DOUBLE_ROOT, RootCase.TRIPLE_ROOT):
            rd = rs.roots[int(np.argmax(rs.multiplicities))]
            if (q <= tol.algebraic and abs(theta0 - np.pi / 2) <= 1e-9
                    and r0 < rd and sign_vr > 0):
                return OrbitClass.ASYMPTOTIC_CIRCULAR
            if r0 < rd - pos_tol:
                return OrbitClass.PLUNGING
            return OrbitClass.INDETERMINATE
        return OrbitClass.INDETERMINATE

    # unbound energies
    if rs.count == 0:
        return (OrbitClass.PLUNGING_FROM_INFINITY if sign_vr < 0
                else OrbitClass.SCATTERED)
    if rs.case == RootCase.TWO_ROOTS:
        r0K, r1K = rs.roots
        if r0 <= r0K + pos_tol:
            return OrbitClass.PLUNGING
        if r0 >= r1K - pos_tol:
            return OrbitClass.SCATTERED
        return OrbitClass.INDETERMINATE
    if rs.case == RootCase.DOUBLE_ROOT:
        rd = rs.roots[int(np.argmax(rs.multiplicities))]
        if (q <= tol.algebraic and abs(theta0 - np.pi / 2) <= 1e-9
                and abs(r0 - rd) > pos_tol):
            return OrbitClass.ASYMPTOTIC_CIRCULAR
        return OrbitClass.INDETERMINATE
    return OrbitClass.INDETERMINATE
