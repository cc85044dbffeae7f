"""Kerr background in Boyer-Lindquist and Weyl coordinates.

All formulas are evaluated internally in M = 1 units with dimensionless
spin d = a/M; public functions accept and return physical lengths and
rescale on entry/exit.  The exterior region is r > r_plus; the Weyl
half-plane is rho > 0 with the horizon rod at rho = 0, |z| < beta and
the axis at rho = 0, |z| > beta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ChartBoundaryError(ValueError):
    """Raised when an operation is requested on the chart boundary
    (horizon, axis or poles) and no smooth extension is available."""


@dataclass(frozen=True)
class KerrParams:
    """Sub-extremal Kerr parameters (mass M, specific angular momentum a).

    Derived quantities: d = a/M, beta = sqrt(M^2 - a^2) and the horizon
    radii r_minus, r_plus.  Extremal and super-extremal inputs are
    rejected; a = 0 (Schwarzschild) is accepted.
    """

    M: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError("mass must be positive")
        if abs(self.a) >= self.M:
            raise ValueError("extremal/super-extremal unsupported: require |a| < M")

    @property
    def d(self) -> float:
        return self.a / self.M

    @property
    def beta(self) -> float:
        return np.sqrt(self.M**2 - self.a**2)

    @property
    def r_plus(self) -> float:
        return self.M + self.beta

    @property
    def r_minus(self) -> float:
        return self.M - self.beta

    @property
    def r_H(self) -> float:
        """Dimensionless horizon radius r_plus / M."""
        return 1.0 + np.sqrt(1.0 - self.d**2)


class BLPoint(NamedTuple):
    r: float
    theta: float


class WeylPoint(NamedTuple):
    rho: float
    z: float


class MetricComponents(NamedTuple):
    """Stationary axisymmetric metric data at a point:
    g = -V dt^2 + 2 W dt dphi + X dphi^2 + e2lambda (drho^2 + dz^2),
    with sigma = sqrt(X V + W^2) (= rho for Kerr).
    """

    V: float
    W: float
    X: float
    e2lambda: float
    sigma: float


def horizon_radii(params: KerrParams) -> tuple[float, float]:
    """Return (r_minus, r_plus)."""
    return params.r_minus, params.r_plus


# ---------------------------------------------------------------------------
# Boyer-Lindquist scalars (M = 1 units, dimensionless r)
# ---------------------------------------------------------------------------

def delta_of_r(r, d):
    """Horizon function Delta = r^2 - 2r + d^2."""
    return r * r - 2.0 * r + d * d


def sigma2_of(r, theta, d):
    """Sigma^2 = r^2 + d^2 cos^2(theta)."""
    c = np.cos(theta)
    return r * r + d * d * c * c


def pi_of(r, theta, d):
    """Pi = (r^2 + d^2)^2 - d^2 sin^2(theta) Delta."""
    s = np.sin(theta)
    return (r * r + d * d) ** 2 - d * d * s * s * delta_of_r(r, d)


def metric_bl(r, theta, d):
    """Kerr metric data (V, W, X, e2lambda) in BL form, M = 1 units."""
    s2 = np.sin(theta) ** 2
    S2 = sigma2_of(r, theta, d)
    P = pi_of(r, theta, d)
    D = delta_of_r(r, d)
    V = 1.0 - 2.0 * r / S2
    W = -2.0 * d * r * s2 / S2
    X = s2 * P / S2
    # conformal factor of the flat (rho, z) block
    G = np.cos(theta) ** 2 + (r - 1.0) ** 2 * s2 / D
    e2lam = S2 / (D * G)
    return V, W, X, e2lam


def omega_bl(r, theta, d):
    """Frame-dragging rate omega = -W/X = 2 d r / Pi."""
    return 2.0 * d * r / pi_of(r, theta, d)


def x_axis_factor(r, theta, d):
    """Smooth axis extension X_A = X / rho^2 = Pi / (Delta Sigma^2);
    strictly positive up to the axis."""
    return pi_of(r, theta, d) / (delta_of_r(r, d) * sigma2_of(r, theta, d))


# ---------------------------------------------------------------------------
# Coordinate transforms
# ---------------------------------------------------------------------------

def bl_to_weyl(params: KerrParams, p: BLPoint) -> WeylPoint:
    """Map (r, theta) to Weyl coordinates rho = sqrt(Delta) sin(theta),
    z = (r - M) cos(theta)."""
    r, theta = p
    rt = np.asarray(r, dtype=float) / params.M
    if np.any(rt <= params.r_H):
        raise ChartBoundaryError("r <= r_plus: point not in the exterior chart")
    D = delta_of_r(rt, params.d)
    rho = np.sqrt(D) * np.sin(theta)
    z = (rt - 1.0) * np.cos(theta)
    return WeylPoint(params.M * rho, params.M * z)


def weyl_to_bl(params: KerrParams, p: WeylPoint) -> BLPoint:
    """Closed-form inverse of bl_to_weyl on the open half-plane rho > 0."""
    rho, z = p
    rho = np.asarray(rho, dtype=float) / params.M
    z = np.asarray(z, dtype=float) / params.M
    if np.any(rho <= 0):
        raise ChartBoundaryError("rho <= 0: chart boundary (horizon/axis)")
    b2 = 1.0 - params.d**2
    inner = rho**4 + 2.0 * rho**2 * (z * z + b2) + (z * z - b2) ** 2
    rt = 1.0 + np.sqrt((b2 + rho**2 + z * z) + np.sqrt(inner)) / np.sqrt(2.0)
    D = delta_of_r(rt, params.d)
    sin_t = np.clip(rho / np.sqrt(D), 0.0, 1.0)
    cos_t = np.clip(z / (rt - 1.0), -1.0, 1.0)
    theta = np.arctan2(sin_t, cos_t)
    return BLPoint(params.M * rt, theta)


def metric_weyl(params: KerrParams, p: WeylPoint) -> MetricComponents:
    """Kerr metric data at an interior Weyl point; sigma = rho exactly."""
    r, theta = weyl_to_bl(params, p)
    rt = r / params.M
    V, W, X, e2lam = metric_bl(rt, theta, params.d)
    return MetricComponents(
        V=V,
        W=params.M * W,
        X=params.M**2 * X,
        e2lambda=e2lam,
        sigma=np.asarray(p.rho, dtype=float) + 0.0,
    )


def ergosphere(params: KerrParams, theta) -> float:
    """BL radius of the ergosphere at polar angle theta."""
    return params.M + np.sqrt(params.M**2 - params.a**2 * np.cos(theta) ** 2)


def ergosphere_weyl(params: KerrParams, theta):
    """Weyl image of the ergosphere point at polar angle theta."""
    r = ergosphere(params, theta)
    return bl_to_weyl(params, BLPoint(r, theta))


# ---------------------------------------------------------------------------
# Analytic first derivatives (M = 1 units)
# ---------------------------------------------------------------------------

def bl_jacobian_inverse(r, theta, d):
    """Partials of the inverse chart map: returns
    (dr/drho, dr/dz, dtheta/drho, dtheta/dz) at (r, theta)."""
    D = delta_of_r(r, d)
    s, c = np.sin(theta), np.cos(theta)
    G = c * c + (r - 1.0) ** 2 * s * s / D
    sqD = np.sqrt(D)
    dr_drho = (r - 1.0) * s / (sqD * G)
    dr_dz = c / G
    dth_drho = c / (sqD * G)
    dth_dz = -(r - 1.0) * s / (D * G)
    return dr_drho, dr_dz, dth_drho, dth_dz


def weyl_gradient(r, theta, d, df_dr, df_dtheta):
    """Convert analytic BL partials of a scalar into (d/drho, d/dz)."""
    dr_drho, dr_dz, dth_drho, dth_dz = bl_jacobian_inverse(r, theta, d)
    return (df_dr * dr_drho + df_dtheta * dth_drho,
            df_dr * dr_dz + df_dtheta * dth_dz)


def _bl_partials(r, theta, d):
    """Raw BL partials of Sigma^2, Delta and Pi."""
    s, c = np.sin(theta), np.cos(theta)
    sin2t = 2.0 * s * c
    S2 = sigma2_of(r, theta, d)
    D = delta_of_r(r, d)
    P = pi_of(r, theta, d)
    dS2_dr = 2.0 * r
    dS2_dth = -d * d * sin2t
    dD_dr = 2.0 * r - 2.0
    dP_dr = 4.0 * r * (r * r + d * d) - d * d * s * s * dD_dr
    dP_dth = -d * d * sin2t * D
    return S2, D, P, dS2_dr, dS2_dth, dD_dr, dP_dr, dP_dth


def grad_X(r, theta, d):
    """(d/drho, d/dz) of X_K."""
    s, c = np.sin(theta), np.cos(theta)
    S2, D, P, dS2_dr, dS2_dth, dD_dr, dP_dr, dP_dth = _bl_partials(r, theta, d)
    X = s * s * P / S2
    dX_dr = X * (dP_dr / P - dS2_dr / S2)
    dX_dth = X * (2.0 * c / s + dP_dth / P - dS2_dth / S2)
    return weyl_gradient(r, theta, d, dX_dr, dX_dth)


def grad_omega(r, theta, d):
    """(d/drho, d/dz) of the frame-dragging rate omega = 2 d r / Pi."""
    S2, D, P, dS2_dr, dS2_dth, dD_dr, dP_dr, dP_dth = _bl_partials(r, theta, d)
    dw_dr = 2.0 * d * (P - r * dP_dr) / (P * P)
    dw_dth = -2.0 * d * r * dP_dth / (P * P)
    return weyl_gradient(r, theta, d, dw_dr, dw_dth)


def grad_lambda(r, theta, d):
    """(d/drho, d/dz) of the conformal exponent lambda_K."""
    s, c = np.sin(theta), np.cos(theta)
    sin2t = 2.0 * s * c
    S2, D, P, dS2_dr, dS2_dth, dD_dr, dP_dr, dP_dth = _bl_partials(r, theta, d)
    G = c * c + (r - 1.0) ** 2 * s * s / D
    b2 = 1.0 - d * d
    dG_dr = s * s * (2.0 * (r - 1.0) * D - (r - 1.0) ** 2 * dD_dr) / (D * D)
    dG_dth = sin2t * b2 / D
    dlam_dr = 0.5 * (dS2_dr / S2 - dD_dr / D - dG_dr / G)
    dlam_dth = 0.5 * (dS2_dth / S2 - dG_dth / G)
    return weyl_gradient(r, theta, d, dlam_dr, dlam_dth)


def grad_twist_potential(r, theta, d):
    """(d/drho, d/dz) of the Kerr Ernst (twist) potential Y_K,
    defined through d(W/X) = (rho/X^2)(dY wedge-dual) so that only the
    gradient is ever needed:
        dY/drho = -(X^2/rho) domega/dz,  dY/dz = (X^2/rho) domega/drho.
    """
    s = np.sin(theta)
    S2 = sigma2_of(r, theta, d)
    P = pi_of(r, theta, d)
    D = delta_of_r(r, d)
    X = s * s * P / S2
    rho = np.sqrt(D) * s
    dw_drho, dw_dz = grad_omega(r, theta, d)
    return (-(X * X / rho) * dw_dz, (X * X / rho) * dw_drho)


def kerr_fields_weyl(params: KerrParams, rho, z):
    """Evaluate the Kerr background and its first derivatives on arrays of
    interior Weyl points, in M = 1 units (inputs are physical lengths).

    Returns a dict with keys:
    r, theta, V, W, X, e2lam, omega, X_axis,
    dX_drho, dX_dz, domega_drho, domega_dz,
    dlam_drho, dlam_dz, dY_drho, dY_dz.
    """
    d = params.d
    rt, theta = weyl_to_bl(params, WeylPoint(np.asarray(rho, float),
                                             np.asarray(z, float)))
    rt = np.asarray(rt, float) / params.M
    V, W, X, e2lam = metric_bl(rt, theta, d)
    out = {
        "r": rt, "theta": theta, "V": V, "W": W, "X": X, "e2lam": e2lam,
        "omega": omega_bl(rt, theta, d),
        "X_axis": x_axis_factor(rt, theta, d),
    }
    out["dX_drho"], out["dX_dz"] = grad_X(rt, theta, d)
    out["domega_drho"], out["domega_dz"] = grad_omega(rt, theta, d)
    out["dlam_drho"], out["dlam_dz"] = grad_lambda(rt, theta, d)
    out["dY_drho"], out["dY_dz"] = grad_twist_potential(rt, theta, d)
    return out
