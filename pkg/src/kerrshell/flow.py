"""Numerical integration of the reduced Hamiltonian geodesic system in
BL and Weyl charts, conservation monitoring, period quadrature and the
orbit-fate oracle.

The reduced 4-dimensional system evolves (r, theta, v_r, v_theta) with
the integrals (eps, lz) as parameters; every Carter-constant term in
the right-hand side cancels, so the flow conserves eps, lz exactly and
q, H up to integrator error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from numpy.polynomial.legendre import leggauss

from .geometry import KerrParams, delta_of_r, sigma2_of, metric_bl, kerr_fields_weyl
from .orbits import (ConservedSet, OrbitClass, radial_poly, radial_poly_deriv,
                     radial_poly_coeffs, angular_poly, angular_roots,
                     radial_roots, theta_min)


@dataclass
class PhaseState:
    """Point of the reduced phase space in one chart.

    BL chart: (x1, x2) = (r, theta), (v1, v2) = (v_r, v_theta) covariant.
    Weyl chart: (x1, x2) = (rho, z), (v1, v2) = (v^rho, v^z) contravariant.
    """

    chart: str
    x1: float
    x2: float
    v1: float
    v2: float
    eps: float
    lz: float
    tau: float = 0.0
    lam: float = 0.0


class Termination(enum.Enum):
    HORIZON = "horizon-reached"
    ESCAPED = "escaped"
    SPAN = "tau-span exhausted"
    STEP_FAILURE = "step failure"


@dataclass
class Trajectory:
    params: KerrParams
    cs: ConservedSet
    tau: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    v_r: np.ndarray
    v_theta: np.ndarray
    lam: np.ndarray
    termination: Termination
    drift_eps: float = 0.0
    drift_lz: float = 0.0
    drift_q: float = 0.0
    drift_H: float = 0.0
    radial_turnings: np.ndarray = field(default_factory=lambda: np.array([]))

    def to_csv(self, path, metadata=None):
        with open(path, "w", newline="") as f:
            f.write("# geodesic trajectory (BL chart, proper time)\n")
            f.write(f"# M={self.params.M!r} a={self.params.a!r}\n")
            f.write(f"# eps={self.cs.eps!r} lz={self.cs.lz!r} q={self.cs.q!r}\n")
            f.write(f"# termination={self.termination.value}\n")
            for k, v in (metadata or {}).items():
                f.write(f"# {k}={v}\n")
            f.write("tau,r,theta,v_r,v_theta,eps,lz,q,H\n")
            cs, p = self.cs, self.params
            for i in range(len(self.tau)):
                q, H = conserved_from_state(
                    p, self.r[i], self.theta[i], self.v_r[i], self.v_theta[i],
                    cs.eps, cs.lz)
                f.write(f"{self.tau[i]!r},{self.r[i]!r},{self.theta[i]!r},"
                        f"{self.v_r[i]!r},{self.v_theta[i]!r},"
                        f"{cs.eps!r},{cs.lz!r},{q!r},{H!r}\n")


@dataclass(frozen=True)
class OrbitPeriods:
    T_r: float
    T_theta: float
    err_r: float
    err_theta: float


# ---------------------------------------------------------------------------
# Conserved quantities
# ---------------------------------------------------------------------------

def conserved_from_state(params: KerrParams, r, theta, v_r, v_theta, eps, lz):
    """Carter constant and Hamiltonian of a reduced BL state."""
    d = params.d
    c, s = np.cos(theta), np.sin(theta)
    q = v_theta**2 + c * c * (d * d * (1.0 - eps * eps) + lz * lz / (s * s))
    S2 = sigma2_of(r, theta, d)
    D = delta_of_r(r, d)
    R = radial_poly(r, eps, lz, q, d)
    T = angular_poly(c, eps, lz, q, d)
    H = 0.5 * ((D * v_r**2 + v_theta**2 - R / D - T / (s * s)) / S2 - 1.0)
    return float(q), float(H)


def conserved_from_4velocity(params: KerrParams, r, theta, vt, vphi, vr, vtheta):
    """(eps, lz, q, H) from a full contravariant 4-velocity in BL
    coordinates (M = 1 units)."""
    d = params.d
    V, W, X, _ = metric_bl(r, theta, d)
    eps = V * vt - W * vphi
    lz = W * vt + X * vphi
    S2 = sigma2_of(r, theta, d)
    D = delta_of_r(r, d)
    v_r = S2 * vr / D
    v_th = S2 * vtheta
    q, H = conserved_from_state(params, r, theta, v_r, v_th, eps, lz)
    return float(eps), float(lz), q, H


def state_from_constants(params: KerrParams, cs: ConservedSet, r, theta,
                         sign_vr=1.0, sign_vtheta=1.0) -> PhaseState:
    """Mass-shell BL state at (r, theta) with the given constants; the
    velocity magnitudes are fixed by R and T, the signs are free."""
    d = params.d
    R = radial_poly(r, cs.eps, cs.lz, cs.q, d)
    T = angular_poly(np.cos(theta), cs.eps, cs.lz, cs.q, d)
    if R < -1e-12 * max(1.0, r**4) or T < -1e-12:
        raise ValueError("(r, theta) outside the allowed region")
    v_r = sign_vr * np.sqrt(max(R, 0.0)) / delta_of_r(r, d)
    v_th = sign_vtheta * np.sqrt(max(T, 0.0)) / np.sin(theta)
    return PhaseState("bl", float(r), float(theta), float(v_r), float(v_th),
                      cs.eps, cs.lz)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------

def _radial_force(r, eps, lz, q, d):
    """(Delta dR/dr - Delta' R) / Delta^2 = Delta^2 d/dr (R / Delta^2) ...
    the gradient of the radial effective potential; every q term cancels.
    This is the sign that leaves the mass shell Delta^2 v_r^2 = R
    invariant along the flow."""
    D = delta_of_r(r, d)
    Dp = 2.0 * r - 2.0
    R = radial_poly(r, eps, lz, q, d)
    Rp = radial_poly_deriv(r, eps, lz, q, d)
    return (D * Rp - Dp * R) / (D * D)


def _angular_force(theta, eps, lz, d):
    """d/dtheta of T(cos theta)/sin^2 theta; independent of q."""
    A = d * d * (1.0 - eps * eps)
    s, c = np.sin(theta), np.cos(theta)
    return A * 2.0 * s * c + 2.0 * lz * lz * c / s**3


def bl_rhs(params: KerrParams, eps, lz, q):
    """Proper-time reduced system on y = (r, theta, v_r, v_theta, lam)."""
    d = params.d

    def rhs(tau, y):
        r, th, vr, vth, _ = y
        S2 = sigma2_of(r, th, d)
        D = delta_of_r(r, d)
        return (D * vr / S2,
                vth / S2,
                (-(2.0 * r - 2.0) * vr * vr + _radial_force(r, eps, lz, q, d))
                / (2.0 * S2),
                _angular_force(th, eps, lz, d) / (2.0 * S2),
                1.0 / S2)

    return rhs


def _regular_rhs(params: KerrParams, eps, lz, q, mino: bool):
    """Reduced system in the horizon-regular radial momentum u = Delta v_r
    (u stays bounded at the horizon; on shell u^2 = R):
        dr = u / Sigma^2 dtau,
        du = [Delta'(u^2 - R)/Delta + R'] / (2 Sigma^2) dtau.
    With mino=True the independent variable is Mino time and the last
    state component accumulates proper time."""
    d = params.d

    def rhs(t, y):
        r, th, u, vth, _ = y
        S2 = sigma2_of(r, th, d)
        D = delta_of_r(r, d)
        R = radial_poly(r, eps, lz, q, d)
        Rp = radial_poly_deriv(r, eps, lz, q, d)
        du = ((2.0 * r - 2.0) * (u * u - R) / D + Rp) / 2.0
        dvth = _angular_force(th, eps, lz, d) / 2.0
        if mino:
            return (u, vth, du, dvth, S2)
        return (u / S2, vth / S2, du / S2, dvth / S2, 1.0 / S2)

    return rhs


def mino_rhs(params: KerrParams, eps, lz, q):
    """Mino-time reduced system on y = (r, theta, v_r, v_theta, tau):
    d tau = Sigma^2 d lambda decouples the radial and angular motion."""
    d = params.d

    def rhs(lam, y):
        r, th, vr, vth, _ = y
        D = delta_of_r(r, d)
        return (D * vr,
                vth,
                (-(2.0 * r - 2.0) * vr * vr + _radial_force(r, eps, lz, q, d)) / 2.0,
                _angular_force(th, eps, lz, d) / 2.0,
                sigma2_of(r, th, d))

    return rhs


def weyl_rhs(params: KerrParams, eps, lz):
    """Proper-time system on y = (rho, z, v^rho, v^z) in the Weyl chart;
    the potential term uses J and the conformal-factor Christoffels."""

    def rhs(tau, y):
        rho, z, vr, vz = y
        bg = kerr_fields_weyl(params, rho, z)
        X = bg["X"]
        omega = bg["omega"]
        u = eps - omega * lz
        dX_r, dX_z = bg["dX_drho"], bg["dX_dz"]
        dw_r, dw_z = bg["domega_drho"], bg["domega_dz"]
        dJ_r = ((dX_r * u * u - 2.0 * X * u * lz * dw_r) / rho**2
                - 2.0 * X * u * u / rho**3 + lz * lz * dX_r / X**2)
        dJ_z = ((dX_z * u * u - 2.0 * X * u * lz * dw_z) / rho**2
                + lz * lz * dX_z / X**2)
        dl_r, dl_z = bg["dlam_drho"], bg["dlam_dz"]
        e2l = bg["e2lam"]
        a_r = -0.5 * dJ_r / e2l - (dl_r * (vr * vr - vz * vz) + 2.0 * dl_z * vr * vz)
        a_z = -0.5 * dJ_z / e2l - (dl_z * (vz * vz - vr * vr) + 2.0 * dl_r * vr * vz)
        return (vr, vz, a_r, a_z)

    return rhs


def bl_state_to_weyl(params: KerrParams, state: PhaseState):
    """Map a BL reduced state to the Weyl chart (positions and velocities)."""
    d = params.d
    r, th = state.x1, state.x2
    S2 = sigma2_of(r, th, d)
    D = delta_of_r(r, d)
    rdot = D * state.v1 / S2
    thdot = state.v2 / S2
    s, c = np.sin(th), np.cos(th)
    rho = np.sqrt(D) * s
    z = (r - 1.0) * c
    v_rho = (r - 1.0) * s / np.sqrt(D) * rdot + np.sqrt(D) * c * thdot
    v_z = c * rdot - (r - 1.0) * s * thdot
    return PhaseState("weyl", float(rho), float(z), float(v_rho), float(v_z),
                      state.eps, state.lz, state.tau, state.lam)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def integrate(params: KerrParams, cs: ConservedSet, state0: PhaseState,
              tau_span: float, rtol=1e-10, atol=1e-12,
              horizon_margin=1e-6, escape_radius=1e3, n_out=2000,
              mino: bool = False, record_turnings: bool = False) -> Trajectory:
    """Integrate the reduced BL system with an adaptive embedded
    Runge-Kutta pair (DOP853); terminates on horizon proximity or escape.

    With mino=True the independent variable is Mino time and tau_span is
    interpreted as a Mino-time span.
    """
    if state0.chart != "bl":
        raise ValueError("integrate expects a BL-chart initial state")
    d = params.d
    r_stop = params.r_H + horizon_margin

    rhs = _regular_rhs(params, cs.eps, cs.lz, cs.q, mino)

    def ev_horizon(t, y):
        return y[0] - r_stop
    ev_horizon.terminal = True
    ev_horizon.direction = -1

    def ev_escape(t, y):
        return y[0] - escape_radius
    ev_escape.terminal = True
    ev_escape.direction = 1

    events = [ev_horizon, ev_escape]
    if record_turnings:
        def ev_turn(t, y):
            return y[2]
        ev_turn.terminal = False
        events.append(ev_turn)

    u0 = delta_of_r(state0.x1, d) * state0.v1
    y0 = [state0.x1, state0.x2, u0, state0.v2,
          state0.tau if mino else state0.lam]
    sol = solve_ivp(rhs, (0.0, tau_span), y0, method="DOP853",
                    rtol=rtol, atol=atol, dense_output=True, events=events)

    if sol.status == 1:
        term = (Termination.HORIZON if len(sol.t_events[0])
                else Termination.ESCAPED)
    elif sol.status == 0:
        term = Termination.SPAN
    else:
        term = Termination.STEP_FAILURE

    t_end = sol.t[-1]
    ts = np.linspace(0.0, t_end, n_out)
    ys = sol.sol(ts)
    r, th, u, vth, aux = ys
    vr = u / delta_of_r(r, d)

    qs = np.empty(n_out)
    Hs = np.empty(n_out)
    for i in range(n_out):
        qs[i], Hs[i] = conserved_from_state(params, r[i], th[i], vr[i], vth[i],
                                            cs.eps, cs.lz)
    drift_q = float(np.max(np.abs(qs - cs.q)))
    drift_H = float(np.max(np.abs(Hs + 0.5)))

    if mino:
        lam = ts
        tau = aux
    else:
        tau = ts
        lam = aux
    turnings = sol.t_events[2] if record_turnings else np.array([])
    return Trajectory(params=params, cs=cs, tau=tau, r=r, theta=th,
                      v_r=vr, v_theta=vth, lam=lam, termination=term,
                      drift_q=drift_q, drift_H=drift_H,
                      radial_turnings=np.asarray(turnings))


def integrate_weyl(params: KerrParams, cs: ConservedSet, state0: PhaseState,
                   tau_span: float, rtol=1e-10, atol=1e-12, n_out=2000):
    """Integrate the Weyl-chart system (cross-chart consistency checks)."""
    if state0.chart != "weyl":
        state0 = bl_state_to_weyl(params, state0)
    rhs = weyl_rhs(params, cs.eps, cs.lz)
    sol = solve_ivp(rhs, (0.0, tau_span),
                    [state0.x1, state0.x2, state0.v1, state0.v2],
                    method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    return sol


# ---------------------------------------------------------------------------
# Periods
# ---------------------------------------------------------------------------

def _gauss_sqrt_interval(f_over_sqrtw, a, b, w_at_a, w_at_b, n):
    """Integrate dx / sqrt((x - a)(b - x) g(x)) with the cosine
    substitution x = mid - half cos(u); the caller supplies
    g(x) = W(x) / ((x - a)(b - x)) with endpoint limits."""
    nodes, weights = leggauss(n)
    u = 0.5 * np.pi * (nodes + 1.0)
    x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(u)
    g = f_over_sqrtw(x, a, b, w_at_a, w_at_b)
    return 0.5 * np.pi * float(np.sum(weights * g))


def periods(params: KerrParams, cs: ConservedSet, n: int = 96) -> OrbitPeriods:
    """Mino-time radial and angular periods of a trapped orbit by
    singularity-absorbing quadrature at the simple turning points."""
    d = params.d
    eps, lz, q = cs.eps, cs.lz, cs.q
    rs = radial_roots(eps, lz, q, d)
    if rs.count < 3 or 2 in rs.multiplicities or 3 in rs.multiplicities:
        raise ValueError("marginal orbit, period diverges (no simple "
                         "bounded radial interval)")
    r1, r2 = rs.roots[-2], rs.roots[-1]

    def g_radial(x, a, b, ga, gb):
        out = np.empty_like(x)
        inner = (x > a) & (x < b)
        R = radial_poly(x[inner], eps, lz, q, d)
        out[inner] = 1.0 / np.sqrt(R / ((x[inner] - a) * (b - x[inner])))
        out[~inner] = 1.0 / np.sqrt(np.where(x[~inner] <= a, ga, gb))
        return out

    gA = radial_poly_deriv(r1, eps, lz, q, d) / (r2 - r1)
    gB = -radial_poly_deriv(r2, eps, lz, q, d) / (r2 - r1)
    T_r = _gauss_sqrt_interval(g_radial, r1, r2, gA, gB, n)
    T_r2 = _gauss_sqrt_interval(g_radial, r1, r2, gA, gB, 2 * n)
    # theta period: substitute Y = cos(theta); T(Y) > 0 on (-Y0, Y0)
    ys = angular_roots(eps, lz, q, d)
    if not ys or ys[0] <= 0.0:
        raise ValueError("no angular oscillation (equatorial orbit)")
    Y0 = np.sqrt(ys[0])
    A = d * d * (1.0 - eps * eps)
    b_coef = q + A + lz * lz

    def g_angular(x, a, b, ga, gb):
        out = np.empty_like(x)
        inner = (x > a) & (x < b)
        T = angular_poly(x[inner], eps, lz, q, d)
        out[inner] = 1.0 / np.sqrt(T / ((x[inner] - a) * (b - x[inner])))
        out[~inner] = 1.0 / np.sqrt(np.where(x[~inner] <= a, ga, gb))
        return out

    # dT/dY at the turning points over the linear factors
    dT_Y0 = -2.0 * b_coef * Y0 + 4.0 * A * Y0**3
    gA_t = dT_Y0 / (-2.0 * Y0)  # limit of T / ((Y + Y0)(Y0 - Y)) at -Y0, +Y0
    T_th = 2.0 * _gauss_sqrt_interval(g_angular, -Y0, Y0, gA_t, gA_t, n)
    T_th2 = 2.0 * _gauss_sqrt_interval(g_angular, -Y0, Y0, gA_t, gA_t, 2 * n)
    return OrbitPeriods(T_r=T_r2, T_theta=T_th2,
                        err_r=abs(T_r2 - T_r), err_theta=abs(T_th2 - T_th))


def measured_periods(params: KerrParams, cs: ConservedSet, r0, theta0,
                     n_periods: float = 6.0):
    """Measure the Mino-time periods from an integrated trajectory via
    turning-point events (the integrator oracle for the quadrature)."""
    quad = periods(params, cs)
    span = n_periods * max(quad.T_r, quad.T_theta)
    state = state_from_constants(params, cs, r0, theta0, 1.0, 1.0)
    rhs = mino_rhs(params, cs.eps, cs.lz, cs.q)

    def ev_vr(t, y):
        return y[2]
    ev_vr.terminal = False

    def ev_vth(t, y):
        return y[3]
    ev_vth.terminal = False

    sol = solve_ivp(rhs, (0.0, span),
                    [state.x1, state.x2, state.v1, state.v2, 0.0],
                    method="DOP853", rtol=1e-11, atol=1e-13,
                    events=[ev_vr, ev_vth])
    t_r = sol.t_events[0]
    t_th = sol.t_events[1]
    if len(t_r) < 2 or len(t_th) < 3:
        raise RuntimeError("not enough turning points recorded")
    # one-way travel time between consecutive radial turning points
    # (matching the quadrature integral r1 -> r2); the full angular
    # period spans two consecutive theta turnings
    T_r = float(np.mean(np.diff(t_r)))
    T_th = float(np.mean(np.diff(t_th[::2]))) if len(t_th) >= 4 \
        else float(t_th[2] - t_th[0])
    return T_r, T_th


# ---------------------------------------------------------------------------
# Fate oracle
# ---------------------------------------------------------------------------

def fate(traj: Trajectory, r_bounds=None, n_min_oscillations: int = 3) -> OrbitClass:
    """Numerical fate of a terminated trajectory: Plunging on horizon
    capture, Scattered on escape, Trapped when the full span stayed in a
    bounded radial interval with enough radial oscillations."""
    if traj.termination is Termination.HORIZON:
        return OrbitClass.PLUNGING
    if traj.termination is Termination.ESCAPED:
        return OrbitClass.SCATTERED
    if traj.termination is not Termination.SPAN:
        return OrbitClass.INDETERMINATE
    sign_changes = np.sum(np.abs(np.diff(np.sign(traj.v_r))) > 1)
    oscillations = sign_changes // 2
    if r_bounds is not None:
        lo, hi = r_bounds
        margin = 1e-6 * max(1.0, hi)
        if np.min(traj.r) < lo - margin or np.max(traj.r) > hi + margin:
            return OrbitClass.INDETERMINATE
    if oscillations >= n_min_oscillations:
        return OrbitClass.TRAPPED
    return OrbitClass.INDETERMINATE
