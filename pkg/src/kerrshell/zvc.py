"""Effective potential on the Weyl half-plane, zero-velocity curves,
critical points, the trapped domain and its stability under small
stationary axisymmetric metric perturbations.

A zero-velocity curve (ZVC) is the eps-level set of the effective
potential E_lz; its compact component bounds trapped motion.  Kerr
curves are built from the closed-form chart atlas (theta-parametrized
radial roots and r-parametrized polar angles); perturbed curves are
continued from the Kerr graphs with damped Newton iteration, region by
region.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .config import DEFAULT_TOL, DEFAULT_FRACTIONS
from .geometry import (KerrParams, WeylPoint, BLPoint, ChartBoundaryError,
                       bl_to_weyl, weyl_to_bl, metric_bl, delta_of_r,
                       kerr_fields_weyl)
from . import orbits
from .orbits import (ParameterRegion, classify_region, radial_roots,
                     carter_of_theta, carter_of_radius, angular_roots,
                     radial_poly, spherical_solve, isco, isco_radius,
                     ell_lb, ell_ub, r_max_of_lz, r_min_of_lz, rho_mb)


class ZVCNoConvergence(RuntimeError):
    """Newton continuation failed inside the perturbation ball."""


class ComponentTag(enum.Enum):
    TRAPPED = "trapped"
    ABSORBED = "absorbed"
    SCATTERED = "scattered"
    SELF_INTERSECTING = "self-intersecting"
    OFF_EQUATOR_PAIR = "off-equator-pair"


@dataclass(frozen=True)
class ZVCComponent:
    tag: ComponentTag
    vertices: np.ndarray  # (N, 2) array of (rho, z)

    @property
    def closed(self) -> bool:
        v = self.vertices
        return bool(np.hypot(*(v[0] - v[-1])) <= 1e-9 * max(1.0, np.max(np.abs(v))))

    def equatorial_crossings(self):
        """rho values where the polyline crosses z = 0 (exact vertices)."""
        v = self.vertices
        on_eq = np.abs(v[:, 1]) <= 1e-12 * max(1.0, float(np.max(np.abs(v))))
        return np.unique(np.round(v[on_eq, 0], 12))


@dataclass(frozen=True)
class ZeroVelocityCurve:
    eps: float
    lz: float
    components: tuple[ZVCComponent, ...]
    vertex_tol: float = DEFAULT_TOL.vertex

    @property
    def trapped(self) -> ZVCComponent | None:
        for c in self.components:
            if c.tag is ComponentTag.TRAPPED:
                return c
        return None

    def topology(self) -> dict:
        return {
            "energy": self.eps,
            "angular_momentum": self.lz,
            "n_components": len(self.components),
            "tags": [c.tag.value for c in self.components],
            "trapped": any(c.tag is ComponentTag.TRAPPED for c in self.components),
            "closed": [c.closed for c in self.components],
        }

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write("# zero-velocity curve polylines\n")
            f.write(f"# energy={self.eps!r} angular_momentum={self.lz!r}\n")
            f.write("component_id,tag,rho,z\n")
            for i, c in enumerate(self.components):
                for rho, z in c.vertices:
                    f.write(f"{i},{c.tag.value},{rho!r},{z!r}\n")

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump(self.topology(), f, indent=2)


# ---------------------------------------------------------------------------
# Metric perturbations (renormalized fields Theta0, sigma0, X0)
# ---------------------------------------------------------------------------

def _zero_field(rho, z):
    return np.zeros_like(np.asarray(rho, dtype=float) + np.asarray(z, dtype=float))


@dataclass(frozen=True)
class MetricPerturbation:
    """Smooth renormalized fields h = (Theta0, sigma0, X0) with first
    derivatives, supplied as callables of (rho, z) vectorized over numpy
    arrays.  The zero perturbation reproduces Kerr exactly."""

    theta0: callable = _zero_field
    dtheta0_drho: callable = _zero_field
    dtheta0_dz: callable = _zero_field
    sigma0: callable = _zero_field
    dsigma0_drho: callable = _zero_field
    dsigma0_dz: callable = _zero_field
    x0: callable = _zero_field
    dx0_drho: callable = _zero_field
    dx0_dz: callable = _zero_field

    @staticmethod
    def zero() -> "MetricPerturbation":
        return MetricPerturbation()

    @staticmethod
    def gaussian_bump(field: str, amplitude: float, center, width) -> "MetricPerturbation":
        """Gaussian bump c * exp(-((rho-rho0)/w1)^2 - ((z-z0)/w2)^2) in one
        of the three fields ('theta0' | 'sigma0' | 'x0')."""
        rho0, z0 = center
        w1, w2 = width

        def val(rho, z):
            rho = np.asarray(rho, dtype=float)
            z = np.asarray(z, dtype=float)
            return amplitude * np.exp(-((rho - rho0) / w1) ** 2
                                      - ((z - z0) / w2) ** 2)

        def d_rho(rho, z):
            return val(rho, z) * (-2.0 * (np.asarray(rho, float) - rho0) / w1**2)

        def d_z(rho, z):
            return val(rho, z) * (-2.0 * (np.asarray(z, float) - z0) / w2**2)

        kw = {}
        if field == "theta0":
            kw = dict(theta0=val, dtheta0_drho=d_rho, dtheta0_dz=d_z)
        elif field == "sigma0":
            kw = dict(sigma0=val, dsigma0_drho=d_rho, dsigma0_dz=d_z)
        elif field == "x0":
            kw = dict(x0=val, dx0_drho=d_rho, dx0_dz=d_z)
        else:
            raise ValueError(f"unknown perturbation field {field!r}")
        return MetricPerturbation(**kw)

    def sup_norm(self, box, n: int = 64) -> float:
        """Sampled sup of the field values and first derivatives over the
        declared box ((rho_min, rho_max), (z_min, z_max))."""
        (r0, r1), (z0, z1) = box
        rho = np.linspace(r0, r1, n)
        z = np.linspace(z0, z1, n)
        R, Z = np.meshgrid(rho, z, indexing="ij")
        fns = [self.theta0, self.dtheta0_drho, self.dtheta0_dz,
               self.sigma0, self.dsigma0_drho, self.dsigma0_dz,
               self.x0, self.dx0_drho, self.dx0_dz]
        return float(max(np.max(np.abs(f(R, Z))) for f in fns))

    def validate_positivity(self, box, n: int = 64):
        (r0, r1), (z0, z1) = box
        rho = np.linspace(r0, r1, n)
        z = np.linspace(z0, z1, n)
        R, Z = np.meshgrid(rho, z, indexing="ij")
        if np.any(1.0 + self.x0(R, Z) <= 0) or np.any(1.0 + self.sigma0(R, Z) <= 0):
            raise ValueError("perturbation violates 1 + X0 > 0 or 1 + sigma0 > 0")


# ---------------------------------------------------------------------------
# Effective potential
# ---------------------------------------------------------------------------

def effective_potential(params: KerrParams, lz, rho, z,
                        h: MetricPerturbation | None = None):
    """E_lz at interior Weyl points; with h present, the perturbed form in
    terms of the renormalized unknowns.  lz and lengths in M = 1 units."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(rho <= 0):
        raise ChartBoundaryError("effective potential: rho <= 0")
    rt, theta = weyl_to_bl(params, WeylPoint(rho * params.M, z * params.M))
    rt = np.asarray(rt, float) / params.M
    d = params.d
    _, W, X, _ = metric_bl(rt, theta, d)
    omega = -W / X
    if h is None:
        return omega * lz + rho * np.sqrt(lz * lz + X) / X
    th0 = h.theta0(rho, z)
    s0 = h.sigma0(rho, z)
    x0 = h.x0(rho, z)
    Xp = X * (1.0 + x0)
    return (-th0 * lz + omega * lz
            + rho * (1.0 + s0) * np.sqrt(lz * lz + Xp) / Xp)


def effective_potential_grad(params: KerrParams, lz, rho, z,
                             h: MetricPerturbation | None = None):
    """(dE/drho, dE/dz) by analytic differentiation (Kerr background) plus
    the supplied derivative callables of h."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    bg = kerr_fields_weyl(params, rho * params.M, z * params.M)
    X, dX_r, dX_z = bg["X"], bg["dX_drho"], bg["dX_dz"]
    dw_r, dw_z = bg["domega_drho"], bg["domega_dz"]
    if h is None:
        s0 = x0 = 0.0
        ds0_r = ds0_z = dx0_r = dx0_z = 0.0
        dth_r = dth_z = 0.0
    else:
        s0 = h.sigma0(rho, z)
        x0 = h.x0(rho, z)
        ds0_r, ds0_z = h.dsigma0_drho(rho, z), h.dsigma0_dz(rho, z)
        dx0_r, dx0_z = h.dx0_drho(rho, z), h.dx0_dz(rho, z)
        dth_r, dth_z = h.dtheta0_drho(rho, z), h.dtheta0_dz(rho, z)
    Xp = X * (1.0 + x0)
    dXp_r = dX_r * (1.0 + x0) + X * dx0_r
    dXp_z = dX_z * (1.0 + x0) + X * dx0_z
    g = np.sqrt(lz * lz + Xp)
    Q = rho * (1.0 + s0) / Xp
    dQ_r = ((1.0 + s0) + rho * ds0_r) / Xp - rho * (1.0 + s0) * dXp_r / Xp**2
    dQ_z = rho * ds0_z / Xp - rho * (1.0 + s0) * dXp_z / Xp**2
    dE_r = lz * (dw_r - dth_r) + dQ_r * g + Q * dXp_r / (2.0 * g)
    dE_z = lz * (dw_z - dth_z) + dQ_z * g + Q * dXp_z / (2.0 * g)
    return dE_r, dE_z


def turning_point_residual(params: KerrParams, eps, lz, rho, z,
                           h: MetricPerturbation | None = None):
    """J(rho, z; eps, lz) whose zero set is the ZVC: positive inside the
    allowed region, J = 0 iff E_lz = eps for future-directed data."""
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    rt, theta = weyl_to_bl(params, WeylPoint(rho * params.M, z * params.M))
    rt = np.asarray(rt, float) / params.M
    V, W, X, _ = metric_bl(rt, theta, params.d)
    if h is not None:
        # perturbed data: W/X -> W_K/X_K + Theta0, X -> X_K (1 + X0),
        # sigma -> rho (1 + sigma0); V recovered from sigma^2 = X V + W^2
        w_over_x = W / X + h.theta0(rho, z)
        X = X * (1.0 + h.x0(rho, z))
        W = w_over_x * X
        sig2 = (rho * (1.0 + h.sigma0(rho, z))) ** 2
        V = (sig2 - W * W) / X
    else:
        sig2 = rho**2
    return -1.0 + (X * eps**2 + 2.0 * W * eps * lz - V * lz**2) / sig2


# ---------------------------------------------------------------------------
# Kerr curve tracing (chart atlas)
# ---------------------------------------------------------------------------

def _theta_grid(theta_lo, theta_hi, n):
    """Cosine-clustered nodes on [theta_lo, theta_hi] (dense at both ends,
    where the curve caps flatten)."""
    u = np.linspace(0.0, 1.0, n)
    return theta_lo + (theta_hi - theta_lo) * 0.5 * (1.0 - np.cos(np.pi * u))


def _root_in(eps, lz, q, d, lo, hi):
    """Root of R(., q) bracketed in [lo, hi] (signs guaranteed by caller)."""
    f = lambda r: radial_poly(r, eps, lz, q, d)
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise ValueError("root bracket lost")
    return brentq(f, lo, hi, xtol=1e-14, rtol=8.9e-16)


def _to_weyl_vertices(params, r_arr, theta_arr):
    r_arr = np.asarray(r_arr, dtype=float)
    theta_arr = np.asarray(theta_arr, dtype=float)
    D = delta_of_r(r_arr, params.d)
    rho = np.sqrt(np.maximum(D, 0.0)) * np.sin(theta_arr)
    z = (r_arr - 1.0) * np.cos(theta_arr)
    return np.column_stack([rho, z])


def _trace_trapped_kerr(params, eps, lz, n):
    """Closed trapped component for (eps, lz) in the bound region."""
    d = params.d
    rs0 = radial_roots(eps, lz, 0.0, d)
    if rs0.count < 3:
        raise ValueError("no trapped component: fewer than three equatorial roots")
    r0K, r1K, r2K = rs0.roots[-3], rs0.roots[-2], rs0.roots[-1]
    sol = [s for s in spherical_solve(eps, lz, d) if s.r_s > r0K * (1.0 + 1e-12)]
    if not sol:
        raise ValueError("no trapped component: double-root level not found")
    r_top, q_top = orbits.polish_double_root(eps, lz, sol[0].r_s, sol[0].q, d)
    ys = angular_roots(eps, lz, q_top, d)
    theta_cap = float(np.arccos(np.sqrt(ys[0]))) if ys else np.pi / 2
    thetas = _theta_grid(theta_cap, np.pi - theta_cap, n | 1)

    inner, outer = [], []
    for th in thetas:
        q = carter_of_theta(th, eps, lz, d)
        if q <= 1e-14:
            inner.append(r1K)
            outer.append(r2K)
        elif q >= q_top - 1e-12:
            inner.append(r_top)
            outer.append(r_top)
        else:
            lo_in = r1K - 1e-11 * max(1.0, r1K)
            hi_out = r2K + 1e-11 * max(1.0, r2K)
            inner.append(_root_in(eps, lz, q, d, lo_in, r_top))
            outer.append(_root_in(eps, lz, q, d, r_top, hi_out))
    # walk: north cap -> outer arc southwards -> south cap -> inner arc back
    r_path = np.concatenate([outer, inner[::-1], [outer[0]]])
    t_path = np.concatenate([thetas, thetas[::-1], [thetas[0]]])
    return ZVCComponent(ComponentTag.TRAPPED,
                        _to_weyl_vertices(params, r_path, t_path))


def _trace_absorbed_kerr(params, eps, lz, n, theta_cut=1e-3):
    """Open absorbed component; handles the folded three-root shape when
    a spherical double-root pair exists below the circular curve."""
    d = params.d
    rs0 = radial_roots(eps, lz, 0.0, d)
    r0K = rs0.roots[0]
    r_H = params.r_H
    folds = []
    if eps < 1.0 and d != 0.0:
        try:
            folds = [s for s in spherical_solve(eps, lz, d)
                     if s.r_s < r0K and s.q > 0.0]
        except ValueError:
            folds = []
    if len(folds) < 2:
        # simple graph over theta
        thetas = _theta_grid(theta_cut, np.pi - theta_cut, n | 1)
        rr = []
        for th in thetas:
            q = carter_of_theta(th, eps, lz, d)
            if q <= 1e-14:
                rr.append(r0K)
            else:
                rr.append(_root_in(eps, lz, q, d, r_H * (1 + 1e-11),
                                   r0K + 1e-11 * max(1.0, r0K)))
        return ZVCComponent(ComponentTag.ABSORBED,
                            _to_weyl_vertices(params, rr, thetas))

    # folded case: three segments per hemisphere glued at the double roots
    folds = sorted(folds, key=lambda s: s.r_s)
    r_s1, q_s1 = orbits.polish_double_root(eps, lz, folds[0].r_s, folds[0].q, d)
    r_s2, q_s2 = orbits.polish_double_root(eps, lz, folds[1].r_s, folds[1].q, d)

    def theta_of_q(q):
        ys = angular_roots(eps, lz, q, d)
        return float(np.arccos(np.sqrt(ys[0])))

    th1, th2 = theta_of_q(q_s1), theta_of_q(q_s2)

    def half(north=True):
        seg = []
        # outermost branch: theta from pi/2 to th2, roots in [r_s2, r0K]
        for th in _theta_grid(np.pi / 2, th2, n // 3 | 1):
            q = carter_of_theta(th, eps, lz, d)
            if q <= 1e-14:
                seg.append((r0K, th))
            elif q >= q_s2 - 1e-12:
                seg.append((r_s2, th))
            else:
                seg.append((_root_in(eps, lz, q, d, r_s2,
                                     r0K + 1e-11 * max(1.0, r0K)), th))
        # fold branch: theta from th2 back up to th1, roots in [r_s1, r_s2]
        for th in _theta_grid(th2, th1, n // 3 | 1)[1:]:
            q = carter_of_theta(th, eps, lz, d)
            if q >= q_s2 - 1e-12:
                seg.append((r_s2, th))
            elif q <= q_s1 + 1e-12:
                seg.append((r_s1, th))
            else:
                seg.append((_root_in(eps, lz, q, d, r_s1, r_s2), th))
        # innermost branch: theta from th1 down to the cut, roots near r_H
        for th in _theta_grid(th1, theta_cut, n // 3 | 1)[1:]:
            q = carter_of_theta(th, eps, lz, d)
            if q <= q_s1 + 1e-12:
                seg.append((r_s1, th))
            else:
                seg.append((_root_in(eps, lz, q, d, r_H * (1 + 1e-11), r_s1), th))
        if not north:
            seg = [(r, np.pi - th) for r, th in seg]
        return seg

    south = half(north=False)
    north = half(north=True)
    path = south[::-1] + north[1:]
    rr = [p[0] for p in path]
    tt = [p[1] for p in path]
    return ZVCComponent(ComponentTag.ABSORBED,
                        _to_weyl_vertices(params, rr, tt))


def _trace_scattered_kerr(params, eps, lz, n, r_clip=60.0):
    """Unbounded outer component for scattered families (eps >= 1)."""
    d = params.d
    rs0 = radial_roots(eps, lz, 0.0, d)
    r1K = rs0.roots[-1]
    q_clip = float(carter_of_radius(r_clip, eps, lz, d))
    ys = angular_roots(eps, lz, q_clip, d)
    theta_cut = float(np.arccos(np.sqrt(ys[0]))) if ys else 1e-3
    thetas = _theta_grid(theta_cut, np.pi - theta_cut, n | 1)
    rr = []
    for th in thetas:
        q = min(carter_of_theta(th, eps, lz, d), q_clip)
        rr.append(_root_in(eps, lz, q, d, r1K * (1 - 1e-13), r_clip * (1 + 1e-12)))
    return ZVCComponent(ComponentTag.SCATTERED,
                        _to_weyl_vertices(params, rr, thetas))


def _trace_off_equator_kerr(params, eps, lz, n, r_clip=60.0):
    """The two mirror components that never reach the equator
    (eps > 1 with lz between the critical curves)."""
    d = params.d
    r_H = params.r_H
    rr = np.linspace(r_H * (1 + 1e-8), r_clip, n)
    comps = []
    for sgn in (+1.0, -1.0):
        pts_r, pts_t = [], []
        for r in rr:
            q = float(carter_of_radius(r, eps, lz, d))
            if q < 0.0:
                continue
            ys = angular_roots(eps, lz, q, d)
            if not ys:
                continue
            th = float(np.arccos(np.sqrt(ys[0])))
            pts_r.append(r)
            pts_t.append(th if sgn > 0 else np.pi - th)
        comps.append(ZVCComponent(ComponentTag.OFF_EQUATOR_PAIR,
                                  _to_weyl_vertices(params, pts_r, pts_t)))
    return comps


def trace_zvc(params: KerrParams, eps, lz, h: MetricPerturbation | None = None,
              n: int = 201, tol=DEFAULT_TOL, newton_ball: float | None = None
              ) -> ZeroVelocityCurve:
    """Trace the ZVC of (eps, lz); component count and tags follow the
    shape case tree of the zero-velocity-curve classification.

    With a perturbation h the Kerr graphs are continued by damped Newton
    region by region; (eps, lz) must then lie in the bound region and
    the Newton iteration is confined to a ball of radius newton_ball.
    """
    d = params.d
    region = classify_region(eps, lz, params, tol=tol)
    if region is ParameterRegion.INADMISSIBLE:
        raise ValueError("(eps, lz) not admissible for future-directed motion")

    comps: list[ZVCComponent] = []
    if region in (ParameterRegion.A_BOUND_PLUS, ParameterRegion.A_BOUND_MINUS):
        comps.append(_trace_absorbed_kerr(params, eps, lz, n))
        comps.append(_trace_trapped_kerr(params, eps, lz, n))
    elif region in (ParameterRegion.A_SCATTERED_PLUS,
                    ParameterRegion.A_SCATTERED_MINUS):
        comps.append(_trace_absorbed_kerr(params, eps, lz, n))
        comps.append(_trace_scattered_kerr(params, eps, lz, n))
    elif region is ParameterRegion.A_ABS_BOUND:
        comps.append(_trace_absorbed_kerr(params, eps, lz, n))
    elif region is ParameterRegion.A_ABS_UNBOUND:
        comps.extend(_trace_off_equator_kerr(params, eps, lz, n))
    else:
        # boundary of the partition: critical families
        branch = "+" if d * lz >= 0 else "-"
        _, eps_min, _ = isco(branch, abs(d) if d else 0.0)
        if abs(eps - eps_min) <= 10 * tol.region_boundary:
            comps.append(_trace_absorbed_kerr(params, eps, lz, n))
        else:
            comp = _trace_absorbed_kerr(params, eps, lz, n)
            comps.append(ZVCComponent(ComponentTag.SELF_INTERSECTING,
                                      comp.vertices))

    if h is not None:
        if region not in (ParameterRegion.A_BOUND_PLUS,
                          ParameterRegion.A_BOUND_MINUS):
            raise ValueError("perturbed tracing requires (eps, lz) in the "
                             "bound region")
        comps = [_continue_component(params, eps, lz, c, h, tol, newton_ball)
                 for c in comps]
    return ZeroVelocityCurve(eps=float(eps), lz=float(lz),
                             components=tuple(comps), vertex_tol=tol.vertex)


# ---------------------------------------------------------------------------
# Perturbed curves: damped Newton continuation from the Kerr graphs
# ---------------------------------------------------------------------------

def _newton_1d(fun, dfun, x0, ball, damping=1.0, maxit=60, ftol=1e-13,
               xtol=1e-12):
    """Damped scalar Newton confined to |x - x0| <= ball; steps are
    clamped at ball/2.  Stops on |f| < ftol or a sub-xtol step (the
    residual floor near the horizon rod sits above ftol).  Raises
    ZVCNoConvergence on failure (never extrapolates silently)."""
    x = x0
    clamp = 0.5 * ball
    for _ in range(maxit):
        f = fun(x)
        if abs(f) < ftol:
            return x
        df = dfun(x)
        if df == 0.0:
            raise ZVCNoConvergence("no convergence: singular Newton step")
        step = -damping * f / df
        step = np.clip(step, -clamp, clamp)
        x_new = x + step
        if abs(x_new - x0) > ball:
            raise ZVCNoConvergence("no convergence: left the perturbation ball")
        if abs(step) < xtol * max(1.0, abs(x0)):
            return x_new
        x = x_new
    raise ZVCNoConvergence("no convergence: iteration budget exhausted")


def _continue_component(params, eps, lz, comp: ZVCComponent,
                        h: MetricPerturbation, tol, newton_ball,
                        fractions=DEFAULT_FRACTIONS):
    """Continue each Kerr vertex to the perturbed curve.  Vertices in the
    polar-cap regions are solved in z at fixed rho; flank vertices in
    rho at fixed z (the five-region decomposition of the half-plane)."""
    v = comp.vertices
    z_max = float(np.max(np.abs(v[:, 1]))) if len(v) else 0.0
    if newton_ball is None:
        span = max(np.ptp(v[:, 0]), np.ptp(np.abs(v[:, 1])), 1e-3)
        newton_ball = 0.5 * span
    z_split = fractions.middle * z_max if comp.tag is ComponentTag.TRAPPED else np.inf

    out = np.empty_like(v)
    for i, (rho0, z0) in enumerate(v):
        if abs(z0) >= z_split and comp.tag is ComponentTag.TRAPPED:
            # cap region: z as a graph over rho
            fun = lambda zz: float(effective_potential(params, lz, rho0, zz, h) - eps)
            dfun = lambda zz: float(effective_potential_grad(params, lz, rho0, zz, h)[1])
            out[i] = (rho0, _newton_1d(fun, dfun, z0, newton_ball))
        else:
            fun = lambda rr: float(effective_potential(params, lz, rr, z0, h) - eps)
            dfun = lambda rr: float(effective_potential_grad(params, lz, rr, z0, h)[0])
            out[i] = (_newton_1d(fun, dfun, rho0, newton_ball), z0)
    return ZVCComponent(comp.tag, out)


# ---------------------------------------------------------------------------
# Critical points of the effective potential
# ---------------------------------------------------------------------------

def critical_points(params: KerrParams, lz, tol=DEFAULT_TOL):
    """Equatorial critical points of E_lz: a saddle at the unstable
    circular radius and a minimum at the stable one.  Empty when |lz| is
    below the ISCO angular momentum of its branch."""
    d = params.d
    eps_, lz_, d_ = orbits._normalize_family(1.0, lz, d)
    branch = "+" if d_ * lz_ > 0 or d_ == 0.0 or lz_ == 0.0 else "-"
    sgn = 1.0 if branch == "+" else -1.0
    _, _, ell_min = isco(branch, d_)
    if sgn * lz_ < sgn * ell_min:
        return []
    r_sad = r_max_of_lz(lz_, branch, d_)
    r_min_ = r_min_of_lz(lz_, branch, d_)
    out = [(float(np.sqrt(delta_of_r(r_sad, d_))), 0.0, "saddle"),
           (float(np.sqrt(delta_of_r(r_min_, d_))), 0.0, "minimum")]
    return out


# ---------------------------------------------------------------------------
# Shell geometry over a parameter box
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BBound:
    """Product rectangle(s) [eps1, eps2] x [l1, l2] inside the bound
    region, one per branch (either may be None)."""

    plus: tuple[float, float, float, float] | None = None
    minus: tuple[float, float, float, float] | None = None

    def rectangles(self):
        out = []
        if self.plus is not None:
            out.append(("+", *self.plus))
        if self.minus is not None:
            out.append(("-", *self.minus))
        return out

    def contains(self, eps, lz) -> bool:
        for _, e1, e2, l1, l2 in self.rectangles():
            if e1 <= eps <= e2 and l1 <= lz <= l2:
                return True
        return False


@dataclass(frozen=True)
class ShellBox:
    """Bounding box of the trapped region over a parameter rectangle,
    with the shell separation eta and the marginally bound floors."""

    rho_min: float
    rho_max: float
    z_min: float
    z_max: float
    eta: float
    rho_mb_plus: float
    rho_mb_minus: float

    def inflate(self, margin):
        return ShellBox(self.rho_min - margin, self.rho_max + margin,
                        self.z_min - margin, self.z_max + margin,
                        self.eta, self.rho_mb_plus, self.rho_mb_minus)

    def contains(self, rho, z) -> bool:
        return bool((self.rho_min <= rho <= self.rho_max)
                    and (self.z_min <= z <= self.z_max))


def validate_bbound(params: KerrParams, bbound: BBound, tol=DEFAULT_TOL):
    """Check that every rectangle lies strictly inside the bound region
    (the monotone critical curves make corner checks sufficient)."""
    d = params.d
    for branch, e1, e2, l1, l2 in bbound.rectangles():
        sgn = 1.0 if branch == "+" else -1.0
        _, eps_min, _ = isco(branch, d)
        if not (eps_min < e1 < e2 < 1.0):
            raise ValueError("rectangle leaks outside the bound region in energy")
        lo = ell_lb(e2, branch, d)
        hi = ell_ub(e1, branch, d)
        if not (sgn * lo < sgn * l1 and sgn * l2 < sgn * hi):
            raise ValueError("rectangle leaks outside the bound region in "
                             "angular momentum")


def equatorial_shell_radii(params: KerrParams, eps, lz,
                           h: MetricPerturbation | None = None):
    """(rho_0, rho_1, rho_2): the three equatorial ZVC radii (absorbed
    barrier and trapped interval).  For h != 0 each Kerr radius is
    continued by Newton in rho."""
    d = params.d
    rs = radial_roots(eps, lz, 0.0, d)
    if rs.count < 3:
        raise ValueError("(eps, lz) does not bound a trapped interval")
    rhoK = [float(np.sqrt(delta_of_r(r, d))) for r in rs.roots[-3:]]
    if h is None:
        return tuple(rhoK)
    out = []
    gap = 0.5 * (rhoK[1] - rhoK[0])
    for rho0 in rhoK:
        fun = lambda rr: float(effective_potential(params, lz, rr, 0.0, h) - eps)
        dfun = lambda rr: float(effective_potential_grad(params, lz, rr, 0.0, h)[0])
        out.append(_newton_1d(fun, dfun, rho0, gap))
    return tuple(out)


def shell_support(params: KerrParams, bbound: BBound,
                  h: MetricPerturbation | None = None,
                  n_grid: int = 9, n_trace: int = 101,
                  tol=DEFAULT_TOL) -> ShellBox:
    """Extrema of the trapped-component box over the parameter
    rectangle(s), the shell separation eta, and the marginally bound
    floors; verifies rho_min above the floor of its branch."""
    validate_bbound(params, bbound, tol=tol)
    d = params.d
    rho1_min, rho2_max, z_abs_max = np.inf, -np.inf, 0.0
    gap_min = np.inf
    for branch, e1, e2, l1, l2 in bbound.rectangles():
        for eps in np.linspace(e1, e2, n_grid):
            for lz in np.linspace(l1, l2, n_grid):
                r0, r1, r2 = equatorial_shell_radii(params, eps, lz, h)
                rho1_min = min(rho1_min, r1)
                rho2_max = max(rho2_max, r2)
                gap_min = min(gap_min, r1 - r0)
                if h is None:
                    comp = _trace_trapped_kerr(params, eps, lz, n_trace)
                else:
                    compK = _trace_trapped_kerr(params, eps, lz, n_trace)
                    comp = _continue_component(params, eps, lz, compK, h,
                                               tol, None)
                z_abs_max = max(z_abs_max, float(np.max(np.abs(comp.vertices[:, 1]))))
    eta = 0.5 * gap_min
    box = ShellBox(rho_min=float(rho1_min), rho_max=float(rho2_max),
                   z_min=-float(z_abs_max), z_max=float(z_abs_max),
                   eta=float(eta),
                   rho_mb_plus=rho_mb("+", d), rho_mb_minus=rho_mb("-", d))
    floors = []
    if bbound.plus is not None:
        floors.append(box.rho_mb_plus)
    if bbound.minus is not None:
        floors.append(box.rho_mb_minus)
    if floors and box.rho_min <= max(floors):
        raise ValueError("shell floor violated: rho_min below the marginally "
                         "bound radius")
    return box


def ergo_touch_spin() -> float:
    """Spin d0 at which the direct trapped domain first touches the
    ergoregion: the root of rho_mb_plus(d) = d (closed form 2(sqrt 2 - 1))."""
    return float(brentq(lambda d: rho_mb("+", d) - d, 0.5, 0.99,
                        xtol=1e-14, rtol=8.9e-16))
