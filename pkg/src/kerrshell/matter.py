"""Distribution-function ansatz, momentum-domain geometry, stress-energy
components and the four source terms feeding the reduced field equations.

The distribution function is Phi(eps, lz; delta) * Psi_eta, with Phi
supported on compact parameter rectangles inside the bound region and
Psi_eta a smooth cutoff that removes the plunging part of the allowed
region.  All fluid integrals reduce to 2-D quadratures in (xi, s) =
(energy, angular momentum per radius) over the intersection of the
momentum domain with the support of Phi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .geometry import KerrParams, kerr_fields_weyl
from .zvc import (BBound, MetricPerturbation, equatorial_shell_radii,
                  shell_support, ShellBox)


# ---------------------------------------------------------------------------
# Profile and cutoff
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfilePhi:
    """Ansatz profile Phi(eps, lz; delta) with partial derivatives.

    Vanishes (with its lz-derivative) at delta = 0 and is supported on
    the parameter rectangles of `bbound` for every delta.
    """

    bbound: BBound
    fn: callable
    d_eps: callable
    d_lz: callable
    d_delta: callable

    def __call__(self, eps, lz, delta):
        return self.fn(eps, lz, delta)

    @staticmethod
    def polynomial(bbound: BBound) -> "ProfilePhi":
        """Default test profile: delta times the product of squared
        distances to the rectangle edges, normalized to unit peak."""
        rects = bbound.rectangles()

        def one_rect(eps, lz, rect):
            _, e1, e2, l1, l2 = rect
            C = 256.0 / ((e2 - e1) ** 4 * (l2 - l1) ** 4)
            inside = (eps >= e1) & (eps <= e2) & (lz >= l1) & (lz <= l2)
            v = C * ((e2 - eps) * (eps - e1)) ** 2 * ((l2 - lz) * (lz - l1)) ** 2
            return np.where(inside, v, 0.0)

        def fn(eps, lz, delta):
            eps = np.asarray(eps, dtype=float)
            lz = np.asarray(lz, dtype=float)
            return delta * sum(one_rect(eps, lz, r) for r in rects)

        def d_eps(eps, lz, delta):
            eps = np.asarray(eps, dtype=float)
            lz = np.asarray(lz, dtype=float)
            out = np.zeros(np.broadcast(eps, lz).shape)
            for _, e1, e2, l1, l2 in rects:
                C = 256.0 / ((e2 - e1) ** 4 * (l2 - l1) ** 4)
                inside = (eps >= e1) & (eps <= e2) & (lz >= l1) & (lz <= l2)
                g = 2.0 * (e2 - eps) * (eps - e1) * ((e2 - eps) - (eps - e1))
                out += np.where(inside,
                                delta * C * g * ((l2 - lz) * (lz - l1)) ** 2, 0.0)
            return out

        def d_lz(eps, lz, delta):
            eps = np.asarray(eps, dtype=float)
            lz = np.asarray(lz, dtype=float)
            out = np.zeros(np.broadcast(eps, lz).shape)
            for _, e1, e2, l1, l2 in rects:
                C = 256.0 / ((e2 - e1) ** 4 * (l2 - l1) ** 4)
                inside = (eps >= e1) & (eps <= e2) & (lz >= l1) & (lz <= l2)
                g = 2.0 * (l2 - lz) * (lz - l1) * ((l2 - lz) - (lz - l1))
                out += np.where(inside,
                                delta * C * ((e2 - eps) * (eps - e1)) ** 2 * g, 0.0)
            return out

        def d_delta(eps, lz, delta):
            return fn(eps, lz, 1.0)

        return ProfilePhi(bbound=bbound, fn=fn, d_eps=d_eps, d_lz=d_lz,
                          d_delta=d_delta)


def smoothstep5(t):
    """Quintic smoothstep: 0 at t <= 0, 1 at t >= 1, C^2 at the joints."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


@dataclass(frozen=True)
class CutoffPsi:
    """Smooth ramp Psi_eta(rho, (eps, lz)) = chi_eta(rho - rho1(eps, lz))
    on the bound rectangles, zero outside; chi is exactly 0/1 outside the
    transition band [-eta, 0]."""

    eta: float
    bbound: BBound
    rho1: callable  # (eps, lz) -> inner trapped equatorial radius

    def chi(self, s):
        s = np.asarray(s, dtype=float)
        return smoothstep5((s + self.eta) / self.eta)

    def psi(self, rho, eps, lz):
        eps = np.asarray(eps, dtype=float)
        lz = np.asarray(lz, dtype=float)
        inside = np.zeros(np.broadcast(eps, lz).shape, dtype=bool)
        for _, e1, e2, l1, l2 in self.bbound.rectangles():
            inside |= (eps >= e1) & (eps <= e2) & (lz >= l1) & (lz <= l2)
        val = self.chi(rho - self.rho1(eps, lz))
        return np.where(inside, val, 0.0)


class _Rho1Table:
    """Bilinear table of the inner trapped equatorial radius over the
    parameter rectangles."""

    def __init__(self, params, bbound, h=None, n=13):
        self.rects = []
        for branch, e1, e2, l1, l2 in bbound.rectangles():
            eg = np.linspace(e1, e2, n)
            lg = np.linspace(l1, l2, n)
            tab = np.empty((n, n))
            for i, e in enumerate(eg):
                for j, l in enumerate(lg):
                    tab[i, j] = equatorial_shell_radii(params, e, l, h)[1]
            self.rects.append((eg, lg, tab))

    def __call__(self, eps, lz):
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        lz = np.atleast_1d(np.asarray(lz, dtype=float))
        eps, lz = np.broadcast_arrays(eps, lz)
        out = np.full(eps.shape, np.inf)
        for eg, lg, tab in self.rects:
            ie = np.clip(np.searchsorted(eg, eps) - 1, 0, len(eg) - 2)
            il = np.clip(np.searchsorted(lg, lz) - 1, 0, len(lg) - 2)
            te = np.clip((eps - eg[ie]) / (eg[ie + 1] - eg[ie]), 0.0, 1.0)
            tl = np.clip((lz - lg[il]) / (lg[il + 1] - lg[il]), 0.0, 1.0)
            v = ((1 - te) * (1 - tl) * tab[ie, il]
                 + te * (1 - tl) * tab[ie + 1, il]
                 + (1 - te) * tl * tab[ie, il + 1]
                 + te * tl * tab[ie + 1, il + 1])
            inr = ((eps >= eg[0]) & (eps <= eg[-1])
                   & (lz >= lg[0]) & (lz <= lg[-1]))
            out = np.where(inr, v, out)
        return out


def build_cutoff(params: KerrParams, bbound: BBound,
                 h: MetricPerturbation | None = None,
                 eta: float | None = None, n: int = 13,
                 shell: ShellBox | None = None) -> CutoffPsi:
    """Cutoff with the shell separation eta (computed from the shell
    geometry when not supplied) and a tabulated inner radius."""
    if eta is None:
        if shell is None:
            shell = shell_support(params, bbound, h=h, n_grid=5, n_trace=41)
        eta = shell.eta
    return CutoffPsi(eta=float(eta), bbound=bbound,
                     rho1=_Rho1Table(params, bbound, h=h, n=n))


# ---------------------------------------------------------------------------
# Momentum domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentumDomain:
    """Fibre domain at a point: (E, L) with E >= sigma/sqrt(X) and
    |L| <= L_tilde(E); the direct/retrograde split is by sign(omega L)."""

    sqrtX_over_rho: float
    sigma_over_sqrtX: float
    omega: float

    @property
    def E_min(self) -> float:
        return self.sigma_over_sqrtX

    def L_tilde(self, E):
        E = np.asarray(E, dtype=float)
        arg = (E / self.sigma_over_sqrtX) ** 2 - 1.0
        return self.sqrtX_over_rho * np.sqrt(np.maximum(arg, 0.0))

    def E_tilde(self, L):
        L = np.asarray(L, dtype=float)
        return self.sigma_over_sqrtX * np.sqrt(
            1.0 + (L / self.sqrtX_over_rho) ** 2)


def momentum_domain(params: KerrParams, rho, z,
                    h: MetricPerturbation | None = None) -> MomentumDomain:
    """Momentum domain from the metric data at (rho, z); on the axis the
    smooth extension X = rho^2 X_axis is used."""
    bg = kerr_fields_weyl(params, max(rho, 1e-14), z)
    if rho <= 0.0:
        XA = float(bg["X_axis"])
        s0 = x0 = th0 = 0.0
        if h is not None:
            s0 = float(h.sigma0(0.0, z))
            x0 = float(h.x0(0.0, z))
            th0 = float(h.theta0(0.0, z))
        sqrtX_rho = np.sqrt(XA * (1.0 + x0))
        sig_sqrtX = (1.0 + s0) / np.sqrt(XA * (1.0 + x0))
        omega = float(bg["omega"]) - th0
        return MomentumDomain(sqrtX_rho, sig_sqrtX, omega)
    X = float(bg["X"])
    s0 = x0 = th0 = 0.0
    if h is not None:
        s0 = float(h.sigma0(rho, z))
        x0 = float(h.x0(rho, z))
        th0 = float(h.theta0(rho, z))
    Xp = X * (1.0 + x0)
    sigma = rho * (1.0 + s0)
    return MomentumDomain(np.sqrt(Xp) / rho, sigma / np.sqrt(Xp),
                          float(bg["omega"]) - th0)


# ---------------------------------------------------------------------------
# Support intersection and quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _PointData:
    rho: float
    z: float
    X: float
    sigma: float
    omega: float
    e2lam: float

    def L_tilde_sq(self, E):
        return (self.X / self.rho**2) * (self.X * E * E / self.sigma**2 - 1.0)


def _point_data(params, rho, z, h=None, lam0=0.0) -> _PointData:
    bg = kerr_fields_weyl(params, rho, z)
    X = float(bg["X"])
    om = float(bg["omega"])
    e2lam = float(bg["e2lam"])
    if h is not None:
        X *= 1.0 + float(h.x0(rho, z))
        om -= float(h.theta0(rho, z))
        sigma = rho * (1.0 + float(h.sigma0(rho, z)))
    else:
        sigma = rho
    return _PointData(rho=rho, z=z, X=X, sigma=sigma, omega=om,
                      e2lam=e2lam * np.exp(2.0 * lam0))


def support_intersection(params: KerrParams, rho, z, profile: ProfilePhi,
                         h: MetricPerturbation | None = None):
    """Bounds of the (xi, s) integration for each branch rectangle:
    a list of (s_lo, s_hi, xi_lo(s) callable, xi_hi).  Empty at rho = 0
    and wherever the momentum domain misses the profile support."""
    if rho <= 0.0:
        return []
    P = _point_data(params, rho, z, h)
    dom = momentum_domain(params, rho, z, h)
    out = []
    for branch, e1, e2, l1, l2 in profile.bbound.rectangles():
        if branch == "+":
            s_lo = l1 / rho
            s_hi = min(l2 / rho, float(dom.L_tilde(e2)))
        else:
            s_lo = max(l1 / rho,
                       -float(dom.L_tilde(e2 - P.omega * l1)))
            s_hi = l2 / rho
        if s_hi <= s_lo:
            continue

        def xi_lo(s, P=P, dom=dom, e1=e1):
            return np.maximum(dom.E_tilde(s) + P.rho * P.omega * s, e1)

        out.append((s_lo, s_hi, xi_lo, e2))
    return out


_WEIGHT_KEYS = ("T_tt", "T_tphi", "T_phiphi", "T_rr", "trace",
                "F1", "F2", "F3", "F4")


def _weights(P: _PointData, xi, s):
    """Integrand weights of all components on (xi, s) nodes; the common
    factor Phi * Psi is applied by the caller.

    T_rr (= T_zz) carries the mass-shell integrand
    J = X E^2 / sigma^2 - 1 - rho^2 s^2 / X; the trace of the stress
    tensor then reduces pointwise to the constant -1 weight."""
    xi = np.asarray(xi, dtype=float)
    s = np.asarray(s, dtype=float)
    rho, X, sig, om, e2l = P.rho, P.X, P.sigma, P.omega, P.e2lam
    E = xi - rho * om * s
    J = X * E * E / sig**2 - 1.0 - rho**2 * s * s / X
    Lt2_m_s2 = P.L_tilde_sq(E) - s * s
    pref = 2.0 * np.pi * rho / sig
    out = {
        "T_tt": pref * xi * xi,
        "T_tphi": -pref * rho * s * xi,
        "T_phiphi": pref * (rho * s) ** 2,
        "T_rr": 0.5 * pref * e2l * J,
        "trace": -pref * np.ones_like(E),
        "F1": -e2l * pref * (X + 2.0 * (rho * s) ** 2)
              * np.ones_like(E),
        "F2": pref * X * rho * s * E,
        "F3": pref * rho * rho * (sig / X) ** 2 * Lt2_m_s2,
        "F4": -2.0 * pref * e2l * (X * X * E * E / (rho * sig) ** 2
                                   + (1.0 - X / rho**2)
                                   * (1.0 + rho**2 * s * s / X)),
    }
    return out


@dataclass(frozen=True)
class StressComponents:
    T_tt: float
    T_tphi: float
    T_phiphi: float
    T_rr: float
    T_zz: float
    trace: float
    F1: float
    F2: float
    F3: float
    F4: float

    def trace_from_components(self, P: _PointData) -> float:
        """Trace recomputed from the components through the metric
        inverse (cross-check of the direct quadrature)."""
        W = -P.omega * P.X
        V = (P.sigma**2 - W * W) / P.X
        return float((-P.X * self.T_tt + 2.0 * W * self.T_tphi
                      + V * self.T_phiphi) / P.sigma**2
                     + 2.0 * self.T_rr / P.e2lam)


def stress_components(params: KerrParams, rho, z, profile: ProfilePhi,
                      delta: float, cutoff: CutoffPsi,
                      h: MetricPerturbation | None = None, lam0=0.0,
                      n_s: int = 48, n_xi: int = 40,
                      adaptive: bool = False) -> StressComponents:
    """All stress-energy components and source terms at one point by
    iterated quadrature over the support intersection.

    The default is tensor Gauss-Legendre per branch (the integrand is
    smooth on the clipped rectangle); adaptive=True switches to nested
    adaptive Gauss-Kronrod for reference values.
    """
    vals = dict.fromkeys(_WEIGHT_KEYS, 0.0)
    if delta != 0.0 and rho > 0.0:
        P = _point_data(params, rho, z, h, lam0)
        for s_lo, s_hi, xi_lo, xi_hi in support_intersection(
                params, rho, z, profile, h):
            if adaptive:
                for key in _WEIGHT_KEYS:
                    def inner(s, key=key):
                        lo = float(xi_lo(s))
                        if lo >= xi_hi:
                            return 0.0
                        def f(xi):
                            w = _weights(P, np.array([xi]), np.array([s]))[key]
                            phi = profile(xi, rho * s, delta)
                            psi = cutoff.psi(rho, xi, rho * s)
                            return float(w[0] * phi * psi)
                        v, _ = quad(f, lo, xi_hi, epsabs=1e-13, epsrel=1e-9,
                                    limit=100)
                        return v
                    v, _ = quad(inner, s_lo, s_hi, epsabs=1e-13, epsrel=1e-8,
                                limit=100)
                    vals[key] += v
            else:
                xs, ws = leggauss(n_s)
                s_nodes = 0.5 * (s_hi + s_lo) + 0.5 * (s_hi - s_lo) * xs
                s_w = 0.5 * (s_hi - s_lo) * ws
                xq, wq = leggauss(n_xi)
                lo = xi_lo(s_nodes)
                width = np.maximum(xi_hi - lo, 0.0)
                XI = lo[:, None] + width[:, None] * 0.5 * (xq[None, :] + 1.0)
                WXI = width[:, None] * 0.5 * wq[None, :]
                S = np.broadcast_to(s_nodes[:, None], XI.shape)
                common = (profile(XI, rho * S, delta)
                          * cutoff.psi(rho, XI, rho * S))
                wdict = _weights(P, XI, S)
                for key in _WEIGHT_KEYS:
                    vals[key] += float(np.sum(
                        s_w[:, None] * WXI * wdict[key] * common))
    return StressComponents(
        T_tt=vals["T_tt"], T_tphi=vals["T_tphi"], T_phiphi=vals["T_phiphi"],
        T_rr=vals["T_rr"], T_zz=vals["T_rr"], trace=vals["trace"],
        F1=vals["F1"], F2=vals["F2"], F3=vals["F3"], F4=vals["F4"])


def source_terms(params: KerrParams, rho, z, profile: ProfilePhi,
                 delta: float, cutoff: CutoffPsi,
                 h: MetricPerturbation | None = None, lam0=0.0, **kw):
    """(F1, F2, F3, F4) at one point."""
    c = stress_components(params, rho, z, profile, delta, cutoff, h, lam0, **kw)
    return c.F1, c.F2, c.F3, c.F4


@dataclass
class SourceFields:
    """Gridded source terms and stress components over the Weyl plane."""

    rho: np.ndarray
    z: np.ndarray
    fields: dict
    delta: float
    manifest: dict = field(default_factory=dict)

    def to_csv(self, path, key):
        with open(path, "w", newline="") as f:
            f.write(f"# gridded field {key}\n")
            f.write("rho,z,value\n")
            F = self.fields[key]
            for i, rho in enumerate(self.rho):
                for k, z in enumerate(self.z):
                    f.write(f"{rho!r},{z!r},{F[i, k]!r}\n")


def source_fields(params: KerrParams, rho_grid, z_grid, profile: ProfilePhi,
                  delta: float, cutoff: CutoffPsi,
                  h: MetricPerturbation | None = None, lam0=None,
                  n_s: int = 32, n_xi: int = 24,
                  keys=_WEIGHT_KEYS) -> SourceFields:
    """Evaluate source terms / stress components on a (rho, z) grid.
    lam0 may be a callable giving the conformal perturbation."""
    rho_grid = np.asarray(rho_grid, dtype=float)
    z_grid = np.asarray(z_grid, dtype=float)
    out = {k: np.zeros((len(rho_grid), len(z_grid))) for k in keys}
    for i, rho in enumerate(rho_grid):
        for k, z in enumerate(z_grid):
            l0 = float(lam0(rho, z)) if lam0 is not None else 0.0
            c = stress_components(params, rho, z, profile, delta, cutoff,
                                  h, l0, n_s=n_s, n_xi=n_xi)
            for key in keys:
                attr = key if key != "T_zz" else "T_rr"
                out[key][i, k] = getattr(c, attr)
    import hashlib
    prof_hash = hashlib.sha256(
        repr(profile.bbound.rectangles()).encode()).hexdigest()[:16]
    manifest = {"delta": delta, "profile_sha": prof_hash,
                "n_rho": len(rho_grid), "n_z": len(z_grid),
                "eta": cutoff.eta}
    return SourceFields(rho=rho_grid, z=z_grid, fields=out, delta=delta,
                        manifest=manifest)
