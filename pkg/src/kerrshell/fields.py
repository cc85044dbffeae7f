"""Linear solves for the renormalized field quantities and the damped
Picard sweep at small matter amplitude.

The renormalized unknowns (sigma0, B, X0, Y0, Theta0, lambda0) vanish
identically on the Kerr background; the solve order is semantically
meaningful: sigma0 by an R^4 Green potential, B by radial quadrature,
(X0, Y0) by damped relaxation against the harmonic-map residual, Theta0
by tail-corrected radial integration of a closed one-form, lambda0 by
line integration of the conformal-factor one-form.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ellipk

from .geometry import KerrParams, kerr_fields_weyl
from .zvc import MetricPerturbation


# ---------------------------------------------------------------------------
# Grid and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Cell-centered rectangular grid on [0, rho_max] x [z_min, z_max];
    rho samples sit at half-integer multiples of the spacing, so the
    axis rho = 0 is never a node."""

    rho_max: float
    z_min: float
    z_max: float
    nr: int
    nz: int

    @property
    def drho(self) -> float:
        return self.rho_max / self.nr

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.nz

    @property
    def rho(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.drho

    @property
    def z(self) -> np.ndarray:
        return self.z_min + (np.arange(self.nz) + 0.5) * self.dz

    def mesh(self):
        return np.meshgrid(self.rho, self.z, indexing="ij")


def _bilinear(grid: Grid, values: np.ndarray):
    """Bilinear interpolant of a grid field, zero outside the grid."""
    from scipy.interpolate import RegularGridInterpolator
    itp = RegularGridInterpolator((grid.rho, grid.z), values,
                                  bounds_error=False, fill_value=0.0,
                                  method="linear")

    def f(rho, z):
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(z, dtype=float)
        pts = np.stack(np.broadcast_arrays(rho, z), axis=-1)
        out = itp(pts)
        return out if out.shape else float(out)

    return f


@dataclass
class AxiScalarField:
    """Axisymmetric scalar sampled on a (rho, z) grid with bilinear
    interpolation and a declared power-law decay class at infinity.
    Near-pole evaluations go through the parabolic chart patches."""

    grid: Grid
    values: np.ndarray
    decay: float = 2.0

    def __call__(self, rho, z):
        return _bilinear(self.grid, self.values)(rho, z)

    def pole_patch(self, s, chi, beta, south=False):
        """Evaluate in the parabolic pole chart (s, chi):
        rho = s chi, z = +-(beta + (chi^2 - s^2)/2)."""
        s = np.asarray(s, dtype=float)
        chi = np.asarray(chi, dtype=float)
        rho = s * chi
        z = beta + 0.5 * (chi * chi - s * s)
        if south:
            z = -z
        return self(rho, z)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path, name="field"):
        with open(path, "w", newline="") as f:
            f.write(f"# {name} on cell-centered grid\n")
            f.write("rho,z,value\n")
            for i, rho in enumerate(self.grid.rho):
                for k, z in enumerate(self.grid.z):
                    f.write(f"{rho!r},{z!r},{self.values[i, k]!r}\n")


@dataclass
class OneFormField:
    """Axisymmetric one-form in the radial gauge: only the z-component on
    the main chart is populated; the rho-component and both pole-chart
    s-components are structural zeros."""

    grid: Grid
    B_z: np.ndarray
    gauge: tuple = ("B_rho^(A)=0", "B_s^(N)=0", "B_s'^(S)=0")

    @property
    def B_rho(self) -> np.ndarray:
        return np.zeros_like(self.B_z)

    def sup(self) -> float:
        return float(np.max(np.abs(self.B_z)))


# ---------------------------------------------------------------------------
# Kerr background tables on a grid
# ---------------------------------------------------------------------------

@dataclass
class KerrBackground:
    params: KerrParams
    grid: Grid
    X: np.ndarray
    dX_r: np.ndarray
    dX_z: np.ndarray
    dY_r: np.ndarray
    dY_z: np.ndarray
    omega: np.ndarray
    e2lam: np.ndarray
    X_axis: np.ndarray
    rho: np.ndarray
    z: np.ndarray

    @staticmethod
    def build(params: KerrParams, grid: Grid) -> "KerrBackground":
        R, Z = grid.mesh()
        bg = kerr_fields_weyl(params, R, Z)
        return KerrBackground(
            params=params, grid=grid, X=bg["X"],
            dX_r=bg["dX_drho"], dX_z=bg["dX_dz"],
            dY_r=bg["dY_drho"], dY_z=bg["dY_dz"],
            omega=bg["omega"], e2lam=bg["e2lam"], X_axis=bg["X_axis"],
            rho=R, z=Z)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _d_rho(F, grid: Grid):
    return np.gradient(F, grid.drho, axis=0, edge_order=2)


def _d_z(F, grid: Grid):
    return np.gradient(F, grid.dz, axis=1, edge_order=2)


def _d2_rho(F, grid: Grid):
    out = np.zeros_like(F)
    out[1:-1] = (F[2:] - 2 * F[1:-1] + F[:-2]) / grid.drho**2
    out[0] = out[1]
    out[-1] = out[-2]
    return out


def _d2_z(F, grid: Grid):
    out = np.zeros_like(F)
    out[:, 1:-1] = (F[:, 2:] - 2 * F[:, 1:-1] + F[:, :-2]) / grid.dz**2
    out[:, 0] = out[:, 1]
    out[:, -1] = out[:, -2]
    return out


def laplacian_r4(F, grid: Grid):
    """Flat R^4 Laplacian of an axisymmetric scalar:
    d^2/drho^2 + (2/rho) d/drho + d^2/dz^2."""
    rho = grid.rho[:, None]
    return _d2_rho(F, grid) + (2.0 / rho) * _d_rho(F, grid) + _d2_z(F, grid)


def laplacian_r3(F, grid: Grid):
    """Flat R^3 Laplacian of an axisymmetric scalar:
    d^2/drho^2 + (1/rho) d/drho + d^2/dz^2."""
    rho = grid.rho[:, None]
    return _d2_rho(F, grid) + (1.0 / rho) * _d_rho(F, grid) + _d2_z(F, grid)


def interior_mask(grid: Grid, margin: int = 2):
    m = np.zeros((grid.nr, grid.nz), dtype=bool)
    m[margin:-margin, margin:-margin] = True
    return m


# ---------------------------------------------------------------------------
# Green potentials (axisymmetric reductions, angular integrals analytic)
# ---------------------------------------------------------------------------

def _kernel_r4(grid: Grid, subsample: int = 8):
    """Cell kernel K[i, j, m] of the R^4 potential -int |x-y|^-2:
    the angular integral gives (pi rho'/rho) log[((rho+rho')^2+dz^2)
    / ((rho-rho')^2+dz^2)]; near-diagonal cells are sub-sampled to
    average the integrable log singularity."""
    rho = grid.rho
    dz_m = (np.arange(2 * grid.nz - 1) - (grid.nz - 1)) * grid.dz
    P, Q, M = np.meshgrid(rho, rho, dz_m, indexing="ij")
    area = grid.drho * grid.dz

    def raw(p, q, m):
        # angular reduction of the R^4 fundamental solution
        # -1/(4 pi^2 |x-y|^2); the S^2 integral is elementary
        with np.errstate(divide="ignore"):
            return (q / (4.0 * np.pi * p)) * np.log(
                ((p + q) ** 2 + m * m) / ((p - q) ** 2 + m * m))

    K = raw(P, Q, M) * area
    # sub-sample the source cell where the kernel varies strongly
    near = (np.abs(P - Q) <= 3.5 * grid.drho) & (np.abs(M) <= 3.5 * grid.dz)
    idx = np.argwhere(near)
    off = (np.arange(subsample) + 0.5) / subsample - 0.5
    oq, om = np.meshgrid(off * grid.drho, off * grid.dz, indexing="ij")
    oq = oq.ravel()[None, :]
    om = om.ravel()[None, :]
    p = rho[idx[:, 0], None]
    qv = rho[idx[:, 1], None] + oq
    mv = dz_m[idx[:, 2], None] + om
    K[near] = np.mean(raw(p, qv, mv), axis=1) * area
    return K


def _kernel_r3(grid: Grid, subsample: int = 8):
    """Cell kernel of the R^3 potential -(1/4 pi) int 1/|x-y|:
    azimuthal integral gives (rho'/pi) K(k^2)/R_plus with
    k^2 = 4 rho rho' / R_plus^2."""
    rho = grid.rho
    dz_m = (np.arange(2 * grid.nz - 1) - (grid.nz - 1)) * grid.dz
    P, Q, M = np.meshgrid(rho, rho, dz_m, indexing="ij")
    area = grid.drho * grid.dz

    def raw(p, q, m):
        Rp2 = (p + q) ** 2 + m * m
        k2 = np.clip(4.0 * p * q / Rp2, 0.0, 1.0 - 1e-15)
        return (q / np.pi) * ellipk(k2) / np.sqrt(Rp2)

    K = raw(P, Q, M) * area
    near = (np.abs(P - Q) <= 3.5 * grid.drho) & (np.abs(M) <= 3.5 * grid.dz)
    idx = np.argwhere(near)
    off = (np.arange(subsample) + 0.5) / subsample - 0.5
    oq, om = np.meshgrid(off * grid.drho, off * grid.dz, indexing="ij")
    oq = oq.ravel()[None, :]
    om = om.ravel()[None, :]
    p = rho[idx[:, 0], None]
    qv = rho[idx[:, 1], None] + oq
    mv = dz_m[idx[:, 2], None] + om
    K[near] = np.mean(raw(p, qv, mv), axis=1) * area
    return K


def _kernel_moments(grid: Grid, raw, subsample: int = 8, band: float = 3.5):
    """First moments int_cell K (y - y_c) over the near-diagonal band
    where the kernel is far from linear; convolved against grad H they
    restore second-order accuracy of the product integration."""
    rho = grid.rho
    dz_m = (np.arange(2 * grid.nz - 1) - (grid.nz - 1)) * grid.dz
    P, Q, M = np.meshgrid(rho, rho, dz_m, indexing="ij")
    area = grid.drho * grid.dz
    near = (np.abs(P - Q) <= band * grid.drho) & (np.abs(M) <= band * grid.dz)
    Kx = np.zeros_like(P)
    Kz = np.zeros_like(P)
    idx = np.argwhere(near)
    off = (np.arange(subsample) + 0.5) / subsample - 0.5
    oq, om = np.meshgrid(off * grid.drho, off * grid.dz, indexing="ij")
    oq = oq.ravel()[None, :]
    om = om.ravel()[None, :]
    p = rho[idx[:, 0], None]
    qv = rho[idx[:, 1], None] + oq
    mv = dz_m[idx[:, 2], None] + om
    vals = raw(p, qv, mv)
    base = np.mean(vals, axis=1)
    Kx[near] = (np.mean(vals * oq, axis=1)) * area
    # m = z - z'; the z'-moment carries the opposite sign of the m offset
    Kz[near] = (np.mean(vals * (-om), axis=1)) * area
    return Kx, Kz


class GreenSolver:
    """Convolution solves of the flat R^4 and R^3 Poisson problems on a
    fixed grid (kernels tabulated once; z-translation invariance
    exploited through an FFT convolution).  Near-diagonal cells carry
    first-moment corrections against the source gradient."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self._K4 = None
        self._K3 = None
        self._K4m = None
        self._K3m = None

    def _convolve(self, K, H):
        full = fftconvolve(H[None, :, :], K, mode="full", axes=2)
        sl = full[:, :, self.grid.nz - 1: 2 * self.grid.nz - 1]
        return np.sum(sl, axis=1)

    @staticmethod
    def _raw4(p, q, m):
        with np.errstate(divide="ignore"):
            return (q / (4.0 * np.pi * p)) * np.log(
                ((p + q) ** 2 + m * m) / ((p - q) ** 2 + m * m))

    @staticmethod
    def _raw3(p, q, m):
        Rp2 = (p + q) ** 2 + m * m
        k2 = np.clip(4.0 * p * q / Rp2, 0.0, 1.0 - 1e-15)
        return (q / np.pi) * ellipk(k2) / np.sqrt(Rp2)

    def poisson_r4(self, H: np.ndarray) -> np.ndarray:
        """sigma with Delta_R4 sigma = H (Green potential of the flat
        four-dimensional Laplacian, angular integral analytic)."""
        if self._K4 is None:
            self._K4 = _kernel_r4(self.grid)
            self._K4m = _kernel_moments(self.grid, self._raw4)
        out = self._convolve(self._K4, H)
        Hx = _d_rho(H, self.grid)
        Hz = _d_z(H, self.grid)
        out += self._convolve(self._K4m[0], Hx)
        out += self._convolve(self._K4m[1], Hz)
        return -out

    def poisson_r3(self, H: np.ndarray) -> np.ndarray:
        """u with Delta_R3 u = H: u = -(1/4pi) int H / |x-y|."""
        if self._K3 is None:
            self._K3 = _kernel_r3(self.grid)
            self._K3m = _kernel_moments(self.grid, self._raw3)
        out = self._convolve(self._K3, H)
        Hx = _d_rho(H, self.grid)
        Hz = _d_z(H, self.grid)
        out += self._convolve(self._K3m[0], Hx)
        out += self._convolve(self._K3m[1], Hz)
        return -out


def green_poisson_r4(H: AxiScalarField, solver: GreenSolver | None = None
                     ) -> AxiScalarField:
    """Field-level R^4 Green solve; the output decays like r^-2."""
    solver = solver or GreenSolver(H.grid)
    return AxiScalarField(H.grid, solver.poisson_r4(H.values), decay=2.0)


# ---------------------------------------------------------------------------
# Line integrations
# ---------------------------------------------------------------------------

def _cumulative_from_axis(H, grid: Grid):
    """Midpoint cumulative integral int_0^rho_i H drho on cell centers."""
    return (np.cumsum(H, axis=0) - 0.5 * H) * grid.drho


def _cumulative_to_infinity(H, grid: Grid, decay: float):
    """int_rho_i^infinity H drho: midpoint sum to the outer edge with an
    Euler-Maclaurin endpoint correction (fourth order) plus an analytic
    power-law tail fitted to the outermost sample."""
    h = grid.drho
    core = (np.cumsum(H[::-1], axis=0)[::-1] - 0.5 * H) * h
    core += (h * h / 12.0) * np.gradient(H, h, axis=0, edge_order=2)
    rho_edge = grid.rho_max
    C = H[-1] * grid.rho[-1] ** decay
    tail = C / ((decay - 1.0) * rho_edge ** (decay - 1.0))
    return core + tail[None, :]


def integrate_B(H: np.ndarray, grid: Grid) -> OneFormField:
    """B_z^(A)(rho, z) = int_0^rho H(t, z) dt (gauge B_z(0, .) = 0)."""
    return OneFormField(grid, _cumulative_from_axis(H, grid))


def closedness_residual(H_rho, H_z, grid: Grid) -> float:
    """Sampled sup of |dz H_rho - drho H_z| on the interior."""
    c = _d_z(H_rho, grid) - _d_rho(H_z, grid)
    return float(np.max(np.abs(c[interior_mask(grid)])))


def integrate_theta(H_rho, H_z, grid: Grid, decay: float = 3.0,
                    closed_tol: float | None = None) -> AxiScalarField:
    """Theta0(rho, z) = -int_rho^inf H_rho; requires the one-form to be
    closed (checked when closed_tol is given) and decaying like rho^-decay."""
    if closed_tol is not None:
        res = closedness_residual(H_rho, H_z, grid)
        if res > closed_tol:
            raise ValueError(f"one-form closedness violated: {res:.3e} > "
                             f"{closed_tol:.3e}")
    vals = -_cumulative_to_infinity(H_rho, grid, decay)
    return AxiScalarField(grid, vals, decay=2.0)


# ---------------------------------------------------------------------------
# Renormalized state
# ---------------------------------------------------------------------------

_FIELD_NAMES = ("sigma0", "B_z", "X0", "Y0", "Theta0", "lam0")


@dataclass
class RenormalizedState:
    """Gridded renormalized unknowns; the zero state is exact Kerr."""

    grid: Grid
    sigma0: np.ndarray
    B_z: np.ndarray
    X0: np.ndarray
    Y0: np.ndarray
    Theta0: np.ndarray
    lam0: np.ndarray
    delta: float = 0.0
    sweeps: int = 0
    residuals: dict = field(default_factory=dict)

    @staticmethod
    def zero(grid: Grid, delta: float = 0.0) -> "RenormalizedState":
        z = lambda: np.zeros((grid.nr, grid.nz))
        return RenormalizedState(grid, z(), z(), z(), z(), z(), z(),
                                 delta=delta)

    def norms(self) -> dict:
        return {name: float(np.max(np.abs(getattr(self, name))))
                for name in _FIELD_NAMES}

    def norm(self) -> float:
        return max(self.norms().values())

    def as_perturbation(self) -> MetricPerturbation:
        """Expose (Theta0, sigma0, X0) with finite-difference first
        derivatives as interpolating callables."""
        g = self.grid
        return MetricPerturbation(
            theta0=_bilinear(g, self.Theta0),
            dtheta0_drho=_bilinear(g, _d_rho(self.Theta0, g)),
            dtheta0_dz=_bilinear(g, _d_z(self.Theta0, g)),
            sigma0=_bilinear(g, self.sigma0),
            dsigma0_drho=_bilinear(g, _d_rho(self.sigma0, g)),
            dsigma0_dz=_bilinear(g, _d_z(self.sigma0, g)),
            x0=_bilinear(g, self.X0),
            dx0_drho=_bilinear(g, _d_rho(self.X0, g)),
            dx0_dz=_bilinear(g, _d_z(self.X0, g)),
        )

    def lam0_callable(self):
        return _bilinear(self.grid, self.lam0)

    def checkpoint(self, directory):
        os.makedirs(directory, exist_ok=True)
        g = self.grid
        for name in _FIELD_NAMES:
            AxiScalarField(g, getattr(self, name)).to_csv(
                os.path.join(directory, f"{name}.csv"), name)
        manifest = {
            "grid": {"rho_max": g.rho_max, "z_min": g.z_min,
                     "z_max": g.z_max, "nr": g.nr, "nz": g.nz},
            "delta": self.delta,
            "sweeps": self.sweeps,
            "residuals": self.residuals,
            "norms": self.norms(),
        }
        with open(os.path.join(directory, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2)


# ---------------------------------------------------------------------------
# The conformal-factor one-form and lambda0
# ---------------------------------------------------------------------------

def _alpha_from_parts(sigma, s_r, s_z, s_rr, s_zz, s_rz,
                      X, X_r, X_z, th_r, th_z):
    Q = (X_r**2 - X_z**2 + th_r**2 - th_z**2) / X**2
    mixed = 0.5 * sigma * (X_r * X_z + th_r * th_z) / X**2
    grad2 = s_r**2 + s_z**2
    a_r = (0.25 * s_r * sigma * Q + s_r * (s_rr - s_zz) + s_z * s_rz
           + s_z * mixed) / grad2
    a_z = (-0.25 * s_z * sigma * Q - s_z * (s_rr - s_zz) + s_r * s_rz
           + s_r * mixed) / grad2
    return a_r, a_z


def alpha_kerr(bg: KerrBackground):
    """alpha evaluated on the exact Kerr data (sigma = rho, theta = dY_K):
    alpha_rho = rho Q_K / 4, alpha_z = rho (dX.dX + dY.dY)_rz / (2 X^2)."""
    rho = bg.rho
    Q = (bg.dX_r**2 - bg.dX_z**2 + bg.dY_r**2 - bg.dY_z**2) / bg.X**2
    a_r = 0.25 * rho * Q
    a_z = 0.5 * rho * (bg.dX_r * bg.dX_z + bg.dY_r * bg.dY_z) / bg.X**2
    return a_r, a_z


def lambda_integrand(state: RenormalizedState, bg: KerrBackground):
    """Components (G_rho, G_z) of d lambda0 = alpha - alpha_K
    - d log(1 + X0)/2.

    Derivatives of the full data are composed from the analytic Kerr
    gradients and finite differences of the renormalized factors only,
    so the zero state yields alpha = alpha_K and G = 0 exactly."""
    g = state.grid
    rho = bg.rho
    s0 = state.sigma0
    sigma = rho * (1.0 + s0)
    ds0_r, ds0_z = _d_rho(s0, g), _d_z(s0, g)
    s_r = (1.0 + s0) + rho * ds0_r
    s_z = rho * ds0_z
    s_rr = 2.0 * ds0_r + rho * _d2_rho(s0, g)
    s_zz = rho * _d2_z(s0, g)
    s_rz = ds0_z + rho * _d_z(_d_rho(s0, g), g)

    one_p = 1.0 + state.X0
    X = bg.X * one_p
    X_r = bg.dX_r * one_p + bg.X * _d_rho(state.X0, g)
    X_z = bg.dX_z * one_p + bg.X * _d_z(state.X0, g)

    # d(Y - Y_K) = dX_K Y0 + X_K dY0, composed analytically
    th_r = bg.dY_r + bg.dX_r * state.Y0 + bg.X * _d_rho(state.Y0, g)
    th_z = (bg.dY_z + bg.dX_z * state.Y0 + bg.X * _d_z(state.Y0, g)
            + state.B_z)
    a_r, a_z = _alpha_from_parts(sigma, s_r, s_z, s_rr, s_zz, s_rz,
                                 X, X_r, X_z, th_r, th_z)
    aK_r, aK_z = alpha_kerr(bg)
    logX = np.log1p(state.X0)
    G_r = a_r - aK_r - 0.5 * _d_rho(logX, g)
    G_z = a_z - aK_z - 0.5 * _d_z(logX, g)
    return G_r, G_z


def integrate_lambda(state: RenormalizedState, bg: KerrBackground,
                     decay: float = 3.0):
    """lambda0 by integrating the rho-component of its one-form in from
    infinity along rho-rays; returns (field, path_independence_residual).

    The residual compares against the route that goes out to the top of
    the grid in z first (numerical closedness of the one-form)."""
    g = state.grid
    G_r, G_z = lambda_integrand(state, bg)
    vals = -_cumulative_to_infinity(G_r, g, decay)
    lam0 = AxiScalarField(g, vals, decay=1.0)
    # alternate route: rho-ray at the top z row, then down in z
    top = vals[:, -1]
    z_part = -(np.cumsum(G_z[:, ::-1], axis=1)[:, ::-1] - 0.5 * G_z) * g.dz
    alt = top[:, None] + z_part - z_part[:, -1][:, None]
    mask = interior_mask(g)
    resid = float(np.max(np.abs((vals - alt)[mask])))
    return lam0, resid


# ---------------------------------------------------------------------------
# (X0, Y0) residual and the Picard sweep
# ---------------------------------------------------------------------------

def residual_XY(state: RenormalizedState, bg: KerrBackground,
                F1: np.ndarray | None = None):
    """Left-hand side minus right-hand side of the renormalized
    harmonic-map system on the grid interior (zero on the boundary ring)."""
    g = state.grid
    XK, rho = bg.X, bg.rho
    X0, Y0 = state.X0, state.Y0
    dX0_r, dX0_z = _d_rho(X0, g), _d_z(X0, g)
    dY0_r, dY0_z = _d_rho(Y0, g), _d_z(Y0, g)
    lapX0 = laplacian_r3(X0, g)
    lapY0 = laplacian_r3(Y0, g)
    dYK2 = bg.dY_r**2 + bg.dY_z**2
    dXK2 = bg.dX_r**2 + bg.dX_z**2
    dXKdYK = bg.dX_r * bg.dY_r + bg.dX_z * bg.dY_z

    LX = (lapX0 + 2.0 * (bg.dY_r * dY0_r + bg.dY_z * dY0_z) / XK
          - 2.0 * dYK2 * X0 / XK**2 + 2.0 * dXKdYK * Y0 / XK**2)
    LY = (lapY0 - 2.0 * (bg.dY_r * dX0_r + bg.dY_z * dX0_z) / XK
          - (dXK2 + dYK2) * Y0 / XK**2)

    one_p = 1.0 + X0
    # quadratic self-interaction terms
    vX_r = X0 * bg.dY_r - Y0 * bg.dX_r
    vX_z = X0 * bg.dY_z - Y0 * bg.dX_z
    wX_r = 2.0 * XK * dY0_r - X0 * bg.dY_r + Y0 * bg.dX_r
    wX_z = 2.0 * XK * dY0_z - X0 * bg.dY_z + Y0 * bg.dX_z
    N1X = (XK**2 * (dX0_r**2 + dX0_z**2 - dY0_r**2 - dY0_z**2)
           + vX_r * wX_r + vX_z * wX_z) / (XK**2 * one_p)
    N1Y = ((dX0_r * dY0_r + dX0_z * dY0_z)
           + 2.0 * XK * ((Y0 * bg.dX_r - X0 * bg.dY_r) * dX0_r
                         + (Y0 * bg.dX_z - X0 * bg.dY_z) * dX0_z)
           ) / (XK**2 * one_p)

    # coupling to sigma0, B and the matter source
    sigma = rho * (1.0 + state.sigma0)
    s_r = _d_rho(sigma, g)
    s_z = _d_z(sigma, g)
    dXfull_r = bg.dX_r * one_p + XK * dX0_r
    dXfull_z = bg.dX_z * one_p + XK * dX0_z
    dYfull_r = bg.dY_r + bg.dX_r * Y0 + XK * dY0_r
    dYfull_z = bg.dY_z + bg.dX_z * Y0 + XK * dY0_z
    B_r = np.zeros_like(state.B_z)
    B_z = state.B_z
    F1 = np.zeros_like(X0) if F1 is None else F1
    N2X = ((1.0 / rho - s_r / sigma) * dXfull_r / XK
           - (s_z / sigma) * dXfull_z / XK
           - 2.0 * (dYfull_r * B_r + dYfull_z * B_z) / (XK**2 * one_p)
           - (B_r**2 + B_z**2) / (XK**2 * one_p)
           + F1 / XK)
    N2Y = ((1.0 / rho - s_r / sigma) * dYfull_r / XK
           - (s_r / sigma) * B_r / XK
           - (s_z / sigma) * (dYfull_z + B_z) / XK
           + (B_r * dXfull_r + B_z * dXfull_z) / (XK**2 * one_p))

    res_X = LX - N1X - N2X
    res_Y = LY - N1Y - N2Y
    mask = ~interior_mask(state.grid)
    res_X[mask] = 0.0
    res_Y[mask] = 0.0
    return res_X, res_Y


class PicardDivergence(RuntimeError):
    """The sweep left the configured norm ball."""


def picard_sweep(params: KerrParams, state: RenormalizedState, profile,
                 cutoff, delta: float, bg: KerrBackground | None = None,
                 solver: GreenSolver | None = None, damping: float = 0.5,
                 ball: float = 0.1, shell=None, n_s: int = 24,
                 n_xi: int = 20) -> RenormalizedState:
    """One sweep of the solve order: sigma0 (R^4 Green), B (radial
    quadrature), (X0, Y0) (damped relaxation preconditioned by the flat
    R^3 inverse Laplacian), Theta0, lambda0.

    Returns the new state with residual norms recorded; raises
    PicardDivergence when the state norm grows beyond twice the ball.
    """
    from . import matter as matter_mod
    g = state.grid
    bg = bg or KerrBackground.build(params, g)
    solver = solver or GreenSolver(g)
    h = state.as_perturbation()
    lam0_call = state.lam0_callable()

    # matter sources on the grid (restricted to the shell when known)
    rho_g, z_g = g.rho, g.z
    F1 = np.zeros((g.nr, g.nz))
    F2 = np.zeros_like(F1)
    F3 = np.zeros_like(F1)
    if delta != 0.0:
        for i, rho in enumerate(rho_g):
            for k, z in enumerate(z_g):
                if shell is not None and not shell.inflate(
                        2 * max(g.drho, g.dz)).contains(rho, z):
                    continue
                c = matter_mod.stress_components(
                    params, rho, z, profile, delta, cutoff, h=h,
                    lam0=float(lam0_call(rho, z)), n_s=n_s, n_xi=n_xi)
                F1[i, k], F2[i, k], F3[i, k] = c.F1, c.F2, c.F3

    e2lam = bg.e2lam * np.exp(2.0 * state.lam0)
    one_p_sig = 1.0 + state.sigma0
    one_p_X = 1.0 + state.X0

    # 1. sigma0
    rhs_sigma = bg.X * one_p_X * e2lam * F3 / (bg.rho**2 * one_p_sig)
    sigma0_new = solver.poisson_r4(rhs_sigma)

    # 2. B
    H_B = 2.0 * e2lam * F2 / (bg.rho * one_p_sig)
    B_new = integrate_B(H_B, g)

    # 3. (X0, Y0) damped preconditioned relaxation
    mid = RenormalizedState(g, sigma0_new, B_new.B_z, state.X0, state.Y0,
                            state.Theta0, state.lam0, delta=delta)
    res_X, res_Y = residual_XY(mid, bg, F1)
    X0_new = state.X0 - damping * solver.poisson_r3(res_X)
    Y0_new = state.Y0 - damping * solver.poisson_r3(res_Y)

    # 4. Theta0 from the closed one-form built on the updated data
    sigma = bg.rho * (1.0 + sigma0_new)
    X_full = bg.X * (1.0 + X0_new)
    dYfull_r = bg.dY_r + bg.dX_r * Y0_new + bg.X * _d_rho(Y0_new, g)
    dYfull_z = bg.dY_z + bg.dX_z * Y0_new + bg.X * _d_z(Y0_new, g)
    H_r = -(sigma / X_full**2) * (dYfull_z + B_new.B_z) \
        + (bg.rho / bg.X**2) * bg.dY_z
    H_z = (sigma / X_full**2) * (dYfull_r + B_new.B_rho) \
        - (bg.rho / bg.X**2) * bg.dY_r
    Theta0_new = integrate_theta(H_r, H_z, g, decay=3.0).values

    # 5. lambda0 on the updated state
    upd = RenormalizedState(g, sigma0_new, B_new.B_z, X0_new, Y0_new,
                            Theta0_new, state.lam0, delta=delta)
    lam0_new, path_res = integrate_lambda(upd, bg)

    out = RenormalizedState(g, sigma0_new, B_new.B_z, X0_new, Y0_new,
                            Theta0_new, lam0_new.values, delta=delta,
                            sweeps=state.sweeps + 1)
    out.residuals = {
        "res_X": float(np.max(np.abs(res_X))),
        "res_Y": float(np.max(np.abs(res_Y))),
        "lambda_path_independence": path_res,
    }
    if out.norm() > 2.0 * ball:
        raise PicardDivergence(
            f"state norm {out.norm():.3e} left the ball of radius {ball}")
    return out
