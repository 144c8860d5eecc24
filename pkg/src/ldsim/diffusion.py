"""Second-order Fokker-Planck (diffusion) approximations and their solvers.

All three truncations share the linear form

    df/dtau + d/dm [(a m + b(tau)) f] = d2/dm2 [(c m + d(tau)) f]

with constant ``a`` and ``c``.  The integrating-factor change of variables

    u(tau) = exp(-a tau),   y = u(tau) m - s(tau),   s = int b u dz

removes the drift entirely and leaves a pure (linear-coefficient) diffusion
equation

    dg/dtau = d2/dy2 [(c u(tau) y + c u(tau) s(tau) + d(tau) u(tau)^2) g],

which for ``c == 0`` is the heat equation after the further time change
``tau_heat = int d u^2 dz`` (this is the closed-form route).  The finite
difference solver integrates the drift-free equation on the comoving grid:
advection along the linear characteristics is exact, the degenerate diffusion
is advanced implicitly (backward step, midpoint coefficients) by tridiagonal
solves, and zero-flux ends make the update exactly conservative and
positivity-preserving (M-matrix).  The returned grid is the drift-advected
image of the input grid, so caller-visible resolution relative to the bump is
frame-invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .moments import Setting, mean_scaled, variance_scaled
from .params import ScaledParams

__all__ = [
    "FPCoefficients",
    "GridFunction",
    "ChangeOfVariables",
    "SolverError",
    "build_coefficients",
    "change_of_variables",
    "closed_form_solution",
    "solve_finite_difference",
    "point_mass_grid",
]


class SolverError(RuntimeError):
    """A finite-difference solve violated mass conservation or positivity."""


@dataclass
class GridFunction:
    """Cell-averaged density on a uniform 1-D mesh over [m_min, m_max]."""

    m_min: float
    m_max: float
    n_cells: int
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError(f"n_cells must be >= 2, got {self.n_cells}")
        if not self.m_max > self.m_min:
            raise ValueError("m_max must exceed m_min")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n_cells,):
            raise ValueError("values must have shape (n_cells,)")

    @property
    def dm(self) -> float:
        return (self.m_max - self.m_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.m_min + (np.arange(self.n_cells) + 0.5) * self.dm

    def mass(self) -> float:
        return float(np.sum(self.values)) * self.dm

    def mean(self) -> float:
        return float(np.dot(self.centers, self.values)) * self.dm / self.mass()

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot((self.centers - mu) ** 2, self.values)) * self.dm / self.mass()

    def l1_distance(self, other: "GridFunction") -> float:
        if other.n_cells != self.n_cells:
            raise ValueError("grids must match for L1 comparison")
        return float(np.sum(np.abs(self.values - other.values))) * self.dm

    def to_csv(self, path) -> None:
        np.savetxt(
            path,
            np.column_stack([self.centers, self.values]),
            delimiter=",",
            header="m,density",
            comments="",
        )


@dataclass
class FPCoefficients:
    """Coefficients of the linear Fokker-Planck form, with optional closed-form integrals.

    ``a`` and ``c`` are constants; ``b`` and ``d`` are functions of scaled time.
    ``s_fn`` and ``tau_heat_fn`` are the change-of-variables integrals
    int b u dz and int d u^2 dz; when absent they are computed by quadrature.
    """

    a: float
    b: Callable[[float], float]
    c: float
    d: Callable[[float], float]
    s_fn: Callable[[float], float] | None = None
    tau_heat_fn: Callable[[float], float] | None = None
    setting: Setting | None = None
    scaled: ScaledParams | None = None
    label: str = "custom"

    def u(self, tau: float) -> float:
        return math.exp(-self.a * tau)

    def s(self, tau: float) -> float:
        if self.s_fn is not None:
            return self.s_fn(tau)
        return _quad(lambda z: self.b(z) * math.exp(-self.a * z), tau)

    def tau_heat(self, tau: float) -> float:
        if self.tau_heat_fn is not None:
            return self.tau_heat_fn(tau)
        return _quad(lambda z: self.d(z) * math.exp(-2.0 * self.a * z), tau)


def _quad(fn, hi: float) -> float:
    from scipy.integrate import quad

    if hi == 0.0:
        return 0.0
    val, _ = quad(fn, 0.0, hi, epsabs=1e-13, epsrel=1e-11, limit=400)
    return val


def _expm1_over(x: float, tau: float) -> float:
    """(e^{x*tau} - 1)/x, continuous through x == 0."""
    if abs(x) * tau < 1e-12:
        return tau * (1.0 + 0.5 * x * tau)
    return math.expm1(x * tau) / x


def build_coefficients(setting: Setting, scaled: ScaledParams) -> FPCoefficients:
    """Diffusion-approximation coefficients for the requested setting.

    Luria-Delbruck: a=gamma, b=nu*N(tau), c=0,       d=nu*N(tau)/2
    Lea-Coulson:    a=gamma, b=nu*N(tau), c=gamma/2, d=nu*N(tau)/2
    Simplified:     a=0,     b=gamma*M+nu*N, c=0,    d=(gamma*M+nu*N)/2
    with N(tau) = n0 e^{gamma1 tau} and M the scaled mean curve.
    """
    g, g1, nu, n0 = scaled.gamma, scaled.gamma1, scaled.nu, scaled.n0

    if setting is Setting.SIMPLIFIED:
        def b(tau: float) -> float:
            return g * mean_scaled(scaled, tau) + nu * n0 * math.exp(g1 * tau)

        def s_fn(tau: float) -> float:
            return mean_scaled(scaled, tau) - scaled.m0

        return FPCoefficients(
            a=0.0, b=b, c=0.0, d=lambda tau: 0.5 * b(tau),
            s_fn=s_fn, tau_heat_fn=lambda tau: 0.5 * s_fn(tau),
            setting=setting, scaled=scaled, label="fp2",
        )

    def b(tau: float) -> float:
        return nu * n0 * math.exp(g1 * tau)

    def s_fn(tau: float) -> float:
        return nu * n0 * _expm1_over(g1 - g, tau)

    def tau_heat_fn(tau: float) -> float:
        return 0.5 * nu * n0 * _expm1_over(g1 - 2.0 * g, tau)

    c = 0.0 if setting is Setting.LURIA_DELBRUCK else 0.5 * g
    label = "fp1" if setting is Setting.LURIA_DELBRUCK else "fp3"
    return FPCoefficients(
        a=g, b=b, c=c, d=lambda tau: 0.5 * b(tau),
        s_fn=s_fn, tau_heat_fn=tau_heat_fn,
        setting=setting, scaled=scaled, label=label,
    )


@dataclass
class ChangeOfVariables:
    """The drift-removing map: u(t), y(t, m) = u m - s, and the heat time."""

    coeffs: FPCoefficients

    def u(self, tau: float) -> float:
        return self.coeffs.u(tau)

    def y(self, tau: float, m) -> np.ndarray:
        return self.coeffs.u(tau) * np.asarray(m, dtype=float) - self.coeffs.s(tau)

    def tau_heat(self, tau: float) -> float:
        return self.coeffs.tau_heat(tau)


def change_of_variables(coeffs: FPCoefficients) -> ChangeOfVariables:
    return ChangeOfVariables(coeffs)


def closed_form_solution(coeffs: FPCoefficients, tau: float, grid: GridFunction, m0: float = 0.0) -> GridFunction:
    """Heat-kernel solution for the c == 0 approximations, on the given grid.

    f(m, tau) = u(tau) * G(y(tau, m) - m0, tau_heat(tau)) with
    G(y, s) = exp(-y^2/(4s)) / sqrt(4 pi s), starting from a point mass at m0.
    tau_heat == 0 degenerates to the initial point-mass indicator cell.
    """
    if coeffs.c != 0.0:
        raise ValueError("closed_form_solution requires c == 0 (fp1/fp2 only)")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    cov = ChangeOfVariables(coeffs)
    s_heat = cov.tau_heat(tau)
    uf = cov.u(tau)
    centers = grid.centers
    yvals = cov.y(tau, centers) - m0
    if s_heat <= 0.0:
        values = np.zeros(grid.n_cells)
        inside = np.abs(yvals) <= 0.5 * uf * grid.dm
        if np.any(inside):
            values[np.argmin(np.abs(yvals))] = 1.0 / grid.dm
        return GridFunction(grid.m_min, grid.m_max, grid.n_cells, values, time=tau)
    dens = np.exp(-(yvals**2) / (4.0 * s_heat)) / math.sqrt(4.0 * math.pi * s_heat)
    return GridFunction(grid.m_min, grid.m_max, grid.n_cells, uf * dens, time=tau)


def point_mass_grid(
    setting: Setting,
    scaled: ScaledParams,
    tau_final: float,
    n_cells: int,
    width: float = 12.0,
) -> GridFunction:
    """Initial point-mass condition on a grid sized to hold the final bump.

    The grid is built in the comoving frame: its drift-advected image at
    tau_final spans mean +/- width*stddev of the approximated law, per the
    moment curves.  The point mass sits in a single full cell.
    """
    coeffs = build_coefficients(setting, scaled)
    sigma_m = math.sqrt(max(variance_scaled(setting, scaled, tau_final), 0.0))
    sigma_y = coeffs.u(tau_final) * sigma_m
    half_width = max(width * sigma_y, 1e-3)
    dy = 2.0 * half_width / n_cells
    m0 = scaled.m0
    mid = n_cells // 2
    y_min = m0 - (mid + 0.5) * dy
    values = np.zeros(n_cells)
    values[mid] = 1.0 / dy
    return GridFunction(y_min, y_min + n_cells * dy, n_cells, values, time=0.0)


def solve_finite_difference(
    coeffs: FPCoefficients,
    f0: GridFunction,
    tau_final: float,
    dt: float | None = None,
    n_steps: int | None = None,
) -> GridFunction:
    """Advance the Fokker-Planck density from f0.time to tau_final.

    Drift is transported exactly along its linear characteristics (the grid
    comoves); the remaining degenerate diffusion d2/dy2[(c_t y + d_t) g] is
    advanced by backward (implicit) steps with midpoint-evaluated coefficients
    via tridiagonal solves.  Zero-flux ends conserve mass to roundoff; the
    implicit matrix is an M-matrix, so cell values stay nonnegative.  The
    diffusion coefficient is clamped at zero where the drift-advected window
    extends beyond the parabolic region (only reachable with c != 0 and then
    only in cells that carry no mass).

    Returns the density on the drift-advected image of the input grid at
    tau_final.  The domain must be wide enough that no appreciable mass
    reaches the window ends; violations surface as mass drift.
    """
    t0 = f0.time
    if tau_final < t0:
        raise ValueError(f"tau_final {tau_final:g} precedes the initial time {t0:g}")
    horizon = tau_final - t0
    if n_steps is None:
        if dt is not None:
            if dt <= 0:
                raise ValueError(f"dt must be > 0, got {dt}")
            n_steps = max(1, int(math.ceil(horizon / dt)))
        else:
            n_steps = max(512, 2 * f0.n_cells)
    if horizon == 0.0:
        return GridFunction(f0.m_min, f0.m_max, f0.n_cells, f0.values.copy(), time=t0)

    u0 = coeffs.u(t0)
    s0 = coeffs.s(t0)
    n = f0.n_cells
    dy = u0 * f0.dm
    y = u0 * f0.centers - s0
    g = f0.values / u0

    mass0 = float(np.sum(g)) * dy
    h = horizon / n_steps
    ab = np.zeros((3, n))
    for k in range(n_steps):
        tau_mid = t0 + (k + 0.5) * h
        um = coeffs.u(tau_mid)
        c_t = coeffs.c * um
        d_t = c_t * coeffs.s(tau_mid) + coeffs.d(tau_mid) * um * um
        D = np.maximum(c_t * y + d_t, 0.0)
        r = h / (dy * dy)
        rD = r * D
        ab[0, 1:] = -rD[1:]
        ab[1, :] = 1.0 + 2.0 * rD
        ab[1, 0] = 1.0 + rD[0]
        ab[1, -1] = 1.0 + rD[-1]
        ab[2, :-1] = -rD[:-1]
        g = solve_banded((1, 1), ab, g, overwrite_ab=True, overwrite_b=True,
                         check_finite=False)

    if not np.all(np.isfinite(g)):
        raise SolverError("non-finite cell values (check the coefficient functions)")
    peak = float(np.max(g)) if n else 0.0
    if float(np.min(g)) < -1e-12 * max(peak, 1.0):
        raise SolverError(f"negative cell value {np.min(g):g} (scheme instability)")
    mass = float(np.sum(g)) * dy
    if abs(mass - mass0) > 1e-8 * max(mass0, 1.0):
        raise SolverError(f"mass drift {mass - mass0:g} exceeds tolerance")

    uf = coeffs.u(tau_final)
    sf = coeffs.s(tau_final)
    edges_lo = (y[0] - 0.5 * dy + sf) / uf
    edges_hi = (y[-1] + 0.5 * dy + sf) / uf
    return GridFunction(edges_lo, edges_hi, n, np.maximum(g, 0.0) * uf, time=tau_final)
