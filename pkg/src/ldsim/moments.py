"""Mean and variance curves for the mutation models, unscaled and scaled.

The mean obeys ``dM/dt = beta*M + mu*N(t)`` in every formulation and is the
same in raw and scaled variables (the equation is scale-invariant).  The
variance differs:

* Luria-Delbruck (deterministic clone growth, multiplicative jumps):
  ``dV/dt = 2*beta*V + beta^2*M2 + mu*N*(1 + 2*beta*M + mu*N)``.
* Lea-Coulson (Yule clone growth): the same plus an extra ``beta*M*(1+2*mu*N)``
  term, i.e. the Luria-Delbruck right-hand side plus ``beta*M``.
* Simplified (mean-field coupled Poisson increments): increments are
  independent of the sample state, so ``dV/dt = lam + lam^2`` with
  ``lam = beta*M + mu*N``.

In the mean-field limit the scaled variances admit the closed forms
implemented by :func:`variance_scaled`; the finite-epsilon systems are
integrated by :func:`variance_ode` (raw time) and
:func:`variance_ode_scaled` (scaled time, epsilon-exact).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp

from .params import ModelParams, ScaledParams, RateOverflowError, checked_exp

__all__ = [
    "Setting",
    "MomentCurve",
    "mean_closed",
    "mean_scaled",
    "variance_scaled",
    "variance_ode",
    "variance_ode_scaled",
    "concentration",
    "concentration_limit",
]

# Relative threshold below which a branch denominator counts as degenerate.
# Near the threshold the generic formulas are protected by expm1; the
# branch-continuity tests pin the behaviour.
BRANCH_RTOL = 1e-9

_EXP_LIMIT = 700.0


class Setting(enum.Enum):
    """Which microscopic mutation dynamic is being modelled."""

    LURIA_DELBRUCK = "ld"
    LEA_COULSON = "lc"
    SIMPLIFIED = "simplified"

    @classmethod
    def from_str(cls, name: str) -> "Setting":
        key = name.strip().lower()
        for s in cls:
            if key == s.value or key == s.name.lower():
                return s
        raise ValueError(f"unknown setting {name!r}; expected ld, lc or simplified")


def _degenerate(x: float, y: float) -> bool:
    return abs(x - y) < BRANCH_RTOL * max(abs(x), abs(y), 1.0)


@njit(cache=True)
def _mean_unscaled_kernel(t, beta, mu, b1, n0, m0):
    # M(t) solving dM/dt = beta*M + mu*n0*exp(b1*t), M(0) = m0.
    if abs(b1 - beta) < 1e-9 * max(abs(b1), abs(beta), 1.0):
        return mu * n0 * t * math.exp(b1 * t) + m0 * math.exp(beta * t)
    return (
        mu * n0 * math.exp(beta * t) * math.expm1((b1 - beta) * t) / (b1 - beta)
        + m0 * math.exp(beta * t)
    )


def mean_closed(params: ModelParams, t: float) -> float:
    """Expected mutant count M(t); identical for all three settings."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if max(params.beta1 * t, params.beta * t) > _EXP_LIMIT:
        raise RateOverflowError(f"mean overflows at t={t:g}")
    return _mean_unscaled_kernel(t, params.beta, params.mu, params.beta1, params.n0, params.m0)


def mean_scaled(scaled: ScaledParams, tau: float) -> float:
    """Scaled mean solving dM/dtau = gamma*M + nu*n0*exp(gamma1*tau), M(0) = m0."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    g, g1 = scaled.gamma, scaled.gamma1
    if max(g * tau, g1 * tau) > _EXP_LIMIT:
        raise RateOverflowError(f"scaled mean overflows at tau={tau:g}")
    return _mean_unscaled_kernel(tau, g, scaled.nu, g1, scaled.n0, scaled.m0)


def variance_scaled(setting: Setting, scaled: ScaledParams, tau: float) -> float:
    """Closed-form mean-field variance at scaled time tau.

    Luria-Delbruck solves dV/dtau = 2*gamma*V + nu*n0*exp(gamma1*tau);
    Lea-Coulson adds the +gamma*M source; the simplified model is an
    inhomogeneous Poisson count, so its variance equals its accumulated mean.
    Degenerate denominators (gamma1 == 2*gamma, gamma1 == gamma) switch to the
    special-case formulas below BRANCH_RTOL.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    g, g1, nu, n0, m0 = scaled.gamma, scaled.gamma1, scaled.nu, scaled.n0, scaled.m0
    if max(2 * g * tau, g1 * tau) > _EXP_LIMIT:
        raise RateOverflowError(f"scaled variance overflows at tau={tau:g}")

    if setting is Setting.LURIA_DELBRUCK:
        if _degenerate(g1, 2 * g):
            return nu * n0 * tau * math.exp(2 * g * tau)
        return nu * n0 / (g1 - 2 * g) * math.exp(2 * g * tau) * math.expm1((g1 - 2 * g) * tau)

    if setting is Setting.SIMPLIFIED:
        return mean_scaled(scaled, tau) - m0

    # Lea-Coulson; a nonzero m0 adds m0*e^{g*tau}*(e^{g*tau}-1) from the
    # gamma*M source (zero when gamma == 0).
    m0_term = m0 * math.exp(g * tau) * math.expm1(g * tau)
    if _degenerate(g1, g) and _degenerate(g1, 2 * g):
        # gamma and gamma1 both (numerically) zero: dV/dtau = nu*n0.
        return nu * n0 * tau + m0_term
    if _degenerate(g1, 2 * g):
        return (
            -(nu / g) * n0 * math.exp(g * tau) * math.expm1(g * tau)
            + 2 * nu * n0 * tau * math.exp(2 * g * tau)
            + m0_term
        )
    if _degenerate(g1, g):
        return (
            (2 * nu / g) * n0 * math.exp(g * tau) * math.expm1(g * tau)
            - nu * n0 * tau * math.exp(g * tau)
            + m0_term
        )
    bracket = g1 * math.expm1((g1 - 2 * g) * tau) / (g1 - 2 * g) + math.expm1(-g * tau)
    return nu * n0 / (g1 - g) * math.exp(2 * g * tau) * bracket + m0_term


@dataclass
class MomentCurve:
    """Sampled moment curves: mean M, variance V and second moment M2."""

    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    second_moment: np.ndarray
    setting: Setting | None = None
    meta: dict = field(default_factory=dict)

    def validate(self, identity_rtol: float = 1e-9, var_atol: float = 1e-9) -> None:
        t = np.asarray(self.times)
        if t.ndim != 1 or len(t) < 1:
            raise ValueError("times must be a non-empty 1-D array")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if np.min(self.variance) < -var_atol:
            raise ValueError(f"negative variance {np.min(self.variance):g} in curve")
        lhs = self.second_moment
        rhs = self.variance + self.mean**2
        scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-30)
        worst = np.max(np.abs(lhs - rhs) / scale)
        if worst > identity_rtol and np.max(np.abs(lhs - rhs)) > var_atol:
            raise ValueError(f"second_moment != variance + mean^2 (rel err {worst:g})")

    def to_csv(self, path) -> None:
        data = np.column_stack([self.times, self.mean, self.variance, self.second_moment])
        np.savetxt(path, data, delimiter=",", header="tau,mean,variance,second_moment", comments="")

    @property
    def final(self) -> tuple[float, float, float]:
        """(mean, variance, second_moment) at the last grid time."""
        return float(self.mean[-1]), float(self.variance[-1]), float(self.second_moment[-1])


def _rhs_unscaled(setting: Setting, params: ModelParams):
    beta, mu, b1, n0 = params.beta, params.mu, params.beta1, params.n0

    def rhs(t, y):
        M, M2, V = y
        N = n0 * math.exp(b1 * t)
        muN = mu * N
        src2 = muN * (1.0 + muN)
        if setting is Setting.SIMPLIFIED:
            lam = beta * M + muN
            return (lam, 2.0 * M * lam + lam + lam * lam, lam + lam * lam)
        dM = beta * M + muN
        dM2 = beta * (2.0 + beta) * M2 + src2 + 2.0 * (1.0 + beta) * muN * M
        dV = 2.0 * beta * V + beta * beta * M2 + muN * (1.0 + 2.0 * beta * M + muN)
        if setting is Setting.LEA_COULSON:
            dM2 += beta * M
            dV += beta * M
        return (dM, dM2, dV)

    return rhs


def _rhs_scaled(setting: Setting, scaled: ScaledParams):
    g, g1, nu, n0, eps = scaled.gamma, scaled.gamma1, scaled.nu, scaled.n0, scaled.epsilon

    def rhs(tau, y):
        M, M2, V = y
        N = n0 * math.exp(g1 * tau)
        nuN = nu * N
        if setting is Setting.SIMPLIFIED:
            lam = g * M + nuN
            return (lam, 2.0 * M * lam + lam + eps * lam * lam, lam + eps * lam * lam)
        dM = g * M + nuN
        dM2 = g * (2.0 + eps * g) * M2 + nuN * (1.0 + eps * nuN) + 2.0 * (1.0 + eps * g) * nuN * M
        dV = 2.0 * g * V + eps * g * g * M2 + nuN * (1.0 + 2.0 * eps * g * M + eps * nuN)
        if setting is Setting.LEA_COULSON:
            dM2 += g * M
            dV += g * M
        return (dM, dM2, dV)

    return rhs


def _integrate(rhs, grid, y0, rtol, atol) -> np.ndarray:
    sol = solve_ivp(
        rhs,
        (grid[0], grid[-1]),
        y0,
        method="RK45",
        t_eval=grid,
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"moment ODE integration failed: {sol.message}")
    return sol.y


def _moment_atol(rtol: float, source_scale: float, m0: float) -> float:
    # Early moments are of order source_scale * t; absolute slack beyond the
    # relative band there is amplified by the exponential growth downstream,
    # so the floor must sit far below the smallest physical scale.
    scale = max(source_scale, m0, 1e-250)
    return max(rtol * scale * 1e-6, 1e-280)


def variance_ode(
    setting: Setting,
    params: ModelParams,
    t_grid,
    rtol: float = 1e-10,
    atol: float | None = None,
) -> MomentCurve:
    """Integrate the coupled {M, M2, V} system in raw time.

    These are the exact moment equations of the finite-epsilon jump process, so
    the curve is the right comparison target for simulated ensembles.
    """
    grid = np.asarray(t_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0:
        raise ValueError("t_grid must be a 1-D grid starting at 0")
    if not np.all(np.diff(grid) > 0):
        raise ValueError("t_grid must be strictly increasing")
    if params.beta1 * grid[-1] > _EXP_LIMIT:
        raise RateOverflowError("normal population overflows on the requested grid")
    if atol is None:
        atol = _moment_atol(rtol, params.mu * params.n0, params.m0)
    y0 = (params.m0, params.m0**2, 0.0)
    y = _integrate(_rhs_unscaled(setting, params), grid, y0, rtol, atol)
    curve = MomentCurve(grid, mean=y[0], variance=y[2], second_moment=y[1], setting=setting)
    curve.validate()
    return curve


def variance_ode_scaled(
    setting: Setting,
    scaled: ScaledParams,
    tau_grid,
    rtol: float = 1e-10,
    atol: float | None = None,
) -> MomentCurve:
    """Epsilon-exact moment system in scaled time.

    Identical in law to :func:`variance_ode` under t = tau/eps (the change of
    variables is exact), but better conditioned for small eps since the
    integration horizon stays at tau instead of tau/eps.
    """
    grid = np.asarray(tau_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0:
        raise ValueError("tau_grid must be a 1-D grid starting at 0")
    if not np.all(np.diff(grid) > 0):
        raise ValueError("tau_grid must be strictly increasing")
    if scaled.gamma1 * grid[-1] > _EXP_LIMIT:
        raise RateOverflowError("normal population overflows on the requested grid")
    if atol is None:
        atol = _moment_atol(rtol, scaled.nu * scaled.n0, scaled.m0)
    y0 = (scaled.m0, scaled.m0**2, 0.0)
    y = _integrate(_rhs_scaled(setting, scaled), grid, y0, rtol, atol)
    curve = MomentCurve(grid, mean=y[0], variance=y[2], second_moment=y[1], setting=setting)
    curve.validate()
    return curve


def concentration(params: ModelParams, t: float) -> float:
    """Mutant concentration rho(t) = M(t) / (M(t) + N(t)) in [0, 1]."""
    from .params import normal_population

    M = mean_closed(params, t)
    N = normal_population(params, t)
    return M / (M + N)


def concentration_limit(params: ModelParams) -> float:
    """Long-time limit of the concentration: 1 if beta >= alpha - mu, else mu/(alpha - beta)."""
    if params.beta >= params.beta1:
        return 1.0
    return params.mu / (params.alpha - params.beta)
