"""Model parameters, the mean-field scaling map, and the normal-cell population.

Two parameterizations are used throughout:

* ``ModelParams`` carries the raw biological rates: normal cells replicate at
  rate ``alpha``, mutate at rate ``mu`` per cell, and mutant offspring grow at
  rate ``beta``.  The net normal growth rate is ``beta1 = alpha - mu``.
* ``ScaledParams`` carries the mean-field rates ``gamma = beta/eps``,
  ``gamma1 = beta1/eps``, ``nu = mu/eps`` together with the scaling parameter
  ``eps``.  Scaled time is ``tau = eps * t``, so a scaled horizon ``tau``
  corresponds to the raw horizon ``tau / eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

__all__ = [
    "ModelParams",
    "ScaledParams",
    "RateOverflowError",
    "checked_exp",
    "scale_params",
    "unscale_params",
    "normal_population",
]

# exp() overflows float64 just above 709; keep a little slack for products.
_EXP_LIMIT = 700.0


class RateOverflowError(OverflowError):
    """An exponential rate expression left the representable float64 range.

    Raised instead of silently returning ``inf``: expressions like
    ``exp(gamma1 * tau / eps * eps)`` feed jump intensities and must fail
    loudly rather than poison a simulation.
    """


def checked_exp(x: float) -> float:
    """exp(x) with an explicit out-of-range signal instead of overflow."""
    if x > _EXP_LIMIT:
        raise RateOverflowError(f"exp({x:g}) exceeds the float64 range")
    return math.exp(x)


@dataclass(frozen=True)
class ModelParams:
    """Unscaled biological rates.

    alpha : normal-cell replication rate (1/time), > 0
    beta  : mutant replication rate (1/time), >= 0
    mu    : mutation rate per normal cell (1/time), 0 <= mu < alpha
            (``mu == alpha`` is the degenerate boundary and is only reachable
            by direct construction with ``allow_degenerate=True``)
    n0    : initial normal-cell count (real, > 0)
    m0    : initial mean mutant count (real, >= 0)
    beta1 : net normal growth rate; defaults to alpha - mu.  Stored explicitly
            because every rate expression consumes it and recomputing the
            difference would reintroduce cancellation after scaling.
    """

    alpha: float
    beta: float
    mu: float
    n0: float = 1.0
    m0: float = 0.0
    allow_degenerate: bool = False
    beta1: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.beta1 is None:
            object.__setattr__(self, "beta1", self.alpha - self.mu)
        elif abs(self.beta1 - (self.alpha - self.mu)) > 1e-12 * max(self.alpha, self.mu, 1.0):
            raise ValueError(
                f"beta1={self.beta1} inconsistent with alpha - mu = {self.alpha - self.mu}"
            )
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be finite and > 0, got {self.alpha}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if not (0 <= self.mu and math.isfinite(self.mu)):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")
        if self.mu > self.alpha or (self.mu == self.alpha and not self.allow_degenerate):
            raise ValueError(f"mu must be < alpha, got mu={self.mu}, alpha={self.alpha}")
        if not (self.n0 > 0 and math.isfinite(self.n0)):
            raise ValueError(f"n0 must be finite and > 0, got {self.n0}")
        if not (self.m0 >= 0 and math.isfinite(self.m0)):
            raise ValueError(f"m0 must be finite and >= 0, got {self.m0}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("allow_degenerate")
        return d


@dataclass(frozen=True)
class ScaledParams:
    """Mean-field parameters (scaled rates) plus the scaling parameter.

    gamma  : scaled mutant growth rate, >= 0
    gamma1 : scaled net normal growth rate beta1/eps, > 0
    nu     : scaled mutation rate, >= 0
    epsilon: scaling parameter, 0 < eps <= 1
    n0, m0 : as in ModelParams
    """

    gamma: float
    gamma1: float
    nu: float
    epsilon: float = 1.0
    n0: float = 1.0
    m0: float = 0.0

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        if not (self.gamma1 > 0 and math.isfinite(self.gamma1)):
            raise ValueError(f"gamma1 must be finite and > 0, got {self.gamma1}")
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be finite and >= 0, got {self.nu}")
        if not (0 < self.epsilon <= 1):
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not (self.n0 > 0 and math.isfinite(self.n0)):
            raise ValueError(f"n0 must be finite and > 0, got {self.n0}")
        if not (self.m0 >= 0 and math.isfinite(self.m0)):
            raise ValueError(f"m0 must be finite and >= 0, got {self.m0}")

    def with_epsilon(self, epsilon: float) -> "ScaledParams":
        return ScaledParams(self.gamma, self.gamma1, self.nu, epsilon, self.n0, self.m0)

    def horizon(self, tau: float) -> float:
        """Raw-time horizon corresponding to the scaled horizon tau."""
        return tau / self.epsilon

    def to_dict(self) -> dict:
        return asdict(self)


def scale_params(scaled: ScaledParams) -> ModelParams:
    """Map mean-field parameters to the raw rates at finite epsilon.

    beta = eps*gamma, mu = eps*nu, alpha = eps*gamma1 + mu; n0, m0 copied.
    The raw-time simulation horizon for a scaled horizon tau is tau/eps.
    """
    eps = scaled.epsilon
    if not eps > 0:
        raise ValueError(f"epsilon must be > 0, got {eps}")
    mu = eps * scaled.nu
    beta1 = eps * scaled.gamma1
    return ModelParams(
        alpha=beta1 + mu,
        beta=eps * scaled.gamma,
        mu=mu,
        n0=scaled.n0,
        m0=scaled.m0,
        beta1=beta1,
    )


def unscale_params(params: ModelParams, epsilon: float) -> ScaledParams:
    """Inverse of :func:`scale_params`: gamma = beta/eps, nu = mu/eps, gamma1 = (alpha-mu)/eps."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return ScaledParams(
        gamma=params.beta / epsilon,
        gamma1=params.beta1 / epsilon,
        nu=params.mu / epsilon,
        epsilon=epsilon,
        n0=params.n0,
        m0=params.m0,
    )


def normal_population(params: ModelParams, t: float) -> float:
    """Deterministic normal-cell count N(t) = n0 * exp((alpha - mu) * t)."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return params.n0 * checked_exp(params.beta1 * t)
