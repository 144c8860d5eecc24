"""Exact jump-process Monte Carlo for the kinetic mutation models.

Each sample path carries a mutant mass ``m``.  Jump times form a unit-rate
Poisson process on raw time ``[0, tau/eps]`` (the Poisson weights of the
master equation sum to one, so the total jump intensity is exactly 1 and the
process is simulated without any time-discretization parameter).  At a jump
instant ``t`` the state updates according to the setting:

* Luria-Delbruck:  ``m' = (1+beta)*m + eta``,      eta ~ Poisson(mu*N(t))
* Lea-Coulson:     ``m' = m + theta + eta``,       theta ~ Poisson(beta*m)
* Simplified:      ``m' = m + theta + eta``,       theta ~ Poisson(beta*M(t))

with ``N(t)`` the deterministic normal population and ``M(t)`` the analytic
mean curve.  Draw order within a jump is fixed (waiting time, then theta where
applicable, then eta) so a path is a pure function of its ``(seed, sample)``
stream.  Samples never interact; ensembles are bitwise reproducible for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .moments import Setting, _mean_unscaled_kernel
from .params import ModelParams, ScaledParams, RateOverflowError, scale_params
from .rng import RngStream, _next_exponential, _poisson, _stream_state

__all__ = [
    "SampleState",
    "EmpiricalDistribution",
    "jump_update",
    "simulate_values",
    "simulate_ensemble",
    "moment_standard_errors",
]

_EXP_LIMIT = 700.0

_LD, _LC, _SIMPLIFIED = 0, 1, 2
_SETTING_CODE = {Setting.LURIA_DELBRUCK: _LD, Setting.LEA_COULSON: _LC, Setting.SIMPLIFIED: _SIMPLIFIED}


@dataclass(frozen=True)
class SampleState:
    """State of one sample path: mutant mass m >= 0 at time t."""

    m: float
    t: float

    def __post_init__(self):
        if not (self.m >= 0 and math.isfinite(self.m)):
            raise ValueError(f"m must be finite and >= 0, got {self.m}")


@njit(cache=True, nogil=True)
def _jump_kernel(state, setting, m, t, beta, mu, b1, n0, m0):
    lam_eta = mu * n0 * math.exp(b1 * t)
    if setting == 0:
        state, eta = _poisson(state, lam_eta)
        return state, (1.0 + beta) * m + eta
    if setting == 1:
        state, theta = _poisson(state, beta * m)
    else:
        mean_t = _mean_unscaled_kernel(t, beta, mu, b1, n0, m0)
        state, theta = _poisson(state, beta * mean_t)
    state, eta = _poisson(state, lam_eta)
    return state, m + theta + eta


@njit(cache=True, nogil=True)
def _path_batch(out, lo, hi, seed, setting, t_final, beta, mu, b1, n0, m0):
    for s in range(lo, hi):
        rng = _stream_state(seed, np.uint64(s))
        m = m0
        t = 0.0
        while True:
            rng, dt = _next_exponential(rng)
            t += dt
            if t > t_final:
                break
            rng, m = _jump_kernel(rng, setting, m, t, beta, mu, b1, n0, m0)
        out[s] = m


def jump_update(
    setting: Setting,
    state: SampleState,
    params: ModelParams,
    mean_mutants: float | None = None,
    stream: RngStream | None = None,
) -> SampleState:
    """Apply one jump of the microscopic dynamic at the state's current time.

    ``mean_mutants`` must equal the analytic mean M(state.t) and is consumed
    only by the simplified setting; pass None to have it computed from params.
    The jump is instantaneous: the returned state keeps the same time.
    """
    if stream is None:
        raise ValueError("jump_update requires an RngStream")
    lam_eta = params.mu * params.n0 * math.exp(params.beta1 * state.t)
    if not math.isfinite(lam_eta):
        raise RateOverflowError(f"mutation intensity overflow at t={state.t:g}")
    if setting is Setting.LURIA_DELBRUCK:
        eta = stream.poisson(lam_eta)
        return SampleState((1.0 + params.beta) * state.m + eta, state.t)
    if setting is Setting.LEA_COULSON:
        theta = stream.poisson(params.beta * state.m)
    else:
        if mean_mutants is None:
            from .moments import mean_closed

            mean_mutants = mean_closed(params, state.t)
        theta = stream.poisson(params.beta * mean_mutants)
    eta = stream.poisson(lam_eta)
    return SampleState(state.m + theta + eta, state.t)


def _check_horizon(params: ModelParams, t_final: float) -> None:
    if params.beta1 * t_final > _EXP_LIMIT:
        raise RateOverflowError(
            f"normal population overflows before t={t_final:g} (exponent {params.beta1 * t_final:g})"
        )
    if params.beta * t_final > _EXP_LIMIT:
        raise RateOverflowError(f"mutant mean overflows before t={t_final:g}")


def simulate_values(
    setting: Setting,
    scaled: ScaledParams,
    tau_final: float,
    n_samples: int,
    seed: int,
    n_workers: int = 1,
) -> np.ndarray:
    """Final mutant masses of n_samples independent paths at scaled time tau_final."""
    if tau_final < 0:
        raise ValueError(f"tau_final must be >= 0, got {tau_final}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    params = scale_params(scaled)
    t_final = scaled.horizon(tau_final)
    _check_horizon(params, t_final)

    out = np.empty(n_samples, dtype=np.float64)
    code = _SETTING_CODE[setting]
    seed_u = np.uint64(seed & ((1 << 64) - 1))
    args = (seed_u, code, t_final, params.beta, params.mu, params.beta1, params.n0, params.m0)

    if n_workers <= 1:
        _path_batch(out, 0, n_samples, *args)
        return out

    # Samples are keyed by index, so any chunking yields identical output;
    # the kernel releases the GIL, letting threads run the chunks in parallel.
    chunk = max(1024, -(-n_samples // (4 * n_workers)))
    spans = [(lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(_path_batch, out, lo, hi, *args) for lo, hi in spans]
        for f in futures:
            f.result()
    return out


@dataclass
class EmpiricalDistribution:
    """Integer-binned summary of a Monte Carlo ensemble.

    ``probabilities[k]`` is the fraction of samples in the bin
    ``[k - 1/2, k + 1/2)``; ``mean`` and ``variance`` are sample statistics of
    the raw (unbinned) values, variance with ddof=1.
    """

    bin_edges: np.ndarray
    probabilities: np.ndarray
    n_samples: int
    mean: float
    variance: float
    seed: int
    setting: Setting | None = None
    scaled: ScaledParams | None = None
    tau: float | None = None
    counts: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_values(
        cls,
        values: np.ndarray,
        seed: int,
        setting: Setting | None = None,
        scaled: ScaledParams | None = None,
        tau: float | None = None,
    ) -> "EmpiricalDistribution":
        values = np.asarray(values, dtype=float)
        n = len(values)
        ks = np.floor(values + 0.5).astype(np.int64)
        counts = np.bincount(ks)
        probs = counts / n
        edges = np.arange(len(counts) + 1, dtype=float) - 0.5
        mean = float(np.mean(values))
        var = float(np.var(values, ddof=1)) if n > 1 else 0.0
        dist = cls(edges, probs, n, mean, var, seed, setting, scaled, tau, counts)
        dist.validate()
        return dist

    def validate(self) -> None:
        if self.counts is not None and int(np.sum(self.counts)) != self.n_samples:
            raise ValueError("histogram counts do not sum to the sample count")
        total = float(np.sum(self.probabilities))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"histogram mass {total!r} != 1")
        if np.min(self.probabilities) < 0:
            raise ValueError("negative histogram probability")
        if self.variance < 0:
            raise ValueError("negative sample variance")

    def to_csv(self, path) -> None:
        ks = np.arange(len(self.probabilities))
        np.savetxt(
            path,
            np.column_stack([ks, self.probabilities]),
            delimiter=",",
            header="k,probability",
            comments="",
            fmt=["%d", "%.17g"],
        )

    def sidecar(self) -> dict:
        d = {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "mean": self.mean,
            "variance": self.variance,
        }
        if self.setting is not None:
            d["setting"] = self.setting.value
        if self.scaled is not None:
            d["scaled_params"] = self.scaled.to_dict()
        if self.tau is not None:
            d["tau"] = self.tau
        d.update(self.meta)
        return d


def simulate_ensemble(
    setting: Setting,
    scaled: ScaledParams,
    tau_final: float,
    n_samples: int,
    seed: int,
    n_workers: int = 1,
) -> EmpiricalDistribution:
    """Run the jump-process ensemble and bin the final masses on integer bins."""
    values = simulate_values(setting, scaled, tau_final, n_samples, seed, n_workers)
    return EmpiricalDistribution.from_values(values, seed, setting, scaled, tau_final)


def moment_standard_errors(values: np.ndarray) -> tuple[float, float]:
    """Standard errors of the sample mean and sample variance.

    The variance SE uses the asymptotic formula sqrt((m4 - s^4)/n) with the
    sample fourth central moment m4.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    s2 = float(np.var(values, ddof=1))
    se_mean = math.sqrt(s2 / n)
    centered = values - values.mean()
    m4 = float(np.mean(centered**4))
    se_var = math.sqrt(max(m4 - s2 * s2, 0.0) / n)
    return se_mean, se_var
