"""Reference mutant distributions.

Three independent routes to the limiting mutant law:

* the mean-field characteristic function of the deterministic-growth model,
  ``g(xi, tau) = exp(nu*n0 * int_0^tau (exp(-i xi e^{-gamma z}) - 1) e^{gamma1 z} dz)``,
  evaluated by quadrature and inverted on the integer lattice;
* the simplified model's exact Poisson characteristic function;
* compound-Poisson clone oracles that sample the limiting laws directly
  (deterministic clone growth for Luria-Delbruck, geometric Yule clone sizes
  for Lea-Coulson), used to validate the other references.

The inner characteristic-function integral is evaluated after substituting the
clone size ``s = e^{gamma (tau - z)}``, which turns it into
``(e^{gamma1 tau} / gamma) * int_1^{e^{gamma tau}} (e^{-i w s} - 1) s^{-1-p} ds``
with ``p = gamma1/gamma``.  The oscillatory integral is handled by a Taylor
series for small ``w``, panelled Gauss-Legendre where oscillations are
resolved, and an endpoint asymptotic (integration-by-parts) expansion in the
high-frequency tail.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .kinetic import EmpiricalDistribution
from .moments import Setting, mean_scaled
from .params import ScaledParams, RateOverflowError
from .rng import _geometric, _next_double, _poisson, _stream_state

__all__ = [
    "CharFn",
    "LatticePmf",
    "InversionError",
    "ReferenceValidationError",
    "ld_characteristic_function",
    "simplified_characteristic_function",
    "pmf_from_cf",
    "ld_reference_pmf",
    "clone_oracle",
    "clone_oracle_values",
    "lc_pmf_recursion",
    "total_variation",
    "empirical_cf",
]

_EXP_LIMIT = 700.0
_TWO_PI = 2.0 * math.pi

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


class InversionError(RuntimeError):
    """Lattice inversion produced mass outside its tolerance band."""


class ReferenceValidationError(RuntimeError):
    """A reference distribution failed its independent validation gate."""


# ---------------------------------------------------------------------------
# inner oscillatory integral J(w) = int_1^u (e^{-iws} - 1) s^{-1-p} ds
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _int_spow(a, b, p):
    # int_a^b s^{-1-p} ds, a >= 1
    if p > 1e-15:
        return (math.exp(-p * math.log(a)) - math.exp(-p * math.log(b))) / p
    return math.log(b) - math.log(a)


@njit(cache=True, nogil=True)
def _taylor_j(w, u, p, tol):
    # Series in w, valid for w*u <= 0.5: sum_n (-iw)^n/n! * int_1^u s^{n-1-p} ds.
    # Powers are grouped as (wu)^n * u^{-p} to avoid overflow of u^{n-p}.
    wu = w * u
    ump = math.exp(-p * math.log(u))
    lnu = math.log(u)
    cyc_re = (0.0, -1.0, 0.0, 1.0)
    cyc_im = (-1.0, 0.0, 1.0, 0.0)
    S = complex(0.0, 0.0)
    wn = 1.0
    wun = 1.0
    fact = 1.0
    for n in range(1, 31):
        wn *= w
        wun *= wu
        fact *= n
        nf = float(n)
        if abs(nf - p) < 1e-9 * max(nf, p):
            intwn = wun * ump * lnu
        else:
            intwn = (wun * ump - wn) / (nf - p)
        c = n - 1 - ((n - 1) // 4) * 4
        term = complex(cyc_re[c], cyc_im[c]) * intwn / fact
        S += term
        if n >= 3 and abs(term) < tol * (abs(S) + 1e-300):
            break
    return S


@njit(cache=True, nogil=True)
def _gl_em1(a, b, aw, p, glx, glw):
    # Panelled 64-point Gauss-Legendre of (e^{-i*aw*s} - 1) s^{-1-p} over [a, b],
    # a >= 1.  Panels are capped at two oscillation cycles and at a geometric
    # growth factor shrunk for large p (integrand e-folds on scale s/p).
    total = complex(0.0, 0.0)
    shrink = min(1.0, 10.0 / (1.0 + p))
    osc = 2.0 * _TWO_PI / aw if aw > 0.0 else (b - a)
    lo = a
    while lo < b:
        step = lo * shrink
        if step > osc:
            step = osc
        hi = lo + step
        if hi > b:
            hi = b
        mid = 0.5 * (lo + hi)
        hw = 0.5 * (hi - lo)
        acc = complex(0.0, 0.0)
        for i in range(glx.shape[0]):
            s = mid + hw * glx[i]
            ws = aw * s
            sn = math.sin(0.5 * ws)
            env = math.exp(-(1.0 + p) * math.log(s))
            acc += glw[i] * complex(-2.0 * sn * sn, -math.sin(ws)) * env
        total += acc * hw
        lo = hi
    return total


@njit(cache=True, nogil=True)
def _tail_series(a, b, w, p, tol_abs):
    # int_a^b e^{-iws} s^{-1-p} ds by repeated integration by parts; the k-th
    # term is c_k (i/w)^{k+1} [e^{-iws} s^{-1-p-k}]_a^b with c_k = prod(p+j).
    # Requires w*a well above p so the expansion contracts.
    D = complex(0.0, 1.0 / w)
    ea = complex(math.cos(w * a), -math.sin(w * a))
    eb = complex(math.cos(w * b), -math.sin(w * b))
    ca = math.exp(-(1.0 + p) * math.log(a))
    cb = math.exp(-(1.0 + p) * math.log(b))
    S = complex(0.0, 0.0)
    ck = 1.0
    Dk = D
    for k in range(40):
        S += ck * Dk * (eb * cb - ea * ca)
        ck *= p + 1.0 + k
        Dk *= D
        ca /= a
        cb /= b
        if ck * abs(Dk) * (ca + cb) < tol_abs:
            break
    return S


@njit(cache=True, nogil=True)
def _j_integral(w, u, p, tol, glx, glw):
    if w == 0.0 or u <= 1.0:
        return complex(0.0, 0.0)
    aw = abs(w)
    x = aw * u
    if x <= 0.5:
        J = _taylor_j(aw, u, p, tol)
    else:
        C = 8.0 * (p + 16.0)
        if C < 48.0:
            C = 48.0
        if x <= C:
            J = _gl_em1(1.0, u, aw, p, glx, glw)
        else:
            s0 = C / aw
            if s0 <= 1.0:
                A = _int_spow(1.0, u, p)
                tol_abs = tol * (A + 1e-30)
                J = _tail_series(1.0, u, aw, p, tol_abs) - A
            else:
                head = _gl_em1(1.0, s0, aw, p, glx, glw)
                A = _int_spow(s0, u, p)
                tol_abs = tol * (abs(head) + A + 1e-30)
                J = head + _tail_series(s0, u, aw, p, tol_abs) - A
    if w < 0.0:
        return complex(J.real, -J.imag)
    return J


@njit(cache=True, nogil=True)
def _ld_cf_values(w_arr, u, p, pref, tol, glx, glw, out):
    for j in range(w_arr.shape[0]):
        out[j] = cmath.exp(pref * _j_integral(w_arr[j], u, p, tol, glx, glw))


# ---------------------------------------------------------------------------
# characteristic functions
# ---------------------------------------------------------------------------


@dataclass
class CharFn:
    """Characteristic function xi -> E[exp(-i m xi)] of a mutant law.

    ``evaluate`` uses the law of the *scaled* variable (clone contributions
    ``e^{-gamma z}``); multiplying the argument by ``scale_to_raw`` gives the
    characteristic function of raw mutant counts, which is what the lattice
    inversion consumes.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    tau: float
    scaled: ScaledParams
    quad_tol: float
    kind: str
    scale_to_raw: float

    def evaluate(self, xi):
        arr = np.atleast_1d(np.asarray(xi, dtype=float))
        out = self.evaluator(arr)
        if np.isscalar(xi) or np.ndim(xi) == 0:
            return complex(out[0])
        return out

    __call__ = evaluate


def ld_characteristic_function(scaled: ScaledParams, tau: float, quad_tol: float = 1e-10) -> CharFn:
    """Mean-field characteristic function of the deterministic-growth model.

    The arrival weight is generalized from the paper's unit normal growth rate
    to ``e^{gamma1 z}``, which is what makes the first moment agree with the
    scaled mean for gamma1 != 1.  Requires m0 == 0 (point mass start).
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if scaled.m0 != 0:
        raise ValueError("ld_characteristic_function requires m0 == 0")
    if not (0.0 < quad_tol <= 1e-6):
        raise ValueError(f"quad_tol must be in (0, 1e-6], got {quad_tol}")
    g, g1, nu, n0 = scaled.gamma, scaled.gamma1, scaled.nu, scaled.n0
    if max(g, g1) * tau > _EXP_LIMIT:
        raise RateOverflowError(f"characteristic function overflows at tau={tau:g}")

    if g == 0.0 or tau == 0.0:
        # No clone growth: the law is Poisson with the accumulated arrival mass.
        lam = nu * n0 * (math.expm1(g1 * tau) / g1)

        def evaluator(xi: np.ndarray) -> np.ndarray:
            return np.exp(lam * (np.exp(-1j * xi) - 1.0))

        return CharFn(evaluator, tau, scaled, quad_tol, "luria-delbruck", 1.0)

    u = math.exp(g * tau)
    p = g1 / g
    pref = nu * n0 * math.exp(g1 * tau) / g

    def evaluator(xi: np.ndarray) -> np.ndarray:
        w = np.ascontiguousarray(xi / u, dtype=np.float64)
        out = np.empty(w.shape[0], dtype=np.complex128)
        _ld_cf_values(w, u, p, pref, quad_tol, _GL_X, _GL_W, out)
        return out

    return CharFn(evaluator, tau, scaled, quad_tol, "luria-delbruck", u)


def simplified_characteristic_function(scaled: ScaledParams, tau: float) -> CharFn:
    """Poisson characteristic function exp((e^{-i xi} - 1) * M(tau)) of the simplified model."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if scaled.m0 != 0:
        raise ValueError("simplified_characteristic_function requires m0 == 0")
    mt = mean_scaled(scaled, tau)

    def evaluator(xi: np.ndarray) -> np.ndarray:
        return np.exp(mt * (np.exp(-1j * xi) - 1.0))

    return CharFn(evaluator, tau, scaled, 1e-12, "poisson", 1.0)


# ---------------------------------------------------------------------------
# lattice inversion
# ---------------------------------------------------------------------------


@dataclass
class LatticePmf:
    """Probability mass on {0..k_max} with the unassigned tail kept explicit."""

    probs: np.ndarray
    k_max: int
    residual: float
    method: str = ""
    params: dict = field(default_factory=dict)
    truncation_warning: bool = False

    def validate(self) -> None:
        if np.min(self.probs) < 0:
            raise ValueError("negative probability in LatticePmf")
        if self.residual < -1e-9:
            raise ValueError(f"negative residual {self.residual:g}")
        total = float(np.sum(self.probs)) + self.residual
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities + residual = {total!r} != 1")

    def mean(self) -> float:
        """First moment of the truncated mass."""
        return float(np.dot(np.arange(self.k_max + 1), self.probs))

    def to_csv(self, path) -> None:
        ks = np.arange(self.k_max + 1)
        np.savetxt(
            path,
            np.column_stack([ks, self.probs]),
            delimiter=",",
            header="k,probability",
            comments="",
            fmt=["%d", "%.17g"],
        )

    def sidecar(self) -> dict:
        return {
            "k_max": self.k_max,
            "residual": self.residual,
            "method": self.method,
            "params": self.params,
        }


def pmf_from_cf(cf: CharFn, k_max: int, n_nodes: int) -> LatticePmf:
    """Invert a characteristic function on the nonnegative integer lattice.

    p_k = (1/2pi) int_{-pi}^{pi} g_raw(xi) e^{i k xi} dxi via trapezoid sampling
    at n_nodes uniform nodes (a DFT); the raw-count CF is the evaluator composed
    with the clone rescaling factor.  For a non-lattice law this yields the
    Dirichlet-kernel smoothed mass near each integer, which is exactly the
    binned quantity the Monte Carlo histograms estimate.
    """
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    if n_nodes < max(2, 2 * k_max) or (n_nodes & (n_nodes - 1)) != 0:
        raise ValueError(f"n_nodes must be a power of two >= 2*k_max, got {n_nodes}")
    n = n_nodes
    half = n // 2
    j = np.arange(half + 1)
    xi = -math.pi + _TWO_PI * j / n
    vals_half = np.asarray(cf.evaluate(xi * cf.scale_to_raw))
    vals = np.empty(n, dtype=np.complex128)
    vals[: half + 1] = vals_half
    vals[half + 1 :] = np.conj(vals_half[1:half][::-1])

    coef = np.fft.ifft(vals).real[: k_max + 1]
    probs = np.where(np.arange(k_max + 1) % 2 == 0, coef, -coef)

    lowest = float(np.min(probs))
    if lowest < -1e-6:
        raise InversionError(f"inversion produced probability {lowest:g} < -1e-6")
    probs = np.clip(probs, 0.0, None)
    residual = 1.0 - float(np.sum(probs))
    if residual < -1e-9:
        raise InversionError(f"inverted mass exceeds 1 by {-residual:g}")

    warn = residual > 0.01
    if warn:
        warnings.warn(f"lattice inversion truncated {residual:.3g} of the mass at k_max={k_max}")
    pmf = LatticePmf(
        probs,
        k_max,
        residual,
        method=f"cf-inversion[{cf.kind}]",
        params={"n_nodes": n_nodes, "tau": cf.tau, "quad_tol": cf.quad_tol,
                "scaled_params": cf.scaled.to_dict(), "min_raw_prob": lowest},
        truncation_warning=warn,
    )
    pmf.validate()
    return pmf


def ld_reference_pmf(
    scaled: ScaledParams,
    tau: float,
    residual_target: float = 1e-4,
    quad_tol: float = 1e-10,
    n_cap: int = 2**20,
) -> LatticePmf:
    """CF-inverted reference, doubling k_max until the residual target is met."""
    cf = ld_characteristic_function(scaled, tau, quad_tol)
    mean = mean_scaled(scaled, tau)
    k_max = 64
    while k_max < 4.0 * mean:
        k_max *= 2
    while True:
        pmf = pmf_from_cf(cf, k_max, 2 * k_max)
        if pmf.residual < residual_target or 2 * k_max >= n_cap:
            return pmf
        k_max *= 2


def simplified_reference_pmf(
    scaled: ScaledParams,
    tau: float,
    residual_target: float = 1e-4,
    n_cap: int = 2**20,
) -> LatticePmf:
    """Poisson reference for the simplified model via the same inversion path."""
    cf = simplified_characteristic_function(scaled, tau)
    mean = mean_scaled(scaled, tau)
    k_max = 64
    while k_max < mean + 12.0 * math.sqrt(mean) and 2 * k_max < n_cap:
        k_max *= 2
    while True:
        pmf = pmf_from_cf(cf, k_max, 2 * k_max)
        if pmf.residual < residual_target or 2 * k_max >= n_cap:
            return pmf
        k_max *= 2


# ---------------------------------------------------------------------------
# clone oracles
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _oracle_batch(out, lo, hi, seed, setting, tau, gamma, gamma1, nu, n0, mean_tau):
    eg1 = math.expm1(gamma1 * tau)
    lam_total = nu * n0 * (eg1 / gamma1 if gamma1 != 0.0 else tau)
    for s in range(lo, hi):
        rng = _stream_state(seed, np.uint64(s))
        if setting == 2:
            rng, k = _poisson(rng, mean_tau)
            out[s] = k
            continue
        rng, n_clones = _poisson(rng, lam_total)
        total = 0.0
        for _ in range(n_clones):
            rng, uz = _next_double(rng)
            # arrival time density ~ e^{gamma1 z}: inverse-CDF sample
            z = math.log1p(uz * eg1) / gamma1 if gamma1 != 0.0 else uz * tau
            age = tau - z
            if setting == 0:
                total += math.exp(gamma * age)
            else:
                one_m_p = -math.expm1(-gamma * age)  # 1 - e^{-gamma*age}
                if one_m_p <= 0.0:
                    total += 1.0
                else:
                    rng, gsize = _geometric(rng, math.log(one_m_p))
                    total += gsize
        out[s] = total


def clone_oracle_values(
    setting: Setting,
    scaled: ScaledParams,
    tau: float,
    n_samples: int,
    seed: int,
    n_workers: int = 1,
) -> np.ndarray:
    """Raw samples from the mean-field law via its compound-Poisson structure.

    Mutations arrive with weight e^{gamma1 z}; a clone born at z contributes
    e^{gamma (tau-z)} (Luria-Delbruck), a geometric Yule size with success
    probability e^{-gamma (tau-z)} (Lea-Coulson), or the whole count is Poisson
    with the scaled mean (simplified).
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if scaled.m0 != 0:
        raise ValueError("clone_oracle requires m0 == 0")
    if max(scaled.gamma, scaled.gamma1) * tau > _EXP_LIMIT:
        raise RateOverflowError(f"clone sizes overflow at tau={tau:g}")
    mean_tau = mean_scaled(scaled, tau) if setting is Setting.SIMPLIFIED else 0.0

    from .kinetic import _SETTING_CODE

    out = np.empty(n_samples, dtype=np.float64)
    seed_u = np.uint64(seed & ((1 << 64) - 1))
    args = (seed_u, _SETTING_CODE[setting], tau, scaled.gamma, scaled.gamma1,
            scaled.nu, scaled.n0, mean_tau)
    if n_workers <= 1:
        _oracle_batch(out, 0, n_samples, *args)
        return out
    from concurrent.futures import ThreadPoolExecutor

    chunk = max(4096, -(-n_samples // (4 * n_workers)))
    spans = [(lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        for f in [pool.submit(_oracle_batch, out, lo, hi, *args) for lo, hi in spans]:
            f.result()
    return out


def clone_oracle(
    setting: Setting,
    scaled: ScaledParams,
    tau: float,
    n_samples: int,
    seed: int,
    n_workers: int = 1,
) -> EmpiricalDistribution:
    """Integer-binned clone-oracle ensemble (same contract as simulate_ensemble)."""
    values = clone_oracle_values(setting, scaled, tau, n_samples, seed, n_workers)
    dist = EmpiricalDistribution.from_values(values, seed, setting, scaled, tau)
    dist.meta["sampler"] = "clone-oracle"
    return dist


# ---------------------------------------------------------------------------
# Lea-Coulson pmf recursion (gated)
# ---------------------------------------------------------------------------


def _lc_recursion_raw(theta: float, k_max: int) -> np.ndarray:
    # Panjer recursion for a compound Poisson with clone-size law
    # q_k = 1/(k(k+1)): p_n = (theta/n) * sum_{j<n} p_j/(n-j+1).
    probs = np.zeros(k_max + 1)
    probs[0] = math.exp(-theta)
    inv = 1.0 / np.arange(2.0, k_max + 2.0)
    for n in range(1, k_max + 1):
        probs[n] = theta / n * float(np.dot(probs[:n], inv[:n][::-1]))
    return probs


def lc_pmf_recursion(
    theta: float,
    k_max: int,
    gate_samples: int = 1_000_000,
    gate_seed: int = 20240811,
    gate_tau: float = 20.0,
    gate_tv: float = 0.01,
) -> LatticePmf:
    """Lea-Coulson mutant pmf for the equal-growth-rate case (gamma == gamma1).

    theta is the expected number of mutation events.  The recursion is adopted
    from the fluctuation-analysis literature and is only served after passing
    an equivalence gate against the independent clone oracle: a run with
    gamma == gamma1 and matched theta must sit within ``gate_tv`` total
    variation, otherwise ReferenceValidationError is raised.
    """
    if theta < 0 or not math.isfinite(theta):
        raise ValueError(f"theta must be finite and >= 0, got {theta}")
    if k_max < 0:
        raise ValueError(f"k_max must be >= 0, got {k_max}")
    probs = _lc_recursion_raw(theta, k_max)
    residual = 1.0 - float(np.sum(probs))
    pmf = LatticePmf(
        probs,
        k_max,
        residual,
        method="lc-recursion",
        params={"theta": theta},
        truncation_warning=residual > 0.01,
    )
    pmf.validate()

    if gate_samples > 0:
        nu = theta / math.expm1(gate_tau)
        oracle = clone_oracle(
            Setting.LEA_COULSON,
            ScaledParams(gamma=1.0, gamma1=1.0, nu=nu, epsilon=1.0, n0=1.0, m0=0.0),
            gate_tau,
            gate_samples,
            gate_seed,
        )
        tv = total_variation(pmf, oracle)
        if tv > gate_tv:
            raise ReferenceValidationError(
                f"lc_pmf_recursion failed the clone-oracle gate: TV={tv:.4f} > {gate_tv}"
            )
        pmf.params["gate_tv"] = tv
    return pmf


# ---------------------------------------------------------------------------
# comparison utilities
# ---------------------------------------------------------------------------


def _probs_and_overflow(dist) -> tuple[np.ndarray, float]:
    if isinstance(dist, LatticePmf):
        return dist.probs, max(dist.residual, 0.0)
    if isinstance(dist, EmpiricalDistribution):
        return dist.probabilities, 0.0
    arr = np.asarray(dist, dtype=float)
    return arr, max(1.0 - float(np.sum(arr)), 0.0)


def total_variation(p, q) -> float:
    """Total variation distance between two integer-lattice distributions.

    Accepts LatticePmf, EmpiricalDistribution or plain probability arrays.
    Mass beyond a truncated support (a LatticePmf residual, or mass outside the
    shorter array) is aggregated into one overflow bin so that two truncations
    of the same law compare as close.
    """
    pp, po = _probs_and_overflow(p)
    qp, qo = _probs_and_overflow(q)
    n = min(len(pp), len(qp))
    tv = 0.5 * float(np.sum(np.abs(pp[:n] - qp[:n])))
    po += float(np.sum(pp[n:]))
    qo += float(np.sum(qp[n:]))
    return tv + 0.5 * abs(po - qo)


def empirical_cf(values: np.ndarray, xis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Empirical characteristic function E[e^{-i xi X}] with per-component SEs."""
    values = np.asarray(values, dtype=float)
    xis = np.atleast_1d(np.asarray(xis, dtype=float))
    n = len(values)
    cf = np.empty(len(xis), dtype=np.complex128)
    se_re = np.empty(len(xis))
    se_im = np.empty(len(xis))
    for i, xi in enumerate(xis):
        c = np.cos(xi * values)
        s = -np.sin(xi * values)
        cf[i] = complex(np.mean(c), np.mean(s))
        se_re[i] = np.std(c, ddof=1) / math.sqrt(n)
        se_im[i] = np.std(s, ddof=1) / math.sqrt(n)
    return cf, se_re, se_im
