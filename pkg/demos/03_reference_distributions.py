"""Three independent routes to the reference mutant laws.

Cross-checks the characteristic-function inversion against the
compound-Poisson clone oracle for deterministic clone growth, the Poisson law
of the simplified model against its inversion, and the classic equal-rates
pmf recursion against the Yule clone oracle (its validation gate).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ldsim import (
    ScaledParams,
    clone_oracle,
    lc_pmf_recursion,
    ld_reference_pmf,
    mean_scaled,
    simplified_characteristic_function,
    pmf_from_cf,
    total_variation,
)
from ldsim.moments import Setting

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

fig, axes = plt.subplots(1, 3, figsize=(13, 4))

# 1. deterministic clone growth: inversion vs clone oracle
scaled = ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7)
ref = ld_reference_pmf(scaled, 6.7)
oracle = clone_oracle(Setting.LURIA_DELBRUCK, scaled, 6.7, 400_000, seed=7)
tv = total_variation(oracle, ref)
print(f"deterministic growth: TV(inversion, oracle) = {tv:.4f}, "
      f"residual = {ref.residual:.2e}, k_max = {ref.k_max}")
ax = axes[0]
ax.plot(np.arange(501), ref.probs[:501], label="CF inversion")
ax.step(np.arange(501), oracle.probabilities[:501], where="mid", alpha=0.6, label="clone oracle")
ax.set_yscale("log")
ax.set_ylim(1e-6, 0.1)
ax.set_title(f"deterministic growth (TV={tv:.3f})")
ax.legend()

# 2. simplified model: Poisson law
s2 = ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7)
cf = simplified_characteristic_function(s2, 6.7)
pmf = pmf_from_cf(cf, 512, 1024)
lam = mean_scaled(s2, 6.7)
from scipy.stats import poisson

ks = np.arange(513)
print(f"simplified model: max |inversion - Poisson({lam:.2f})| = "
      f"{np.abs(pmf.probs - poisson.pmf(ks, lam)).max():.2e}")
ax = axes[1]
ax.plot(ks, pmf.probs, label="CF inversion")
ax.plot(ks, poisson.pmf(ks, lam), ":", label="Poisson pmf")
ax.set_xlim(0, 250)
ax.set_title("simplified model")
ax.legend()

# 3. equal growth rates: pmf recursion vs its clone-oracle gate
pmf_rec = lc_pmf_recursion(1.0, 60, gate_samples=400_000)
oracle3 = clone_oracle(
    Setting.LEA_COULSON, ScaledParams(gamma=1.0, gamma1=1.0, nu=1.0 / np.expm1(20.0)),
    20.0, 400_000, seed=9,
)
print(f"equal-rates recursion: gate TV = {pmf_rec.params['gate_tv']:.4f}")
ax = axes[2]
ax.plot(np.arange(61), pmf_rec.probs, "o-", ms=3, label="recursion")
ax.step(np.arange(61), oracle3.probabilities[:61], where="mid", alpha=0.6, label="clone oracle")
ax.set_yscale("log")
ax.set_title("equal growth rates (theta=1)")
ax.legend()

for ax in axes:
    ax.set_xlabel("mutant count")
axes[0].set_ylabel("probability")
fig.tight_layout()
fig.savefig(OUT / "references.png", dpi=130)
print(f"wrote {OUT/'references.png'}")
