"""Moment curves and the mutant-concentration limit.

Walks through the analytic layer: the shared mean curve, the three variance
laws (deterministic clone growth, Yule clone growth, mean-field Poisson), and
the long-time concentration behaviour of the mutant fraction for growth rates
below, at, and above the net normal rate.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ldsim import (
    ModelParams,
    ScaledParams,
    concentration,
    concentration_limit,
    mean_scaled,
    variance_scaled,
)
from ldsim.moments import Setting

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

# the convergence experiment's rates: gamma1 = 3, nu = 1e-7, horizon 6.7
scaled = ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7)
taus = np.linspace(0.0, 6.7, 200)

mean = np.array([mean_scaled(scaled, t) for t in taus])
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
ax1.semilogy(taus[1:], mean[1:], label="mean (all settings)")
ax1.set_xlabel("scaled time")
ax1.set_ylabel("expected mutants")
ax1.legend()

for setting, style in [
    (Setting.LURIA_DELBRUCK, "-"),
    (Setting.LEA_COULSON, "--"),
    (Setting.SIMPLIFIED, ":"),
]:
    var = np.array([variance_scaled(setting, scaled, t) for t in taus])
    ax2.semilogy(taus[1:], var[1:], style, label=setting.value)
ax2.set_xlabel("scaled time")
ax2.set_ylabel("variance")
ax2.legend(title="setting")
fig.tight_layout()
fig.savefig(OUT / "moment_curves.png", dpi=130)
print(f"mean at tau=6.7: {mean[-1]:.4f}")
for setting in Setting:
    print(f"variance[{setting.value}] at tau=6.7: {variance_scaled(setting, scaled, 6.7):.6g}")

# concentration rho = M/(M+N): mutants take over iff beta >= alpha - mu
fig, ax = plt.subplots(figsize=(6.5, 4))
ts = np.linspace(0.0, 40.0, 400)
for beta, label in [(0.6, "beta < alpha-mu"), (1.0, "beta = alpha-mu"), (1.4, "beta > alpha-mu")]:
    p = ModelParams(alpha=1.0 + 0.05, beta=beta, mu=0.05,
                    allow_degenerate=False)
    rho = [concentration(p, t) for t in ts]
    ax.plot(ts, rho, label=f"{label} (limit {concentration_limit(p):.3f})")
ax.set_xlabel("time")
ax.set_ylabel("mutant concentration")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "concentration.png", dpi=130)
print(f"wrote {OUT/'moment_curves.png'} and {OUT/'concentration.png'}")
