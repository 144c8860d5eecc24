"""The mutant-distribution convergence experiment, desk scale.

Simulates the kinetic jump process at decreasing values of the scaling
parameter and overlays the integer-binned histograms on the mean-field
references: the characteristic-function inversion for deterministic clone
growth, and a large clone-oracle ensemble for Yule growth.  Total-variation
distances shrink as eps decreases; the residual gap at eps = 0.01 is the
finite-eps distribution itself (random compounding of clone growth), not
Monte Carlo noise.
"""

import time
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ldsim import (
    ScaledParams,
    clone_oracle,
    ld_reference_pmf,
    simulate_ensemble,
    total_variation,
)
from ldsim.moments import Setting

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

N_SAMPLES = 30_000     # the full experiment uses 1e5+
SEED = 42
TAU = 6.7
EPS = [0.1, 0.01]

configs = [
    ("deterministic growth", Setting.LURIA_DELBRUCK, ScaledParams(gamma=2.5, gamma1=3.0, nu=1e-7)),
    ("Yule growth", Setting.LEA_COULSON, ScaledParams(gamma=2.8, gamma1=3.0, nu=1e-7)),
]

fig, axes = plt.subplots(len(configs), len(EPS), figsize=(11, 7), sharex="row")
for row, (label, setting, scaled) in enumerate(configs):
    if setting is Setting.LURIA_DELBRUCK:
        ref = ld_reference_pmf(scaled, TAU)
        ref_probs = ref.probs
    else:
        oracle = clone_oracle(setting, scaled, TAU, 500_000, SEED + 1)
        ref_probs = oracle.probabilities
    ks = np.arange(len(ref_probs))
    for col, eps in enumerate(EPS):
        t0 = time.time()
        dist = simulate_ensemble(setting, scaled.with_epsilon(eps), TAU, N_SAMPLES, SEED)
        tv = total_variation(dist, ref_probs)
        print(f"{label:22s} eps={eps:<5g} TV={tv:.4f}  ({time.time()-t0:.1f}s)")
        ax = axes[row][col]
        kmax_plot = 600
        ax.plot(ks[:kmax_plot], ref_probs[:kmax_plot], lw=1.5, label="reference")
        emp = dist.probabilities[:kmax_plot]
        ax.step(np.arange(len(emp)), emp, where="mid", alpha=0.7, label=f"kinetic, eps={eps}")
        ax.set_yscale("log")
        ax.set_ylim(1e-6, 0.1)
        ax.set_title(f"{label}, eps={eps}, TV={tv:.3f}")
        ax.set_xlabel("mutant count")
        if col == 0:
            ax.set_ylabel("probability")
        ax.legend()
fig.tight_layout()
fig.savefig(OUT / "convergence.png", dpi=130)
print(f"wrote {OUT/'convergence.png'}")
