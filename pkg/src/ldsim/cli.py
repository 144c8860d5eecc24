"""Batch front-end: moments, simulation, reference distributions, PDE solves,
and the mutant-distribution convergence experiment.

Every run writes CSV artifacts plus a JSON run record (merged config, seed,
package versions) so it can be reproduced exactly; the convergence command
also emits a gnuplot script for the histogram/reference overlays.

Exit codes: 0 success, 1 validation error (bad flags or parameter
invariants), 2 numerical failure (overflow, solver abort, gate violation).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .diffusion import (
    SolverError,
    build_coefficients,
    closed_form_solution,
    point_mass_grid,
    solve_finite_difference,
)
from .kinetic import simulate_ensemble
from .moments import Setting, mean_scaled, variance_ode_scaled, variance_scaled
from .params import RateOverflowError, ScaledParams
from .refdist import (
    InversionError,
    ReferenceValidationError,
    clone_oracle,
    lc_pmf_recursion,
    ld_reference_pmf,
    simplified_reference_pmf,
    total_variation,
)

__all__ = ["RunConfig", "run_convergence", "main"]

_ORACLE_SEED_OFFSET = 1_000_003


class CliError(ValueError):
    """Command-line validation failure (maps to exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through CliError so the
    # validation exit code stays 1 and numerical failures keep 2.
    def error(self, message):
        raise CliError(message)


@dataclass
class RunConfig:
    """Merged configuration of one CLI run (flags over config-file values)."""

    command: str
    setting: str = "ld"
    gamma: float = 2.5
    gamma1: float = 3.0
    nu: float = 1e-7
    eps: float = 1.0
    n0: float = 1.0
    m0: float = 0.0
    tau: float = 6.7
    seed: int = 12345
    out: str = "."
    samples: int = 100_000
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def scaled(self, eps: float | None = None) -> ScaledParams:
        return ScaledParams(
            gamma=self.gamma,
            gamma1=self.gamma1,
            nu=self.nu,
            epsilon=self.eps if eps is None else eps,
            n0=self.n0,
            m0=self.m0,
        )

    def setting_enum(self) -> Setting:
        return Setting.from_str(self.setting)

    def to_dict(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_record(config: RunConfig, artifacts: list[str], results: dict) -> dict:
    import numba
    import scipy

    return {
        "config": config.to_dict(),
        "artifacts": artifacts,
        "results": results,
        "versions": {
            "ldsim": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
    }


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory {out} is not writable: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_moments(config: RunConfig) -> dict:
    out = _out_dir(config)
    setting = config.setting_enum()
    points = int(config.extra.get("points", 101))
    method = config.extra.get("method", "closed")
    grid = np.linspace(0.0, config.tau, points)
    scaled = config.scaled()
    if method == "ode":
        curve = variance_ode_scaled(setting, scaled, grid)
        mean = curve.mean
        var = curve.variance
        m2 = curve.second_moment
    elif method == "closed":
        mean = np.array([mean_scaled(scaled, t) for t in grid])
        var = np.array([variance_scaled(setting, scaled, t) for t in grid])
        m2 = var + mean**2
    else:
        raise CliError(f"unknown moments method {method!r} (expected closed or ode)")
    path = out / "moments.csv"
    np.savetxt(path, np.column_stack([grid, mean, var, m2]), delimiter=",",
               header="tau,mean,variance,second_moment", comments="")
    results = {"final_mean": float(mean[-1]), "final_variance": float(var[-1])}
    _write_json(out / "moments.json", _run_record(config, [path.name], results))
    return results


def _cmd_simulate(config: RunConfig) -> dict:
    out = _out_dir(config)
    dist = simulate_ensemble(
        config.setting_enum(), config.scaled(), config.tau, config.samples,
        config.seed, config.workers,
    )
    path = out / "histogram.csv"
    dist.to_csv(path)
    results = {"mean": dist.mean, "variance": dist.variance, "n_samples": dist.n_samples}
    record = _run_record(config, [path.name], results)
    record["histogram"] = dist.sidecar()
    _write_json(out / "histogram.json", record)
    return results


def _cmd_refdist(config: RunConfig) -> dict:
    out = _out_dir(config)
    setting = config.setting_enum()
    method = config.extra.get("method", "cf")
    scaled = config.scaled(eps=1.0)
    if method == "cf":
        if setting is Setting.LEA_COULSON:
            raise CliError("no closed characteristic function for the lc setting; "
                           "use --method oracle or --method recursion")
        if setting is Setting.SIMPLIFIED:
            pmf = simplified_reference_pmf(scaled, config.tau)
        else:
            pmf = ld_reference_pmf(scaled, config.tau)
        kmax = config.extra.get("kmax")
        if kmax is not None:
            from .refdist import ld_characteristic_function, pmf_from_cf, simplified_characteristic_function

            cf = (simplified_characteristic_function(scaled, config.tau)
                  if setting is Setting.SIMPLIFIED
                  else ld_characteristic_function(scaled, config.tau))
            n = 1
            while n < 2 * int(kmax):
                n *= 2
            pmf = pmf_from_cf(cf, int(kmax), n)
        path = out / "refdist.csv"
        pmf.to_csv(path)
        results = {"k_max": pmf.k_max, "residual": pmf.residual, "mean": pmf.mean()}
        record = _run_record(config, [path.name], results)
        record["pmf"] = pmf.sidecar()
    elif method == "oracle":
        dist = clone_oracle(setting, scaled, config.tau, config.samples, config.seed, config.workers)
        path = out / "refdist.csv"
        dist.to_csv(path)
        results = {"mean": dist.mean, "variance": dist.variance, "n_samples": dist.n_samples}
        record = _run_record(config, [path.name], results)
        record["histogram"] = dist.sidecar()
    elif method == "recursion":
        theta = config.extra.get("theta")
        if theta is None:
            theta = scaled.nu * scaled.n0 * math.expm1(scaled.gamma1 * config.tau) / scaled.gamma1
        kmax = int(config.extra.get("kmax") or 256)
        pmf = lc_pmf_recursion(float(theta), kmax)
        path = out / "refdist.csv"
        pmf.to_csv(path)
        results = {"theta": float(theta), "k_max": pmf.k_max, "residual": pmf.residual,
                   "gate_tv": pmf.params.get("gate_tv")}
        record = _run_record(config, [path.name], results)
        record["pmf"] = pmf.sidecar()
    else:
        raise CliError(f"unknown refdist method {method!r} (expected cf, oracle or recursion)")
    _write_json(out / "refdist.json", record)
    return results


_APPROX_SETTING = {"fp1": Setting.LURIA_DELBRUCK, "fp2": Setting.SIMPLIFIED, "fp3": Setting.LEA_COULSON}


def _cmd_pde(config: RunConfig) -> dict:
    out = _out_dir(config)
    approx = config.extra.get("approx", "fp1")
    if approx not in _APPROX_SETTING:
        raise CliError(f"unknown approximation {approx!r} (expected fp1, fp2 or fp3)")
    setting = _APPROX_SETTING[approx]
    n_cells = int(config.extra.get("cells", 2048))
    dt = config.extra.get("dt")
    scaled = config.scaled(eps=1.0)
    coeffs = build_coefficients(setting, scaled)
    f0 = point_mass_grid(setting, scaled, config.tau, n_cells)
    sol = solve_finite_difference(coeffs, f0, config.tau, dt=dt)
    path = out / "density.csv"
    sol.to_csv(path)
    results = {
        "scheme": "characteristics+implicit-diffusion",
        "approx": approx,
        "n_cells": n_cells,
        "dt": dt if dt is None else float(dt),
        "mass_error": sol.mass() - 1.0,
        "moments": {"mean": sol.mean(), "variance": sol.variance()},
    }
    if approx in ("fp1", "fp2"):
        ref = closed_form_solution(coeffs, config.tau, sol)
        results["l1_vs_closed_form"] = sol.l1_distance(ref)
    _write_json(out / "pde.json", _run_record(config, [path.name], results))
    return results


_PLOT_SCRIPT = """\
# gnuplot script: mutant histograms vs reference pmf
set datafile separator ','
set key autotitle columnhead
set xlabel 'mutant count k'
set ylabel 'probability'
set logscale y
plot 'reference.csv' using 1:2 with lines lw 2 title 'reference', \\
{overlays}
pause -1
"""


def run_convergence(config: RunConfig, eps_list: list[float]) -> dict:
    """The mutant-distribution convergence experiment over a list of epsilons.

    For each eps the kinetic ensemble is compared in total variation against
    the mean-field reference (CF inversion for ld/simplified, a clone-oracle
    ensemble for lc); per-eps histograms, the reference pmf, a JSON report and
    a gnuplot overlay script are written to the output directory.
    """
    if not eps_list:
        raise CliError("eps list must not be empty")
    for eps in eps_list:
        if not (0.0 < eps <= 1.0):
            raise CliError(f"eps values must lie in (0, 1], got {eps}")
    out = _out_dir(config)
    setting = config.setting_enum()
    scaled0 = config.scaled(eps=1.0)
    artifacts: list[str] = []

    if setting is Setting.LEA_COULSON:
        oracle_samples = int(config.extra.get("oracle_samples", 1_000_000))
        reference = clone_oracle(setting, scaled0, config.tau, oracle_samples,
                                 config.seed + _ORACLE_SEED_OFFSET, config.workers)
        ref_probs = reference.probabilities
        ref_record = reference.sidecar()
        np.savetxt(out / "reference.csv",
                   np.column_stack([np.arange(len(ref_probs)), ref_probs]),
                   delimiter=",", header="k,probability", comments="", fmt=["%d", "%.17g"])
    else:
        reference = (ld_reference_pmf(scaled0, config.tau)
                     if setting is Setting.LURIA_DELBRUCK
                     else simplified_reference_pmf(scaled0, config.tau))
        ref_record = reference.sidecar()
        reference.to_csv(out / "reference.csv")
    artifacts.append("reference.csv")
    _write_json(out / "reference.json", ref_record)
    artifacts.append("reference.json")

    report: dict = {"eps": {}, "setting": setting.value}
    ordered = sorted(eps_list, reverse=True)
    tvs = []
    overlays = []
    for eps in ordered:
        dist = simulate_ensemble(setting, config.scaled(eps=eps), config.tau,
                                 config.samples, config.seed, config.workers)
        tag = f"{eps:g}"
        hist_name = f"hist_eps{tag}.csv"
        dist.to_csv(out / hist_name)
        record = dist.sidecar()
        curve = variance_ode_scaled(setting, config.scaled(eps=eps),
                                    np.linspace(0.0, config.tau, 65))
        exact_mean, exact_var, _ = curve.final
        tv = total_variation(dist, reference)
        tvs.append(tv)
        report["eps"][tag] = {
            "tv": tv,
            "mean": dist.mean,
            "mean_exact": exact_mean,
            "mean_error": dist.mean - exact_mean,
            "variance": dist.variance,
            "variance_exact": exact_var,
            "variance_error": dist.variance - exact_var,
        }
        record["tv"] = tv
        _write_json(out / f"hist_eps{tag}.json", record)
        artifacts += [hist_name, f"hist_eps{tag}.json"]
        overlays.append(f"'{hist_name}' using 1:2 with steps title 'eps={tag}'")

    monotone = all(tvs[i + 1] <= tvs[i] for i in range(len(tvs) - 1))
    report["tv_monotone_in_eps"] = monotone
    if not monotone:
        print("warning: total-variation distance is not monotone along decreasing eps",
              file=sys.stderr)
    (out / "plot.gp").write_text(_PLOT_SCRIPT.format(overlays=", \\\n".join(overlays)),
                                 encoding="utf-8")
    artifacts += ["plot.gp", "report.json"]
    _write_json(out / "report.json", _run_record(config, artifacts, report))
    return report


def _cmd_converge(config: RunConfig) -> dict:
    raw = config.extra.get("eps_list", "0.1,0.01")
    try:
        eps_list = [float(tok) for tok in str(raw).split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"could not parse --eps-list {raw!r}: {exc}") from exc
    return run_convergence(config, eps_list)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--setting", choices=["ld", "lc", "simplified"], default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--gamma1", type=float, default=None)
    parser.add_argument("--nu", type=float, default=None)
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--n0", type=float, default=None)
    parser.add_argument("--m0", type=float, default=None)
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--config", type=str, default=None, help="JSON config file; flags override its fields")
    parser.add_argument("--workers", type=int, default=None)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ldsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="mean/variance curves to CSV")
    _add_common(p)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--method", choices=["closed", "ode"], default=None)

    p = sub.add_parser("simulate", help="kinetic Monte Carlo ensemble histogram")
    _add_common(p)
    p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("refdist", help="reference mutant distribution")
    _add_common(p)
    p.add_argument("--method", choices=["cf", "oracle", "recursion"], default=None)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)

    p = sub.add_parser("pde", help="Fokker-Planck approximation solve")
    _add_common(p)
    p.add_argument("--approx", choices=["fp1", "fp2", "fp3"], default=None)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)

    p = sub.add_parser("converge", help="mutant-distribution convergence experiment")
    _add_common(p)
    p.add_argument("--eps-list", dest="eps_list", type=str, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--oracle-samples", dest="oracle_samples", type=int, default=None)

    return parser


_COMMON_KEYS = {"setting", "gamma", "gamma1", "nu", "eps", "n0", "m0", "tau", "seed", "out",
                "samples", "workers"}


def _merge_config(args: argparse.Namespace) -> RunConfig:
    file_values: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file {path} does not exist")
        try:
            file_values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise CliError(f"config file {path} must hold a JSON object")

    config = RunConfig(command=args.command)
    cli_values = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    for key, value in file_values.items():
        if key in _COMMON_KEYS:
            setattr(config, key, type(getattr(config, key))(value))
        else:
            config.extra[key] = value
    for key, value in cli_values.items():
        if value is None:
            continue
        if key in _COMMON_KEYS:
            setattr(config, key, value)
        else:
            config.extra[key] = value
    return config


_COMMANDS = {
    "moments": _cmd_moments,
    "simulate": _cmd_simulate,
    "refdist": _cmd_refdist,
    "pde": _cmd_pde,
    "converge": _cmd_converge,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _merge_config(args)
        results = _COMMANDS[config.command](config)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RateOverflowError, SolverError, InversionError, ReferenceValidationError,
            RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(results, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
