"""Simulation and numerics toolkit for continuous Luria-Delbruck mutation models.

Subpackages by capability:

* :mod:`ldsim.params`   - parameter sets, mean-field scaling, normal population
* :mod:`ldsim.moments`  - closed-form and ODE mean/variance curves
* :mod:`ldsim.rng`      - deterministic parallel streams, exact Poisson sampling
* :mod:`ldsim.kinetic`  - jump-process Monte Carlo ensembles
* :mod:`ldsim.refdist`  - characteristic functions, lattice inversion, clone oracles
* :mod:`ldsim.diffusion`- Fokker-Planck approximations (closed form and FD)
* :mod:`ldsim.cli`      - batch front-end and the convergence experiment
"""

from .params import (
    ModelParams,
    ScaledParams,
    RateOverflowError,
    scale_params,
    unscale_params,
    normal_population,
)
from .moments import (
    Setting,
    MomentCurve,
    mean_closed,
    mean_scaled,
    variance_scaled,
    variance_ode,
    variance_ode_scaled,
    concentration,
    concentration_limit,
)
from .rng import RngStream, sample_poisson
from .kinetic import (
    SampleState,
    EmpiricalDistribution,
    jump_update,
    simulate_values,
    simulate_ensemble,
    moment_standard_errors,
)
from .refdist import (
    CharFn,
    LatticePmf,
    InversionError,
    ReferenceValidationError,
    ld_characteristic_function,
    simplified_characteristic_function,
    pmf_from_cf,
    ld_reference_pmf,
    clone_oracle,
    clone_oracle_values,
    lc_pmf_recursion,
    total_variation,
    empirical_cf,
)
from .diffusion import (
    FPCoefficients,
    GridFunction,
    ChangeOfVariables,
    SolverError,
    build_coefficients,
    change_of_variables,
    closed_form_solution,
    solve_finite_difference,
    point_mass_grid,
)

__version__ = "0.1.0"
