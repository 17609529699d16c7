"""Principal eigenvalues of nonlocal dispersal operators at desk scale.

Layers: grid_kernel (domains, kernels, coefficients) -> assembly (dense
operators) -> spectral (eigenvalue routes with certified bounds),
local_ref (finite-difference diffusion reference), experiments (study
drivers), cli_io (config + CLI + artifacts).
"""

__version__ = "0.1.0"

from .grid_kernel import (Grid, KernelSpec, Coefficient, ResolutionError,
                          build_grid, nested_box_family, eval_kernel,
                          second_moment, kernel_mass, make_coefficient)
from .assembly import (DiscreteOperator, DisconnectedSupportWarning,
                       assemble, assemble_scaled, effective_sup, from_matrix)
from .spectral import (SpectralResult, principal_eig, cw_bounds,
                       lambda_v_quadratic, lambda_v_min, bounds_iv,
                       existence_check, exp_test_lower_bound)
from .local_ref import LocalEigenResult, dirichlet_lambda1, diffusivity
from .experiments import (SweepRecord, LimitEstimate, ExhaustionResult,
                          InvariantViolation, sigma_sweep, limit_estimate,
                          domain_exhaustion, scaling_invariance_suite,
                          eigfn_convergence, m0_monotonicity, growth_rate)
