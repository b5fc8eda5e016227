"""Spectral-Galerkin solvers with a boundary-condition correction step,
plus a plane-layer magnetoconvection simulator built on them.

The core idea: instead of solving a Galerkin problem directly in the
boundary-condition-satisfying space V (whose basis is typically not
orthogonal), solve it in the enclosing Chebyshev space W where fast
coefficient-space algorithms exist, then map the result back into V with
a small precomputed correction.
"""

from .chebyshev import (
    boundary_row,
    differentiate,
    eval_at,
    inner_product,
    inner_weights,
    second_derivative_expansion,
)
from .galerkin import (
    ConstraintSet,
    CorrectionBasis,
    complement_basis,
    correct,
    galerkin_solve_dense,
    prepare_correction,
)
from .solvers1d import (
    HelmholtzProblem,
    project_dirichlet,
    solve_fourth_order,
    solve_helmholtz,
)
from .transforms import (
    PhysicalField3D,
    SpectralField3D,
    pointwise_product,
    to_physical,
    to_spectral,
)
from .fields import (
    TPMDecomposition,
    constraints_for,
    decompose_solenoidal,
    poloidal_velocity_rhs,
    reconstruct_vector,
)
from .mhd import (
    EnergySample,
    Params,
    SpectralState,
    energies,
    rhs_full,
    step_euler_explicit,
    step_imex_euler,
    step_rk4,
)

__version__ = "0.1.0"
