"""Collective Lie-Poisson integrators for Hamiltonian systems on R^3 and (S^2)^N."""

from .errors import CollectiveError, NonConvergence, OriginSingularity, VortexCollision
from .geometry import (
    cotangent_lift,
    fiber_lift,
    hopf_project,
    infinitesimal_generator,
    momentum_M,
    momentum_pairing,
    rotation_of_su2,
    su2_action,
    su2_from_vec,
    u1_act,
)
from .hamiltonians import (
    HamiltonianSystem,
    ProductVortexSystem,
    collective_value,
    hamiltonian_vf_r3,
    lifted_vf,
    rigid_body,
    sphere_extend,
    vortex_hamiltonian,
    vortex_lifted_vf,
)
from .integrators import (
    ButcherTableau,
    SolverOptions,
    Trajectory,
    collective_step,
    explicit_euler_tableau,
    gauss_tableau,
    integrate,
    integrate_product,
    rk_step,
)

__version__ = "0.1.0"
