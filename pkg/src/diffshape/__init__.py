"""Interface identification in diffusive processes.

Recovers the shape of an interior interface separating two constant
diffusivities from transient (or steady) observations, by descending the
adjoint-based interface shape gradient with steepest descent or
limited-memory BFGS on the space of closed curves.
"""

from .config import ExperimentConfig, load_config
from .mesh import (InterfaceCurve, InvertedElementError, MeshError,
                   PointLocationError, TriangleMesh, apply_displacement,
                   cell_diffusivity, extract_interface, generate_ogrid_mesh,
                   locate_point)
from .pde import (Observation, TimeSeriesField, evaluate_objective,
                  interpolate_observation, solve_adjoint_elliptic,
                  solve_adjoint_parabolic, solve_elliptic,
                  solve_state_parabolic)
from .riemannian_opt import (LbfgsMemory, OptimizerState, lbfgs_direction,
                             lbfgs_update, optimization_step, run_optimizer,
                             shape_distance, transport)
from .shape_calculus import (GradientDensity, TangentVector,
                             discrete_curvature, domain_shape_derivative,
                             interface_gradient_density,
                             interface_gradient_density_two_sided, l2_project,
                             sobolev_inner, sobolev_representation)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "GradientDensity", "InterfaceCurve",
    "InvertedElementError", "LbfgsMemory", "MeshError", "Observation",
    "OptimizerState", "PointLocationError", "TangentVector", "TimeSeriesField",
    "TriangleMesh", "apply_displacement", "cell_diffusivity",
    "discrete_curvature", "domain_shape_derivative", "evaluate_objective",
    "extract_interface", "generate_ogrid_mesh", "interface_gradient_density",
    "interface_gradient_density_two_sided", "interpolate_observation",
    "l2_project", "lbfgs_direction", "lbfgs_update", "load_config",
    "locate_point", "optimization_step", "run_optimizer", "shape_distance",
    "sobolev_inner", "sobolev_representation", "solve_adjoint_elliptic",
    "solve_adjoint_parabolic", "solve_elliptic", "solve_state_parabolic",
    "transport",
]
