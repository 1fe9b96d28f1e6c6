"""Adini plate-bending solver on 1-irregular rectangular meshes.

Library + CLI for the planar biharmonic equation discretized with the
12-DOF Adini rectangle, supporting hanging-node meshes with averaging or
hard normal-derivative coupling, a residual a-posteriori estimator, and
an adaptive refinement loop.
"""

from .mesh import (CLAMPED, SIMPLY_SUPPORTED, Domain, Mesh, Rect,
                   build_tensor_mesh, lshape_domain, mesh_from_rects,
                   square_domain)
from .dofs import AVERAGING, HARD, DofSystem, build_dof_system
from .assembly import DiscreteField, assemble, solve, solve_problem
from .problems import (PROBLEM_NAMES, ErrorReport, Problem, energy_error,
                       make_problem)
from .estimator import (EstimateReport, MarkingDecision, adapt_loop,
                        doerfler_mark, estimate)
from .transfer import (BfsField, BilinearField, adini_interpolate,
                       bfs_average, q1_interpolate)
from .experiments import (ConvergenceRow, ExperimentConfig,
                          ExperimentResult, fit_rate, mesh_sequence,
                          run_experiment)
from .lemmas import LemmaCheck, format_table, verify_lemmas

__version__ = "0.1.0"

__all__ = [
    "CLAMPED", "SIMPLY_SUPPORTED", "Domain", "Mesh", "Rect",
    "build_tensor_mesh", "lshape_domain", "mesh_from_rects",
    "square_domain", "AVERAGING", "HARD", "DofSystem", "build_dof_system",
    "DiscreteField", "assemble", "solve", "solve_problem",
    "PROBLEM_NAMES", "ErrorReport", "Problem", "energy_error",
    "make_problem", "EstimateReport", "MarkingDecision", "adapt_loop",
    "doerfler_mark", "estimate", "BfsField", "BilinearField",
    "adini_interpolate", "bfs_average", "q1_interpolate",
    "ConvergenceRow", "ExperimentConfig", "ExperimentResult", "fit_rate",
    "mesh_sequence", "run_experiment", "LemmaCheck", "format_table",
    "verify_lemmas", "__version__",
]
