"""Multilevel coarse-correction optimization with a tomography benchmark."""

from .coarse import (AlgebraicCoarseModel, Box, GeometricCoarseModel,
                     bregman_divergence, build_algebraic, build_geometric,
                     coarse_box, correction_direction)
from .hierarchy import (CapabilityError, DomainError, EvalCounters, Level,
                        LevelObjective, Objective, ObjectiveHierarchy,
                        QuadraticObjective)
from .linesearch import (ACCEPTED, BRACKET_FAILED, MAX_TRIALS, NO_PROGRESS,
                         LineSearchConfig, StepResult, armijo_backtracking,
                         projected_armijo_arc, wolfe_search)
from .problems import (ProblemBundle, build_huber_problem, build_kl_problem,
                       build_problem, build_quadratic_problem)
from .solver import (ConvergenceTrace, LbfgsMemory, SolveResult, SolverConfig,
                     SolverState, TraceRow, coarse_condition_box,
                     coarse_condition_unconstrained, minimize_quadratic_cg,
                     projected_gradient_residual, solve_multilevel)
from .tomography import (HuberParams, HuberTVObjective, KLObjective, KLParams,
                         Projector, build_projector, downsample_image,
                         forward_difference_operator, lipschitz_estimate,
                         make_phantom, pseudo_huber, pseudo_huber_curvature,
                         pseudo_huber_derivative, trace_ray)
from .transfer import (Grid2D, TransferError, TransferPair,
                       build_full_weighting, operator_norm_2)

__version__ = "0.1.0"
