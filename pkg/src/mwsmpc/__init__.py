"""Shrinking-horizon stochastic MPC for linear systems under mission-wide chance constraints."""

from .controller import (BatchResult, MissionSpec, MissionTrace, Planner, plan_step, run_batch,
                         run_mission)
from .estimator import (AffinePolicy, MwpsEstimate, compute_sk, estimate_remaining_mwps,
                        stage_bound, swps_surface)
from .lqr import LqrDesign, NonConvergentError, solve_dare
from .model import (LinearSystem, Polytope, StackedPrediction, build_stacked_prediction,
                    closed_loop_matrix, in_safe_set, nominal_rollout)
from .qp import QpProblem, QpSolution, QpStatus, assemble_qp, solve_qp
from .scenario import (ReducedConstraints, ScenarioBatch, build_h_rows, draw_scenarios,
                       reduce_rowmax, required_sample_count)

__version__ = "0.1.0"
