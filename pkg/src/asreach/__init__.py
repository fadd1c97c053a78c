"""Almost-sure reachability for stochastic multi-mode systems.

Decide whether a set of noisy modes can steer a state to any target with
probability one, and if so run a controller that does it inside a safety set.
"""

from .control import (Ball, ControllerConfig, Outcome, Trajectory, reach_1d, reach_center,
                      reach_in_ball, step, waypoint_plan)
from .decide import (DecisionResult, LambdaBound, SpanCertificate, Verdict, ViolatingDirection,
                     compute_lambda, is_almost_sure_reachable, necessity_bound, rank_rational)
from .errors import (AsReachError, DegenerateGeometry, DimensionMismatch, DimensionNot2D,
                     InvalidOrdering, InvalidPath, NonRationalParameter, NotPositivelySpanning,
                     NotReachable, OutsidePolytope, PlanningBudgetExhausted,
                     PreconditionViolation, SafetyViolationDetected, ScenarioError,
                     StepBudgetExhausted, VertexOnBoundary)
from .geometry import (BallCover, ConvexPolytope, PiecewiseLinearPath, SafetySet,
                       build_ball_cover, distance_to_boundary, path_clearance, polytope_contains)
from .model import (ExpectedSystem, FiniteDiscrete, PointMass, Smms, UniformBall, UniformBox,
                    derive_rng, expected_system, mode_mean, mode_support_radius, sample,
                    system_support)
from .plan import PlannerConfig, reach_in_pc_set, rrt_plan
from .scenario import bundled_path, load_scenario
from .sim import (BatchStats, Scenario, necessity_trial, run_monte_carlo, verify_trajectory)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
