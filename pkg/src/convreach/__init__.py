"""Strong-convexity certificates for sublevel sets and ball-based
over-approximation of attainable sets of nonlinear ODEs."""

from .geometry import (Ball, BallIntersection, Box, ComparisonReport,
                       EmptySampleError, MembershipPredicate, OracleVerdict,
                       SampleConfig, SupportPatch, ball_contains,
                       ball_intersection_membership, combine_intersections,
                       compare_ball_vs_halfspace, quadratic_support_check,
                       sigma_regularity_oracle, supporting_ball, unit_directions)
from .polynomials import Polynomial
from .sublevel import (ActiveCone, BoundarySampler, BoundarySamplingError,
                       Certificate, ConstraintFunction, DomainError,
                       FixedPointsSampler, NotInSetError,
                       NotPositiveDefiniteError, RayBoundarySampler,
                       SublevelSet, ToleranceConfig, TSchedule,
                       UnsupportedError, active_set, certify_convexity,
                       certify_r_convexity, check_necessary, dir_second_lower,
                       ellipsoid_min_radius, interior_cone,
                       max_dir_second_upper, max_radius)
from .reach import (DomainExitError, FlowBundle, GrowthBounds,
                    InfeasibleRadiusError, SingularVariationalError,
                    VectorField, estimate_bounds, flow, flow_states,
                    flowed_ball_membership, l1_empirical, propagate_normal,
                    radius_c11, radius_c2, reach_overapprox, support_point,
                    trajectory_hull_box)
from .pendulum import (CellGrid, PendulumConstants, PendulumParams,
                       TransitionReport, abstraction_step, ball_box_nonempty,
                       cell_embedding, halfspace_box_nonempty, pendulum_constants,
                       pendulum_field, pendulum_radius)

__version__ = "0.1.0"
