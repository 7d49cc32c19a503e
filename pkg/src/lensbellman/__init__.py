"""Bellman functions on lens domains.

Chord value iteration for the minimal locally concave value function,
splitting of admissible step functions into simple martingales, gluing of
martingales into circle functions, and supporting-plane extensions through
the free and fixed boundaries.
"""

from .admissible import (BoundaryFunction, MembershipReport, StepFunction,
                         average, boundary_function, canonical_embedding,
                         circle_membership, interval_membership, payoff,
                         two_point_function)
from .geometry import (ChordNotFoundError, ConditionReport, ConvexBody,
                       LensDomain, Segment, check_conditions, contains,
                       distance_to, max_chord, minkowski_interpolate,
                       segment_clear, shrink_toward_center,
                       slicing_constant, split_ratio_bound,
                       transversal_segment, visibility_sample)
from .gluing import (MeasureMartingale, RealizationReport,
                     choose_enlarged_hole, lift_to_measures,
                     realize_on_circle, validate_lift)
from .martingale import (AtomicMeasure, MartingaleNode, SimpleMartingale,
                         expected_payoff, terminal_distribution,
                         two_point_martingale, validate)
from .solver import (ScalarField, SolverConfig, check_local_concavity,
                     chord_value_iteration, compare_domains,
                     free_boundary_continuation)
from .splitting import SplitConfig, SplitError, build_martingale, split_interval
from .extension import (ExtensionConfig, ExtensionResult, LinearFunctional,
                        boundary_regression, extend_through_fixed,
                        extend_through_free, strong_concavity_perturb,
                        superdifferential_at)

__version__ = "0.1.0"
