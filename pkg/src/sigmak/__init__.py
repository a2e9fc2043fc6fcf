"""Spacelike sigma_k-curvature graphs and translating solitons in Minkowski space."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .errors import (CalibrationError, ConeViolationError, ConvergenceError, ConvexityError,
                     PlanError, ProfileRangeError, SigmakError, SpacelikeError)
from .symfun import (Quotient, SigmaK, SpectralPoint, binom, in_gamma_k, quotient_gradient,
                     quotient_value, sigma, sigma_gradient, sigma_restricted)
from .fields import DualField, GraphField, Grid
from .geometry import (JetPoint, DualJetPoint, asymptotic_defect, dual_curvature_radii,
                       graph_geometry, legendre_forward, legendre_inverse, support_function)
from .radial import (AsymptoteReport, RadialParams, RadialProfile, asymptote_extract,
                     integrate_profile, ode_rhs, radial_curvature)
from .barriers import (BarrierSet, SphereData, barrier_value, calibrate_M, check_sandwich,
                       make_barriers, tilt_vectors)
from .solver import (Ball, ConstantRHS, ProblemSpec, SolitonRHS, SolveReport, jacobian, newton_solve,
                     residual, solve_dirichlet_dual, solve_dirichlet_primal)
from .entire import ExhaustionPlan, exhaust, level_set_domain, soliton_pipeline
from .verify import (CheckResult, check_comparison, check_curvature_bounded, check_flow_residual,
                     check_gradient_bound, check_pogorelov, check_support_band)
