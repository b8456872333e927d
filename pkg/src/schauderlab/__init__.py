"""Numerical laboratory for Schauder-type estimates of parabolic p-Laplace
systems and doubly non-linear fast diffusion."""
from .errors import InvalidArgument, OutOfRange, SolverFailure
from .geometry import (Cylinder, Grid, Point, box_domain, cylinder_points, dnl_intrinsic_cylinder,
                       intrinsic_cylinder, intrinsic_par_distance, par_boundary_distance, par_distance,
                       standard_cylinder)
from .fields import (CoefficientField, SpaceTimeField, constant_coefficient, cylinder_mean, gradient,
                     holder_bump, holder_seminorm, lp_mean, mollify_coefficient, oscillation,
                     slicewise_mean, steklov_average)
from .fieldio import export_slice_csv, load_field, save_field
from .discrete import SolverParams
from .plaplace import (PLaplaceProblem, flux, flux_gap, freeze_coefficients, solve_cauchy_dirichlet,
                       step_implicit, weak_form_residual)
from .dnl import (DNLProblem, ExtinctionRecord, detect_extinction, explicit_borderline, explicit_critical,
                  extinction_bounds, lq_envelope, rescale, solve_dnl, to_coefficient_form)
from .verify import EstimateReport
from .config import ConfigError, Scenario, load_scenario, parse_config
from .kernels import BACKEND

__version__ = "0.1.0"
