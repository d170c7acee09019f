"""Butterworth-filtered back-projection tuned by kernel-based Bayesian optimization.

Submodules
----------
kernels    kernel interpolation, power function, fill/separation distance
greedy     P-greedy and f-greedy center selection
bayesopt   acquisition-driven search on a finite candidate grid
pique      no-reference PIQUE image quality score
tomo       phantoms, Radon transform, Butterworth-ramp FBP
objective  mean-PIQUE objective over the filter grid and the tuning run
fileio     SPVOL1 volumes, metadata sidecars, PGM export
cli        ``spectune`` command-line front end
"""
from .bayesopt import BetaSchedule, BoConfig, BoReport, beta_value, run_bo
from .errors import ConditioningError, EvaluationError, InputError, StateError
from .greedy import GreedyCriterion, run_greedy
from .kernels import Kernel, fit_interpolant, power_function, rkhs_norm_estimate
from .objective import GridDomain, ObjectiveContext, grid_oracle, objective_value, tune
from .pique import PiqueConfig, pique_score
from .tomo import FilterParams, Sinogram, back_project, fbp, radon, shepp_logan, sphere_phantom

__version__ = "0.1.0"
