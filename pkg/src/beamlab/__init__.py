"""Numerical laboratory for self-similar asymptotics of a damped beam equation."""

__version__ = "0.1.0"

from .model import (AssumptionError, ModelParams, DerivedParams, derive_params,
                    coeff_eval, small_rates, gamma_eval, r_inverse)
from .profile import (ProfileSolveError, ProfileSolution, FittedAsymptotics,
                      solve_profile, profile_residual, fit_asymptotics)
from .weight import (WeightQuadratureError, WeightFunction, build_weight,
                     weight_inequality_margin, weight_bound_constants)
from .beam_solver import (GridCompatibilityError, NumericalBlowupError,
                          SpatialGrid, PhysicalState, PerturbationSpec,
                          BeamSolver, initialize, apply_spatial_operator,
                          step, evolve)
from .selfsim import (SelfSimilarDomainError, SelfSimilarState, StructuralTerms,
                      to_selfsimilar, structural_terms)
from .energy import (EnergyWeights, EnergySample, DecayReport, weighted_norm,
                     phi, energy_suite, identity_check, fit_decay)
