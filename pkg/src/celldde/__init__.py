"""Numerical laboratory for a stem-cell / mature-cell delay equation whose
delay is defined by a maturation threshold."""

__version__ = "0.1.0"

from .errors import (CellDDEError, ConfigError, DegenerateCoefficient, DomainError,
                     GeometryInfeasible, NegativityIntroduced, NoConvergence, NoCrossing,
                     NonFiniteState, ParseError, PathEscape, ValidationError)
from .segments import HistorySegment, StatePair, constant, from_function
from .ingredients import (DeathSpec, ExpDecayG, Geometry, HillG, HypothesisReport,
                          IngredientSet, MaturationSpec, SamplingPlan, StemParams, UnitG,
                          check_hypotheses, compute_R_minus, derive_geometry, gamma_eval,
                          q_eval)
from .delay_kernel import DelaySolution, F_eval, KernelConfig, j_eval, solve_maturation
from .integrator import (InitialCondition, SolverConfig, Trajectory, convergence_study,
                         integrate, make_admissible, verify_voc, verify_w_closed_form)
from .analysis import (classify_regime, detect_ultimate_bound, estimate_gas,
                       estimate_persistence, find_equilibria, find_q_zeros, make_ensemble,
                       nakata_limit_compare, positive_equilibrium)
