"""Spectral toolkit for a detailed-balanced master equation with exponential rates."""

from .basis import (BiorthogonalSystem, LeftEigenvector, RightEigenvector, biorthogonality_defect,
                    build_system, factorization_residual, gram_diagnostic, left_eigenvector,
                    projection_crosscheck, right_eigenvector)
from .errors import (ConditioningError, ConfigError, ConsistencyError, DegenerateBasisError,
                     DomainError, PoleError, SolverError, StiffnessError)
from .evolution import (DecayReport, Trajectory, cross_validate, decay_fit, lyapunov_estimate,
                        ode_propagate, positivity_conservation_check, spectral_propagate)
from .finite import FiniteModelC, finite_decay_check, finite_spectrum, perron_radius
from .kernels import BACKEND
from .model import (LevelSpec, ProbabilityVector, TruncatedModel, assemble_generator,
                    detailed_balance_residual, gap_condition_check, gibbs_vector, partition_sum, rate,
                    tail_bound, trace_identity_residual, truncate)
from .secular import (EigenvalueRecord, PolePoint, SecularContext, Spectrum,
                      alt_characterization_residual, secular_derivative, secular_eval,
                      solve_eigenvalue, solve_spectrum, spectrum_of)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
