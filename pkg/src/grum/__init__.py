"""Generalized random utility models with agent and alternative attributes.

MAP inference by Monte-Carlo EM with Gibbs-sampled latent utilities,
Louis-identity Fisher information, and adaptive preference elicitation.
"""

from .elicitation import (CRITERIA, Criterion, ElicitationConfig, ElicitationTrace,
                          RoundRecord, criterion_value, run_elicitation, select_design)
from .errors import (ConditionOneError, DataValidationError, GrumError, NotIdentifiableError,
                     NumericalFailure, SingularDesignError)
from .evaluation import (DiagnosticsReport, check_condition1, check_identifiability, diagnose,
                         kendall_tau, personalized_ranking, social_ranking)
from .experiment import ExperimentConfig, FileSource, run_experiment
from .fisher import InfoMatrix, expected_info, observed_info, psd_repair
from .gibbs import AgentMoments, GibbsConfig, run_chain, sample_truncated_normal
from .io import load_profile, read_parameters, write_parameters, write_profile
from .mcem import FitConfig, FitResult, e_step, fit_map, m_step, surrogate_q
from .model import (AgentPool, AlternativeSet, NoiseModel, Parameters, Prior, Profile,
                    mean_utilities, sample_profile)
from .synthetic import SyntheticSpec, generate_synthetic, preset

__version__ = "0.1.0"
