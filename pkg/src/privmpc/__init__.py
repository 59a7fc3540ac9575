"""Optimal differentially private multi-party computation for single-bit parties."""

from .core import (AccuracyMeasure, FunctionSpec, WeightTensor, and_function, build_weight_tensor,
                   indicator_measure, xor_function)
from .decision import (DecisionRule, acc_average, acc_worstcase, optimal_accuracy,
                       optimal_average_decision, optimal_worstcase_decision)
from .errors import (ConfigurationError, DegenerateBudgetError, InputError, PreconditionError,
                     PrivMPCError, SamplingError, ScaleError, SolverError)
from .geometry import (DualCertificate, certify_average_optimality, certify_worstcase_optimality,
                       corner_decomposition, halfspace_value, polytope_member)
from .protocol import PrivacyBudget, Protocol, check_dp, randomized_response, rank1_factorize

__version__ = "0.1.0"
