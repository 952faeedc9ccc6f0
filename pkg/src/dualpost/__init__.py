"""Post-processing of probabilistic classifiers under expectation constraints.

Given per-class probability estimates, the package builds randomized
decision rules that trade expected loss against constraint budgets
(abstention rates, group fairness gaps, churn against a baseline) by
minimizing an entropically smoothed dual with stochastic first-order
methods, and certifies the result from computable residuals.
"""

__version__ = "0.1.0"

from .core import gradient_mapping, lse, norm_1_to_2, positive_part, softmax
from .problem import (
    ActionSpace,
    ConstraintOracle,
    DualObjective,
    FiniteInstance,
    GibbsClassifier,
    LossOracle,
    OracleError,
    Problem,
    SampleStream,
)

__all__ = [
    "lse",
    "softmax",
    "positive_part",
    "gradient_mapping",
    "norm_1_to_2",
    "ActionSpace",
    "LossOracle",
    "ConstraintOracle",
    "OracleError",
    "Problem",
    "GibbsClassifier",
    "DualObjective",
    "SampleStream",
    "FiniteInstance",
    "__version__",
]
