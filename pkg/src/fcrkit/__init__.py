"""Interval estimation for parameters selected out of many parallel populations.

Spike-and-slab empirical Bayes model: theta_i is exactly 0 with probability
1 - p or Normal(0, tau2) with probability p, and X_i | theta_i is
Normal(theta_i, sigma2) with sigma2 known.  The package builds post-selection
regions that control the Bayes false coverage rate, the Bonferroni-Bayes
simultaneous baseline, and the Benjamini-Yekutieli frequentist baseline, and
evaluates them by seeded Monte Carlo.
"""

from .backend import available_backends, backend_name
from .estimation import FitResult, fit_marginal_mle, fit_moments
from .mc import EvalReport, Scenario, compare_scenarios, replicate_draws, run_scenario
from .model import (
    MixturePrior,
    Posterior,
    marginal_pdf,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    posterior_at,
    posterior_region_mass,
)
from .procedures import IntervalReport, by_intervals, eb_fcr_intervals, qh_intervals
from .regions import (
    CredibleRegion,
    LossParams,
    bayes_region,
    credible_region_at_level,
    expected_loss,
    oracle_region,
)
from .selection import Batch, BHLevel, SelectionResult, Threshold, TopK, select

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BHLevel",
    "CredibleRegion",
    "EvalReport",
    "FitResult",
    "IntervalReport",
    "LossParams",
    "MixturePrior",
    "Posterior",
    "Scenario",
    "SelectionResult",
    "Threshold",
    "TopK",
    "available_backends",
    "backend_name",
    "bayes_region",
    "by_intervals",
    "compare_scenarios",
    "credible_region_at_level",
    "eb_fcr_intervals",
    "expected_loss",
    "fit_marginal_mle",
    "fit_moments",
    "marginal_pdf",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "oracle_region",
    "posterior_at",
    "posterior_region_mass",
    "qh_intervals",
    "replicate_draws",
    "run_scenario",
    "select",
    "__version__",
]
