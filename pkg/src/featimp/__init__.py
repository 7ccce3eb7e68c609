"""featimp: loss-based feature importance for regression models.

Perturbation methods (PFI, CFI, RFI), refit methods (LOCO, WVIM), and
Shapley-based SAGE, with pluggable conditional samplers, resampling-aware
computation, and statistical inference on the resulting scores.
"""

from .inference import (ci_nadeau_bengio, ci_quantile, ci_raw, cpi_test,
                        hodges_lehmann_interval, lei_test, p_adjust,
                        signed_rank_test)
from .learners import (LEARNERS, Featureless, KnnRegressor, LinearModel,
                       RegressionForest, RegressionTree, RidgeModel,
                       fit_on_task, make_learner, predict_on_task)
from .perturbation import CFI, PFI, RFI
from .refit import LOCO, WVIM
from .resampling import (RESAMPLINGS, CV, Bootstrap, Holdout, ResamplingInstance,
                         Subsampling, make_resampling)
from .sage import ConditionalSAGE, MarginalSAGE, exact_shapley_values
from .samplers import (SAMPLERS, ConditionalGaussianSampler, ConditionalKnnSampler,
                       KnockoffGaussianSampler, MarginalPermutationSampler,
                       make_sampler)
from .scores import ScoresTable
from .simulate import SIMULATORS, load_csv, sim_correlated, sim_independent, sim_peak
from .svg import render_svg
from .task import Measure, Prediction, Task, evaluate_measure, get_measure, obs_losses

__version__ = "0.1.0"

__all__ = [
    "Task", "Prediction", "Measure", "get_measure", "evaluate_measure", "obs_losses",
    "Featureless", "LinearModel", "RidgeModel", "RegressionTree", "RegressionForest",
    "KnnRegressor", "LEARNERS", "make_learner", "fit_on_task", "predict_on_task",
    "Holdout", "CV", "Subsampling", "Bootstrap", "ResamplingInstance", "RESAMPLINGS",
    "make_resampling",
    "MarginalPermutationSampler", "ConditionalGaussianSampler",
    "KnockoffGaussianSampler", "ConditionalKnnSampler", "SAMPLERS", "make_sampler",
    "PFI", "CFI", "RFI", "LOCO", "WVIM", "MarginalSAGE", "ConditionalSAGE",
    "exact_shapley_values", "ScoresTable",
    "ci_quantile", "ci_raw", "ci_nadeau_bengio", "cpi_test", "lei_test", "p_adjust",
    "signed_rank_test", "hodges_lehmann_interval",
    "sim_correlated", "sim_independent", "sim_peak", "SIMULATORS", "load_csv",
    "render_svg",
    "__version__",
]
