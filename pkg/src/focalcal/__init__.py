"""Focal-loss calibration toolkit.

Losses with analytic gradients, principled gamma policies, the full
calibration-metric stack (ECE family, temperature scaling, bootstrap
intervals, OoD AUROC), and a deterministic toy trainer.
"""

from .gamma import (FLSC_531, FLSC_532, FLSD_53, FLSD_532, GammaPolicy,
                    derive_threshold_policy, epoch_schedule, fixed_gamma,
                    gamma_for_sample, gamma_star, parse_policy_spec,
                    sample_thresholds)
from .losses import (LossGradient, binary_focal_optimum, brier_loss,
                     cross_entropy, focal_loss, grad_ratio, label_smooth,
                     loss_with_grad)
from .metrics import (BinStats, CalibrationReport, EvalSet, LogitSet, adaece,
                      bin_equal_mass, bin_equal_width, bootstrap_ci,
                      brier_score, classwise_ece, compute_report, ece, mce,
                      nll, reliability_data, top_k_accuracy)
from .numerics import (RandomStream, entropy, lambert_w, log_sum_exp,
                       minimize_1d, softmax)
from .ood import ScoredPopulations, auroc, entropy_scores, roc_curve
from .temperature import (TemperatureFit, apply_temperature,
                          fit_temperature_ece, fit_temperature_nll)
from .trainer import (Dataset, EpochLog, LinearModel, MLPModel, SyntheticSpec,
                      TrainConfig, generate_two_cluster,
                      misclassification_confidence_histogram,
                      select_early_stopping, train)

__all__ = [
    "FLSC_531", "FLSC_532", "FLSD_53", "FLSD_532", "GammaPolicy",
    "derive_threshold_policy", "epoch_schedule", "fixed_gamma",
    "gamma_for_sample", "gamma_star", "parse_policy_spec",
    "sample_thresholds",
    "LossGradient", "binary_focal_optimum", "brier_loss", "cross_entropy",
    "focal_loss", "grad_ratio", "label_smooth", "loss_with_grad",
    "BinStats", "CalibrationReport", "EvalSet", "LogitSet", "adaece",
    "bin_equal_mass", "bin_equal_width", "bootstrap_ci", "brier_score",
    "classwise_ece", "compute_report", "ece", "mce", "nll",
    "reliability_data", "top_k_accuracy",
    "RandomStream", "entropy", "lambert_w", "log_sum_exp", "minimize_1d",
    "softmax",
    "ScoredPopulations", "auroc", "entropy_scores", "roc_curve",
    "TemperatureFit", "apply_temperature", "fit_temperature_ece",
    "fit_temperature_nll",
    "Dataset", "EpochLog", "LinearModel", "MLPModel", "SyntheticSpec",
    "TrainConfig", "generate_two_cluster",
    "misclassification_confidence_histogram", "select_early_stopping",
    "train",
]

__version__ = "0.1.0"
