"""Truncated signatures of time-extended paths, stopped lifts and L^p signature regression."""

__version__ = "0.1.0"

from .brownian import BrownianConfig, expected_signature_closed_form, simulate_bm
from .config import ExperimentConfig
from .norms import WeightParams, exp_moment_estimate, homogeneous_rough_norm, weight_psi
from .path import PathGrid, SignatureTrajectory, signature_over, signature_trajectory, time_extend
from .regress import FitReport, LinearFunctional, fit_lp, fit_nonanticipative
from .sde import closed_form_target, euler_maruyama, gbm_spec, ito_to_stratonovich, ou_spec
from .stopped import StoppedPath, lambda_distance, stop_path, stopped_signature
from .tensor import TruncatedTensor, grouplike_defect, shuffle_words, tensor_exp, tensor_log, tensor_mul

__all__ = [
    "BrownianConfig",
    "ExperimentConfig",
    "FitReport",
    "LinearFunctional",
    "PathGrid",
    "SignatureTrajectory",
    "StoppedPath",
    "TruncatedTensor",
    "WeightParams",
    "closed_form_target",
    "euler_maruyama",
    "exp_moment_estimate",
    "expected_signature_closed_form",
    "fit_lp",
    "fit_nonanticipative",
    "gbm_spec",
    "grouplike_defect",
    "homogeneous_rough_norm",
    "ito_to_stratonovich",
    "lambda_distance",
    "ou_spec",
    "shuffle_words",
    "signature_over",
    "signature_trajectory",
    "simulate_bm",
    "stop_path",
    "stopped_signature",
    "tensor_exp",
    "tensor_log",
    "tensor_mul",
    "time_extend",
    "weight_psi",
]
