"""Object size, horizon and camera height inference."""

from .camera import CameraPrior, CameraSolution, ground_residuals, solve_camera
from .estimator import (SizeCluster, SizeEstimator, SizeModel, camera_height_summary,
                        estimate_sizes)
from .gmm import GaussianMixture1D, assign_clusters, gmm_fit_1d
from .log_heights import solve_log_heights
from .ratios import RatioObservation, pairwise_log_ratios

__all__ = [
    "CameraPrior", "CameraSolution", "GaussianMixture1D", "RatioObservation",
    "SizeCluster", "SizeEstimator", "SizeModel", "assign_clusters",
    "camera_height_summary", "estimate_sizes", "gmm_fit_1d", "ground_residuals",
    "pairwise_log_ratios", "solve_camera", "solve_log_heights",
]
