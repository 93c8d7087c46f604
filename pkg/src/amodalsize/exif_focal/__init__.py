"""EXIF focal lengths, focal ratios and focal-length classes."""

from .bins import (FocalBinner, chance_rankings, eval_topk, focal_pixels, focal_ratio,
                   kmeans_1d, log_focal_ratio, mode_ranking, quantize, rank_scores)
from .exif import ExifError, FocalMetadata, find_tiff, parse_exif_focal

__all__ = [
    "ExifError", "FocalBinner", "FocalMetadata", "chance_rankings", "eval_topk",
    "find_tiff", "focal_pixels", "focal_ratio", "kmeans_1d", "log_focal_ratio",
    "mode_ranking", "parse_exif_focal", "quantize", "rank_scores",
]
