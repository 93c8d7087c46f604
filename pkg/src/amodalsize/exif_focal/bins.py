"""Focal-length ratios and their discretization into classes."""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .._validation import as_float_array, check_fitted, check_positive
from ..errors import InputError

FULL_FRAME_WIDTH_MM = 36.0


def focal_ratio(meta, sensor_width_mm=None):
    """Focal length over sensor width.

    Uses ``sensor_width_mm`` when given, otherwise the 35 mm-equivalent
    focal length over the 36 mm full-frame width.
    """
    if sensor_width_mm is not None:
        check_positive(sensor_width_mm, "sensor_width_mm")
        return meta.focal_mm / sensor_width_mm
    if meta.focal_35mm_equiv:
        return meta.focal_35mm_equiv / FULL_FRAME_WIDTH_MM
    raise InputError("need a 35mm-equivalent focal length or a sensor width")


def focal_pixels(ratio, image_width_px):
    check_positive(ratio, "ratio")
    check_positive(image_width_px, "image_width_px")
    return ratio * image_width_px


def _lloyd(x, centers, max_iter, history):
    """1-D Lloyd iterations on sorted ``x``; returns centers and labels."""
    k = centers.size
    labels = None
    for _ in range(max_iter):
        bounds = (centers[1:] + centers[:-1]) / 2.0
        labels = np.searchsorted(bounds, x, side="left")
        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            centers = _repair(x, labels, centers, counts)
            history.append(_inertia(x, centers))
            continue
        new = np.bincount(labels, weights=x, minlength=k) / counts
        new.sort()
        history.append(_inertia(x, new))
        if np.array_equal(new, centers):
            break
        centers = new
    bounds = (centers[1:] + centers[:-1]) / 2.0
    labels = np.searchsorted(bounds, x, side="left")
    return centers, labels


def _repair(x, labels, centers, counts):
    """Move each empty center onto the far end of the widest cluster."""
    centers = centers.copy()
    for e in np.flatnonzero(counts == 0):
        spans = [np.ptp(x[labels == j]) if counts[j] > 1 else -1.0
                 for j in range(centers.size)]
        widest = int(np.argmax(spans))
        members = x[labels == widest]
        centers[e] = members.max()
        labels = np.where((labels == widest) & (x == members.max()), e, labels)
        counts = np.bincount(labels, minlength=centers.size)
    return np.sort(centers)


def _inertia(x, centers):
    return float(np.min((x[:, None] - centers[None, :]) ** 2, axis=1).sum())


class FocalBinner(TransformerMixin, BaseEstimator):
    """k-means on log focal ratios in one dimension.

    Initial centers are spread over the sorted distinct values at evenly
    spaced quantiles, so the result is deterministic.  ``transform`` maps
    values to the index of their nearest center (ties to the lower one).

    Attributes
    ----------
    centers_ : ndarray of shape (n_bins,)
        Strictly increasing.
    boundaries_ : ndarray of shape (n_bins - 1,)
        Midpoints between adjacent centers.
    inertia_history_ : list of float
    """

    def __init__(self, n_bins=10, max_iter=300):
        self.n_bins = n_bins
        self.max_iter = max_iter

    def fit(self, X, y=None):
        x = np.sort(as_float_array(np.ravel(X), "values"))
        k = int(self.n_bins)
        distinct = np.unique(x)
        if k < 2:
            raise InputError("n_bins must be >= 2")
        if distinct.size < k:
            raise InputError(f"{distinct.size} distinct values cannot fill {k} bins")
        pos = np.floor((np.arange(k) + 0.5) * distinct.size / k).astype(int)
        centers = distinct[pos]
        self.inertia_history_ = [_inertia(x, centers)]
        centers, labels = _lloyd(x, centers, self.max_iter, self.inertia_history_)
        self.centers_ = centers
        self.boundaries_ = (centers[1:] + centers[:-1]) / 2.0
        self.inertia_ = _inertia(x, centers)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_fitted(self, "centers_")
        x = np.ravel(np.asarray(X, dtype=float))
        return np.searchsorted(self.boundaries_, x, side="left")

    def predict(self, X):
        return self.transform(X)


def kmeans_1d(values, k=10, max_iter=300):
    """Fit and return a :class:`FocalBinner` with ``k`` bins."""
    return FocalBinner(k, max_iter).fit(values)


def quantize(log_ratio, model):
    """Bin index of one log ratio under a fitted model."""
    return int(model.transform([log_ratio])[0])


def rank_scores(scores):
    """Bins ordered by descending score per row; ties keep lower index first."""
    scores = np.asarray(scores, dtype=float)
    return np.argsort(-scores, axis=1, kind="stable")


def eval_topk(rankings, truth, k_list=(1, 3, 5)):
    """Top-k misclassification rate for each ``k`` in ``k_list``.

    ``rankings`` is an (n_images, n_bins) array of bin indices, best first
    (see :func:`rank_scores`).
    """
    rankings = np.asarray(rankings)
    truth = np.asarray(truth)
    if rankings.ndim != 2 or rankings.shape[0] != truth.shape[0]:
        raise InputError("rankings must be (n_images, n_bins) matching truth")
    if rankings.shape[0] == 0:
        raise InputError("no images to evaluate")
    out = {}
    for k in k_list:
        if k > rankings.shape[1]:
            raise InputError(f"ranking has {rankings.shape[1]} bins, fewer than k={k}")
        hit = np.any(rankings[:, :k] == truth[:, None], axis=1)
        out[k] = float(np.count_nonzero(~hit) / hit.size)
    return out


def chance_rankings(n_images, n_bins, seed):
    """Uniformly random bin permutations, one per image."""
    rng = np.random.default_rng(seed)
    return rng.permuted(np.tile(np.arange(n_bins), (n_images, 1)), axis=1)


def mode_ranking(train_bins, n_bins):
    """Bins sorted by training frequency, most frequent first."""
    counts = np.bincount(np.asarray(train_bins, dtype=int), minlength=n_bins)
    return np.argsort(-counts, kind="stable")


def log_focal_ratio(meta, sensor_width_mm=None):
    return math.log(focal_ratio(meta, sensor_width_mm))
