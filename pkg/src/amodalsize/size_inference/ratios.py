"""Pairwise height-ratio evidence within one image."""

from dataclasses import dataclass
from typing import Hashable

import numpy as np


@dataclass(frozen=True)
class RatioObservation:
    """``log H_i - log H_j`` measured from one pair of objects."""

    cluster_i: Hashable
    cluster_j: Hashable
    log_ratio: float
    weight: float = 1.0
    index_i: int = -1
    index_j: int = -1


def pairwise_log_ratios(y_b, h, clusters, y_h, eps=1.0, stats=None):
    """Height ratios implied by a known horizon for every object pair.

    For objects resting on a common ground plane,
    ``H_i / H_j = (h_i / h_j) * (y_b_j - y_h) / (y_b_i - y_h)``.

    Objects within ``eps`` pixels of the horizon are skipped, as are pairs
    straddling the horizon (negative ratio) and pairs within one cluster.
    When ``stats`` is a dict, skip counts are added to it under
    ``"near_horizon"``, ``"straddle"`` and ``"same_cluster"``.
    """
    y_b = np.asarray(y_b, dtype=float)
    h = np.asarray(h, dtype=float)
    offset = y_b - y_h
    valid = np.abs(offset) > eps
    if stats is not None:
        n_bad = int(np.sum(~valid))
        n = len(y_b)
        dropped_pairs = n_bad * (n - n_bad) + n_bad * (n_bad - 1) // 2
        stats["near_horizon"] = stats.get("near_horizon", 0) + dropped_pairs
    out = []
    idx = np.flatnonzero(valid)
    for a, i in enumerate(idx):
        for j in idx[a + 1:]:
            if clusters[i] == clusters[j]:
                # same unknown on both sides; carries no information
                if stats is not None:
                    stats["same_cluster"] = stats.get("same_cluster", 0) + 1
                continue
            if np.sign(offset[i]) != np.sign(offset[j]):
                if stats is not None:
                    stats["straddle"] = stats.get("straddle", 0) + 1
                continue
            value = np.log(h[i] / h[j]) + np.log(offset[j] / offset[i])
            out.append(RatioObservation(clusters[i], clusters[j], float(value),
                                        1.0, int(i), int(j)))
    return out
