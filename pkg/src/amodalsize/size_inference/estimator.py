"""Alternating estimation of object sizes, horizons and camera heights."""

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_fitted
from ..boxes import raster_to_centered
from ..errors import InputError, NotConvergedWarning, RankDeficiencyError
from .camera import CameraPrior, CameraSolution, ground_residuals, solve_camera
from .gmm import VAR_FLOOR, GaussianMixture1D
from .log_heights import solve_log_heights
from .ratios import pairwise_log_ratios


@dataclass(frozen=True)
class SizeCluster:
    category: str
    cluster_id: int
    log_height: float

    @property
    def height(self):
        return math.exp(self.log_height)


@dataclass
class SizeModel:
    """Fitted size clusters plus the per-category log-height mixtures."""

    clusters: list
    gmm: dict = field(default_factory=dict)

    def log_height(self, category, cluster_id=0):
        for c in self.clusters:
            if c.category == category and c.cluster_id == cluster_id:
                return c.log_height
        raise KeyError((category, cluster_id))

    def category_log_heights(self):
        """Instance-weighted mean cluster log height per category."""
        out = {}
        for cat, comps in self.gmm.items():
            clusters = {c.cluster_id: c.log_height for c in self.clusters if c.category == cat}
            out[cat] = sum(w * clusters[k] for k, (_, _, w) in enumerate(comps) if k in clusters)
            out[cat] /= sum(w for k, (_, _, w) in enumerate(comps) if k in clusters)
        return out


@dataclass
class _Dataset:
    image_ids: list
    # per-image index arrays into the flat instance arrays
    members: list
    y_b: np.ndarray
    h: np.ndarray
    category: list
    record_order: np.ndarray


def _prepare(records):
    if len(records) == 0:
        raise InputError("empty dataset")
    by_image = defaultdict(list)
    for n, r in enumerate(records):
        if r.amodal is None:
            raise InputError(f"instance {n} in image {r.image_id!r} has no amodal box; "
                             "complete the boxes first")
        if r.image_h is None:
            raise InputError(f"instance {n} in image {r.image_id!r} lacks image_h")
        by_image[r.image_id].append(n)
    # canonical order: sorted image ids, then input order within the image
    image_ids = sorted(by_image)
    order = np.array([n for im in image_ids for n in by_image[im]], dtype=int)
    y_b = np.empty(len(order))
    h = np.empty(len(order))
    cats = []
    members = []
    pos = 0
    for im in image_ids:
        idx = by_image[im]
        members.append(np.arange(pos, pos + len(idx)))
        for n in idx:
            r = records[n]
            y_b[pos], h[pos] = raster_to_centered(r.amodal, r.image_w, r.image_h)
            cats.append(r.category)
            pos += 1
    return _Dataset(image_ids, members, y_b, h, cats, order)


class SizeEstimator(BaseEstimator):
    """Veridical object heights from amodal boxes across many images.

    Alternates four steps until the cluster log heights stop moving:

    1. per image, fit horizon and camera height to the ground contacts
       given the current cluster heights;
    2. per image, turn each pair of objects into a log height ratio using
       the fitted horizon;
    3. solve a global least-squares problem for the cluster log heights,
       fixing the free scale with the initial heights;
    4. fit a 1-D Gaussian mixture to each category's instance log heights
       and reassign instances to components.

    Parameters
    ----------
    init_heights : dict
        Category -> rough mean height in meters.  Sets the metric scale.
    n_clusters : int or dict, default=1
        Size clusters per category (dict values override per category).
    tol : float, default=1e-6
        Convergence threshold on the max change of cluster log heights.
    max_iters : int, default=50
    eps_px : float, default=1.0
        Objects closer than this to the horizon give no ratio evidence.
    huber_delta : float, optional
        Enables Huber reweighting in both least-squares steps.  The
        threshold applies in pixels for the camera fit and in log units
        for the height fit.
    prior_enabled : bool, default=False
        Regularize every camera height toward ``prior_h_c0``.  Needed for
        images with a single object.
    prior_h_c0, prior_strength : float
    var_floor : float
        Variance floor of the mixtures, log-meters squared.
    """

    def __init__(self, init_heights=None, n_clusters=1, tol=1e-6, max_iters=50,
                 eps_px=1.0, huber_delta=None, prior_enabled=False, prior_h_c0=1.4,
                 prior_strength=1e-2, var_floor=VAR_FLOOR):
        self.init_heights = init_heights
        self.n_clusters = n_clusters
        self.tol = tol
        self.max_iters = max_iters
        self.eps_px = eps_px
        self.huber_delta = huber_delta
        self.prior_enabled = prior_enabled
        self.prior_h_c0 = prior_h_c0
        self.prior_strength = prior_strength
        self.var_floor = var_floor

    def _k_for(self, category):
        if isinstance(self.n_clusters, dict):
            return int(self.n_clusters.get(category, 1))
        return int(self.n_clusters)

    def fit(self, X, y=None):
        """Fit on a sequence of :class:`~amodalsize.boxes.InstanceRecord`.

        Every record needs an amodal box and ``image_h``.
        """
        data = _prepare(list(X))
        init = self.init_heights or {}
        missing = sorted(set(data.category) - set(init))
        if missing:
            raise InputError(f"no initial height for categories: {missing}")
        for cat, v in init.items():
            if not (v > 0 and math.isfinite(v)):
                raise InputError(f"initial height for {cat!r} must be positive, got {v!r}")
        if np.any(data.h <= 0):
            raise InputError("all image heights must be positive")

        categories = sorted(set(data.category))
        cat_arr = np.array(data.category, dtype=object)
        prior = (CameraPrior(self.prior_h_c0, self.prior_strength)
                 if self.prior_enabled else None)

        # all instances start in cluster 0 of their category
        assign = np.zeros(len(data.h), dtype=int)
        log_H = {(c, 0): math.log(init[c]) for c in categories}
        cameras = {}
        trace = []
        self.skipped_pairs_ = {}
        converged = False
        it = 0
        for it in range(1, self.max_iters + 1):
            keys = [(data.category[n], assign[n]) for n in range(len(assign))]
            H_inst = np.exp([log_H[k] for k in keys])

            loss_before = self._total_loss(data, H_inst, cameras) if cameras else float("nan")
            cameras, observations, stats = self._collect(data, keys, H_inst, prior)
            if not observations:
                raise RankDeficiencyError(
                    "globally underdetermined: no pairwise size evidence in any image")
            loss = self._total_loss(data, H_inst, cameras)

            # gauge anchor: instance-weighted mean of each component at the
            # user's initial heights
            counts = defaultdict(float)
            for k in keys:
                counts[k] += 1.0
            anchor = {k: math.log(init[k[0]]) for k in log_H}
            solved = solve_log_heights(observations, anchor, self.huber_delta,
                                       anchor_weights=counts)
            inst_log = self._instance_log_heights(data, keys, solved, observations)

            new_assign, gmm, new_log_H = self._recluster(categories, cat_arr, inst_log,
                                                         solved, assign)
            change = max((abs(solved[k] - log_H[k]) for k in solved if k in log_H),
                         default=0.0)
            reassigned = int(np.sum(new_assign != assign))
            trace.append({"iteration": it, "loss_before_camera": loss_before,
                          "loss": loss, "max_change": change,
                          "n_observations": len(observations), "reassigned": reassigned})
            log_H, assign = new_log_H, new_assign
            self.skipped_pairs_ = stats
            if change < self.tol and reassigned == 0:
                converged = True
                break

        if not converged:
            warnings.warn(f"size estimation did not converge in {self.max_iters} iterations "
                          f"(last change {trace[-1]['max_change']:.3g})",
                          NotConvergedWarning, stacklevel=2)

        clusters = [SizeCluster(c, k, v) for (c, k), v in sorted(log_H.items())]
        self.size_model_ = SizeModel(clusters, gmm)
        # cameras consistent with the final heights
        keys = [(data.category[n], assign[n]) for n in range(len(assign))]
        H_final = np.exp([log_H[k] for k in keys])
        cameras, _, _ = self._collect(data, keys, H_final, prior)
        self.final_loss_ = self._total_loss(data, H_final, cameras)
        self.cameras_ = [cameras[im] for im in data.image_ids if im in cameras]
        # results back in input order
        inv = np.empty_like(data.record_order)
        inv[data.record_order] = np.arange(len(inv))
        self.assignments_ = assign[inv]
        self.instance_log_heights_ = inst_log[inv]
        self.relative_depths_ = (H_final / data.h)[inv]
        self.loss_trace_ = trace
        self.n_iter_ = it
        self.converged_ = converged
        return self

    def _collect(self, data, keys, H_inst, prior):
        cameras = {}
        observations = []
        stats = {"near_horizon": 0, "straddle": 0, "same_cluster": 0,
                 "unsolved_images": 0}
        for im, idx in zip(data.image_ids, data.members):
            try:
                cam = solve_camera(data.y_b[idx], data.h[idx], H_inst[idx], prior,
                                   self.huber_delta, image_id=im)
            except RankDeficiencyError:
                stats["unsolved_images"] += 1
                continue
            cameras[im] = cam
            obs = pairwise_log_ratios(data.y_b[idx], data.h[idx],
                                      [keys[n] for n in idx], cam.y_h,
                                      self.eps_px, stats)
            for o in obs:
                # local pair indices -> flat instance indices
                observations.append(type(o)(o.cluster_i, o.cluster_j, o.log_ratio,
                                            o.weight, int(idx[o.index_i]),
                                            int(idx[o.index_j])))
        return cameras, observations, stats

    @staticmethod
    def _total_loss(data, H_inst, cameras):
        total = 0.0
        for im, idx in zip(data.image_ids, data.members):
            cam = cameras.get(im)
            if cam is None:
                continue
            r = ground_residuals(data.y_b[idx], data.h[idx], H_inst[idx], cam.h_c, cam.y_h)
            total += float(r @ r)
        return total

    @staticmethod
    def _instance_log_heights(data, keys, solved, observations):
        """Average of the heights each instance's pairs imply for it."""
        sums = np.zeros(len(keys))
        counts = np.zeros(len(keys))
        for o in observations:
            sums[o.index_i] += solved[o.cluster_j] + o.log_ratio
            counts[o.index_i] += 1
            sums[o.index_j] += solved[o.cluster_i] - o.log_ratio
            counts[o.index_j] += 1
        fallback = np.array([solved[k] for k in keys])
        return np.where(counts > 0, sums / np.maximum(counts, 1), fallback)

    def _recluster(self, categories, cat_arr, inst_log, solved, assign):
        new_assign = np.empty_like(assign)
        gmm = {}
        new_log_H = {}
        for cat in categories:
            mask = cat_arr == cat
            k = self._k_for(cat)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                gm = GaussianMixture1D(k, var_floor=self.var_floor).fit(inst_log[mask])
            gmm[cat] = gm.components_
            if gm.n_components_ == 1:
                new_assign[mask] = 0
                # a single cluster keeps its least-squares height
                values = [solved[key] for key in solved if key[0] == cat]
                counts = [np.sum(assign[mask] == key[1]) for key in solved if key[0] == cat]
                new_log_H[(cat, 0)] = float(np.average(values, weights=counts))
            else:
                new_assign[mask] = gm.predict(inst_log[mask])
                stable = np.array_equal(new_assign[mask], assign[mask])
                for j, m in enumerate(gm.means_):
                    # mixture means seed new memberships; stable ones keep
                    # their least-squares heights
                    key = (cat, j)
                    new_log_H[key] = float(solved[key]) if stable and key in solved else float(m)
        return new_assign, gmm, new_log_H

    def predict(self, X=None):
        """Relative depths ``d / f`` of the fitted instances (input order)."""
        check_fitted(self, "relative_depths_")
        return self.relative_depths_

    def absolute_depths(self, focal_px):
        """Depths in meters given per-instance focal lengths in pixels."""
        check_fitted(self, "relative_depths_")
        return np.asarray(focal_px, dtype=float) * self.relative_depths_


def estimate_sizes(records, init_heights, **params):
    """Functional wrapper around :class:`SizeEstimator`.

    Returns ``(size_model, cameras, assignments, relative_depths)``.
    """
    est = SizeEstimator(init_heights=init_heights, **params).fit(records)
    return est.size_model_, est.cameras_, est.assignments_, est.relative_depths_


def camera_height_summary(solutions, bins=20):
    """Median camera height and a fixed-width histogram.

    Even counts take the lower of the two middle values.  Returns
    ``(median, (counts, edges))``.
    """
    values = sorted(s.h_c if isinstance(s, CameraSolution) else float(s) for s in solutions)
    if not values:
        raise InputError("no camera solutions")
    median = values[(len(values) - 1) // 2]
    counts, edges = np.histogram(values, bins=bins)
    return median, (counts, edges)
