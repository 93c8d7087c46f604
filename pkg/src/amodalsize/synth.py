"""Synthetic scenes with known cameras and object sizes.

Used as a test oracle: scenes are sampled from explicit priors, rendered
to amodal boxes under either the exact or the small-tilt projection, and
optionally occluded, truncated or jittered.
"""

import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .boxes import BoundingBox, InstanceRecord, clip_box
from .errors import InputError
from .geometry import (CameraModel, ground_point_approx, ground_point_exact,
                       top_point_approx, top_point_exact)
from .size_inference.log_heights import constraint_components

DEFAULT_CATEGORIES = {
    "person": (math.log(1.70), 0.0),
    "car": (math.log(1.50), 0.0),
    "chair": (math.log(0.90), 0.0),
    "diningtable": (math.log(0.75), 0.0),
    "bottle": (math.log(0.30), 0.0),
}


@dataclass(frozen=True)
class SceneObject:
    category: str
    H: float
    d: float
    x_center: float
    aspect: float = 1.0


@dataclass(frozen=True)
class SceneSpec:
    image_id: str
    f: float
    h_c: float
    theta_x: float
    image_w: float
    image_h: float
    objects: tuple = ()

    def __post_init__(self):
        if self.f <= 0 or self.h_c <= 0:
            raise InputError("scene needs f > 0 and h_c > 0")
        for o in self.objects:
            if o.d <= 0 or o.H <= 0:
                raise InputError("scene objects need H > 0 and d > 0")

    @property
    def camera(self):
        return CameraModel(self.f, self.theta_x, self.h_c)

    def horizon(self, projection="approx"):
        if projection == "exact":
            return self.f * math.tan(self.theta_x)
        return self.f * self.theta_x


@dataclass(frozen=True)
class CameraPriors:
    f_range: tuple = (500.0, 500.0)
    h_c_median: float = 1.4
    h_c_log_sd: float = 0.2
    theta_range: tuple = (0.0, 0.0)
    image_w: float = 1000.0
    image_h: float = 1000.0


@dataclass(frozen=True)
class LayoutPriors:
    min_objects: int = 5
    max_objects: int = 8
    d_range: tuple = (3.0, 30.0)
    min_categories: int = 2


@dataclass(frozen=True)
class OcclusionSpec:
    p_occlude: float = 0.5
    crop_fraction_range: tuple = (0.4, 0.4)
    sides: tuple = ("bottom",)
    truncate_at_border: bool = True

    def __post_init__(self):
        lo, hi = self.crop_fraction_range
        if not (0 <= lo <= hi < 1):
            raise InputError("crop fractions must satisfy 0 <= lo <= hi < 1")
        if not 0 <= self.p_occlude <= 1:
            raise InputError("p_occlude must be a probability")
        bad = set(self.sides) - {"bottom", "top", "left", "right"}
        if bad or not self.sides:
            raise InputError(f"invalid occlusion sides {self.sides!r}")


def image_rng(seed, index):
    """Independent generator per (seed, image index)."""
    return np.random.default_rng([int(seed), int(index)])


def _as_prior(value):
    mean, var = value
    if var < 0:
        raise InputError("prior variance must be >= 0")
    return float(mean), float(var)


def sample_dataset(seed, n_images, category_priors=None, camera_priors=None,
                   layout_priors=None):
    """Sample ``n_images`` scenes; identical seeds give identical scenes.

    ``category_priors`` maps category -> ``(mean log height, variance)``;
    heights are log-normal.
    """
    cats = dict(category_priors or DEFAULT_CATEGORIES)
    cam = camera_priors or CameraPriors()
    lay = layout_priors or LayoutPriors()
    if n_images < 1:
        raise InputError("n_images must be >= 1")
    if lay.min_objects < 1 or lay.max_objects < lay.min_objects:
        raise InputError("need 1 <= min_objects <= max_objects")
    if lay.min_categories > min(len(cats), lay.min_objects):
        raise InputError("min_categories exceeds available categories or objects")
    names = sorted(cats)
    priors = [_as_prior(cats[c]) for c in names]

    scenes = []
    width = len(str(n_images - 1))
    for i in range(n_images):
        rng = image_rng(seed, i)
        f = rng.uniform(*cam.f_range)
        h_c = cam.h_c_median * math.exp(cam.h_c_log_sd * rng.standard_normal())
        theta = rng.uniform(*cam.theta_range)
        n_obj = int(rng.integers(lay.min_objects, lay.max_objects + 1))
        forced = rng.choice(len(names), size=lay.min_categories, replace=False)
        rest = rng.integers(0, len(names), size=n_obj - lay.min_categories)
        chosen = np.concatenate([forced, rest])
        objects = []
        for c in chosen:
            mean, var = priors[c]
            H = math.exp(mean + math.sqrt(var) * rng.standard_normal())
            d = rng.uniform(*lay.d_range)
            x = rng.uniform(0.0, cam.image_w)
            objects.append(SceneObject(names[c], H, d, x))
        scenes.append(SceneSpec(f"img{i:0{width}d}", f, h_c, theta,
                                cam.image_w, cam.image_h, tuple(objects)))
    return scenes


def render_annotations(scene, projection="approx", return_dropped=False):
    """Amodal boxes for every object in ``scene``.

    Objects whose box lies entirely outside a guard region four times the
    image size (same center) are dropped.
    """
    if projection not in ("approx", "exact"):
        raise InputError(f"projection must be 'approx' or 'exact', got {projection!r}")
    cam = scene.camera
    records = []
    dropped = 0
    W, Hi = scene.image_w, scene.image_h
    for k, obj in enumerate(scene.objects):
        if projection == "approx":
            y_b = ground_point_approx(cam, obj.d)
            y_t = top_point_approx(cam, obj.H, obj.d)
        else:
            y_b = ground_point_exact(cam, obj.d)
            y_t = top_point_exact(cam, obj.H, obj.d)
        h = y_t - y_b
        w = obj.aspect * scene.f * obj.H / obj.d
        box = BoundingBox(obj.x_center - w / 2.0, Hi / 2.0 - y_t, w, h)
        if (box.right < -1.5 * W or box.x > 2.5 * W
                or box.bottom < -1.5 * Hi or box.y > 2.5 * Hi):
            dropped += 1
            continue
        records.append(InstanceRecord(scene.image_id, obj.category, box, box,
                                      instance=k, image_w=W, image_h=Hi))
    if return_dropped:
        return records, dropped
    return records


def jitter(records, sigma, seed):
    """Add N(0, sigma^2) pixel noise to every box coordinate.

    Applied to the amodal box; the modal box gets the same perturbation
    while it is still identical to the amodal one.
    """
    if sigma <= 0:
        return list(records)
    rng = np.random.default_rng([int(seed), 0x6A17])
    out = []
    for r in records:
        noise = sigma * rng.standard_normal(4)
        base = r.amodal if r.amodal is not None else r.modal
        vals = np.array(base.to_list()) + noise
        vals[2:] = np.maximum(vals[2:], 1e-3)
        new = BoundingBox(*map(float, vals))
        modal = new if r.modal == base else r.modal
        out.append(replace(r, modal=modal, amodal=new if r.amodal is not None else None))
    return out


def _crop(box, side, frac):
    if side == "bottom":
        return BoundingBox(box.x, box.y, box.w, box.h * (1 - frac))
    if side == "top":
        return BoundingBox(box.x, box.y + frac * box.h, box.w, box.h * (1 - frac))
    if side == "left":
        return BoundingBox(box.x + frac * box.w, box.y, box.w * (1 - frac), box.h)
    return BoundingBox(box.x, box.y, box.w * (1 - frac), box.h)


def occlude(records, spec, seed, return_dropped=False):
    """Crop modal boxes to simulate occlusion and border truncation.

    Amodal boxes are never changed.  With probability ``p_occlude`` one
    side is cut by a uniformly drawn fraction and the record is flagged
    occluded.  With ``truncate_at_border`` the modal box is then clipped to
    the image and flagged truncated if that changed it; records with
    nothing left inside the image are dropped.
    """
    out = []
    dropped = 0
    for r in records:
        # one stream per record so record order does not couple images
        key = zlib.crc32(f"{r.image_id}\x00{r.instance}".encode())
        rng = np.random.default_rng([int(seed), key])
        u, side_idx, frac = rng.random(), rng.integers(len(spec.sides)), rng.uniform(
            *spec.crop_fraction_range)
        modal, occluded, truncated = r.modal, r.occluded, r.truncated
        if u < spec.p_occlude and frac > 0:
            modal = _crop(modal, spec.sides[side_idx], frac)
            occluded = True
        if spec.truncate_at_border and r.image_w is not None and r.image_h is not None:
            clipped = clip_box(modal, r.image_w, r.image_h)
            if clipped is None:
                dropped += 1
                continue
            if clipped != modal:
                truncated = True
            modal = clipped
        out.append(replace(r, modal=modal, occluded=occluded, truncated=truncated))
    if return_dropped:
        return out, dropped
    return out


def truth_instances(scenes):
    """``{(image_id, instance): (category, H, d)}`` for every scene object."""
    return {(s.image_id, k): (o.category, o.H, o.d)
            for s in scenes for k, o in enumerate(s.objects)}


@dataclass
class OracleReport:
    log_height_residuals: dict
    max_log_height_error: float
    median_log_height_error: float
    max_rel_height_error: float
    median_rel_height_error: float
    horizon_errors: np.ndarray
    h_c_errors: np.ndarray
    h_c_ratio_median: float
    gauge_shift: dict = field(default_factory=dict)

    @property
    def max_horizon_error(self):
        return float(np.max(self.horizon_errors)) if self.horizon_errors.size else 0.0

    @property
    def median_horizon_error(self):
        return float(np.median(self.horizon_errors)) if self.horizon_errors.size else 0.0

    @property
    def max_h_c_error(self):
        return float(np.max(self.h_c_errors)) if self.h_c_errors.size else 0.0


def true_category_log_heights(scenes):
    """Mean true log height per category."""
    acc = {}
    for s in scenes:
        for o in s.objects:
            acc.setdefault(o.category, []).append(math.log(o.H))
    return {c: float(np.mean(v)) for c, v in acc.items()}


def oracle_compare(truth, size_model, cameras, projection="approx",
                   recovered_log_heights: Optional[dict] = None):
    """Compare recovered sizes and cameras with the generating scenes.

    Recovered category log heights are shifted by the mean difference to
    truth within each group of co-occurring categories before residuals
    are taken; horizons and camera heights are compared as is.
    """
    scenes = {s.image_id: s for s in truth}
    cam_ids = {c.image_id for c in cameras}
    unknown = cam_ids - set(scenes)
    if unknown:
        raise InputError(f"recovered cameras for unknown images: {sorted(unknown)[:5]}")

    true_log = true_category_log_heights(truth)
    rec_log = recovered_log_heights or size_model.category_log_heights()
    cats = sorted(true_log)
    missing = [c for c in cats if c not in rec_log]
    if missing:
        raise InputError(f"categories missing from recovered model: {missing}")

    index = {c: i for i, c in enumerate(cats)}
    edges = []
    for s in truth:
        present = sorted({index[o.category] for o in s.objects})
        edges += [(present[0], j) for j in present[1:]]
    labels = constraint_components(len(cats), edges)

    residuals = {}
    shifts = {}
    for comp in np.unique(labels):
        members = [c for c in cats if labels[index[c]] == comp]
        shift = float(np.mean([rec_log[c] - true_log[c] for c in members]))
        for c in members:
            residuals[c] = rec_log[c] - shift - true_log[c]
            shifts[c] = shift
    abs_res = np.abs(list(residuals.values()))
    rel = np.expm1(abs_res)

    hz, hc, ratio = [], [], []
    for c in cameras:
        s = scenes[c.image_id]
        hz.append(abs(c.y_h - s.horizon(projection)))
        hc.append(abs(c.h_c - s.h_c))
        ratio.append(c.h_c / s.h_c)
    return OracleReport(
        log_height_residuals=residuals,
        max_log_height_error=float(abs_res.max()),
        median_log_height_error=float(np.median(abs_res)),
        max_rel_height_error=float(rel.max()),
        median_rel_height_error=float(np.median(rel)),
        horizon_errors=np.array(hz),
        h_c_errors=np.array(hc),
        h_c_ratio_median=float(np.median(ratio)) if ratio else float("nan"),
        gauge_shift=shifts,
    )


def render_dataset(scenes, projection="approx"):
    records = []
    for s in scenes:
        records += render_annotations(s, projection)
    return records
