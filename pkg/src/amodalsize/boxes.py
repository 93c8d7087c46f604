"""Bounding-box algebra for amodal completion.

Boxes are ``(x, y, w, h)`` in raster convention: ``(x, y)`` is the
top-left corner and y grows downward.  Nothing here rounds to pixels.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator

from .errors import InputError

SUBSETS = ("all", "trunc_occ", "trunc", "occ")


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise InputError(f"box {name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise InputError(f"box must have positive size, got w={self.w}, h={self.h}")

    @classmethod
    def from_list(cls, values):
        if values is None or len(values) != 4:
            raise InputError(f"box must have 4 coordinates, got {values!r}")
        return cls(*(float(v) for v in values))

    def to_list(self):
        return [self.x, self.y, self.w, self.h]

    @property
    def bottom(self):
        return self.y + self.h

    @property
    def right(self):
        return self.x + self.w

    @property
    def area(self):
        return self.w * self.h


class AmodalTargets(NamedTuple):
    t1: float
    t2: float
    t3: float
    t4: float


@dataclass(frozen=True)
class InstanceRecord:
    """One annotated object in one image.

    ``image_w``/``image_h`` and ``instance`` are optional extras: the size
    estimator needs image dimensions to center ordinates, and ``instance``
    keys an object within its image.
    """

    image_id: str
    category: str
    modal: BoundingBox
    amodal: Optional[BoundingBox] = None
    truncated: bool = False
    occluded: bool = False
    instance: Optional[int] = None
    image_w: Optional[float] = None
    image_h: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def with_amodal(self, amodal, **extra):
        merged = dict(self.extra)
        merged.update(extra)
        return replace(self, amodal=amodal, extra=merged)


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    category: str
    score: float
    modal: BoundingBox
    amodal_pred: BoundingBox

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InputError(f"detection score must be finite, got {self.score!r}")


def encode_targets(modal, amodal):
    """Regression targets taking ``modal`` to ``amodal``.

    The x targets are the left and right edge offsets normalized by the
    modal width; the y targets are the top offset and the height change
    normalized by the modal height.
    """
    x, y, w, h = modal.x, modal.y, modal.w, modal.h
    xs, ys, ws, hs = amodal.x, amodal.y, amodal.w, amodal.h
    return AmodalTargets(
        (x - xs) / w,
        (y - ys) / h,
        ((x + w) - (xs + ws)) / w,
        (h - hs) / h,
    )


def decode_targets(modal, targets):
    t1, t2, t3, t4 = targets
    x, y, w, h = modal.x, modal.y, modal.w, modal.h
    xs = x - t1 * w
    ys = y - t2 * h
    right = (x + w) - t3 * w
    hs = h - t4 * h
    ws = right - xs
    if not (ws > 0 and hs > 0):
        raise InputError(f"decoded box has non-positive size (w={ws}, h={hs})")
    return BoundingBox(xs, ys, ws, hs)


def intersection(a, b):
    iw = min(a.right, b.right) - max(a.x, b.x)
    ih = min(a.bottom, b.bottom) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a, b):
    if a == b:
        return 1.0
    inter = intersection(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def _subset_filter(name):
    filters = {
        "all": lambda r: True,
        "trunc": lambda r: r.truncated,
        "occ": lambda r: r.occluded,
        "trunc_occ": lambda r: r.truncated or r.occluded,
    }
    if callable(name):
        return name
    try:
        return filters[name]
    except KeyError:
        raise InputError(f"unknown subset {name!r}; expected one of {SUBSETS}") from None


def mean_amodal_iou(pairs, subset="all"):
    """Mean IoU between predicted and ground-truth amodal boxes.

    Parameters
    ----------
    pairs : iterable of (BoundingBox, InstanceRecord)
        Predicted amodal box and the ground-truth record it belongs to.
    subset : str or callable
        ``"all"``, ``"trunc"``, ``"occ"``, ``"trunc_occ"``, or a predicate
        over the ground-truth record.

    Raises
    ------
    InputError
        If no pair passes the filter.
    """
    keep = _subset_filter(subset)
    values = []
    for pred, truth in pairs:
        if truth.amodal is None:
            raise InputError(f"ground truth for {truth.image_id} has no amodal box")
        if keep(truth):
            values.append(iou(pred, truth.amodal))
    if not values:
        raise InputError(f"subset {subset!r} is empty")
    return float(np.mean(values))


def modal_baseline(records):
    """Use each visible box as its own amodal prediction."""
    return [r.modal for r in records]


class ModalBoxBaseline(BaseEstimator):
    """Identity amodal predictor: the modal box is returned unchanged.

    Exact whenever nothing is occluded or truncated.
    """

    def fit(self, records=None, y=None):
        self.n_features_in_ = 4
        return self

    def predict(self, records):
        return modal_baseline(records)


def average_precision(is_tp, n_truth):
    """All-point interpolated AP from a score-ranked TP/FP sequence."""
    is_tp = np.asarray(is_tp, dtype=bool)
    if n_truth <= 0:
        raise InputError("average precision needs at least one ground-truth instance")
    if is_tp.size == 0:
        return 0.0
    tp = np.cumsum(is_tp)
    fp = np.cumsum(~is_tp)
    recall = tp / n_truth
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    # precision envelope, right to left
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def match_detections(detections, truth, iou_thresh=0.5, require_amodal=True):
    """Greedy score-descending matching for one category.

    Each detection claims the unmatched ground-truth instance in its image
    with the highest modal IoU.  The claim succeeds when that IoU exceeds
    ``iou_thresh``; it is a true positive only if, in addition, the
    predicted amodal box overlaps the *same* instance's amodal box by more
    than ``iou_thresh``.  Ties in score keep input order.

    Returns
    -------
    list of bool
        TP flags in ranked order.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    by_image = defaultdict(list)
    for t in truth:
        by_image[t.image_id].append(t)
    used = {image_id: [False] * len(ts) for image_id, ts in by_image.items()}
    flags = []
    for i in order:
        det = detections[i]
        candidates = by_image.get(det.image_id, [])
        best, best_iou = -1, -1.0
        for j, t in enumerate(candidates):
            if used[det.image_id][j]:
                continue
            o = iou(det.modal, t.modal)
            if o > best_iou:
                best, best_iou = j, o
        if best < 0 or best_iou <= iou_thresh:
            flags.append(False)
            continue
        used[det.image_id][best] = True
        if not require_amodal:
            flags.append(True)
            continue
        gt = candidates[best]
        gt_amodal = gt.amodal if gt.amodal is not None else gt.modal
        flags.append(iou(det.amodal_pred, gt_amodal) > iou_thresh)
    return flags


def ap_amodal(detections, truth, iou_thresh=0.5, require_amodal=True):
    """Per-category amodal average precision.

    Categories without ground truth are absent from the result rather than
    scored zero.  ``require_amodal=False`` gives the ordinary modal AP under
    the same matching.
    """
    dets_by_cat = defaultdict(list)
    for d in detections:
        dets_by_cat[d.category].append(d)
    truth_by_cat = defaultdict(list)
    for t in truth:
        truth_by_cat[t.category].append(t)
    result = {}
    for cat in sorted(truth_by_cat):
        flags = match_detections(dets_by_cat.get(cat, []), truth_by_cat[cat],
                                 iou_thresh, require_amodal)
        result[cat] = average_precision(flags, len(truth_by_cat[cat]))
    return result


def mask_to_box(mask):
    """Tightest box around the set cells of a 2-D mask.

    Cell ``(row, col)`` covers ``[col, col+1) x [row, row+1)``, so a single
    cell gives a 1x1 box.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise InputError(f"mask must be 2-D, got shape {mask.shape}")
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise InputError("mask has no set cells")
    r0, r1 = rows[0], rows[-1]
    c0, c1 = cols[0], cols[-1]
    return BoundingBox(float(c0), float(r0), float(c1 - c0 + 1), float(r1 - r0 + 1))


def raster_to_centered(box, image_w, image_h):
    """Ground-contact ordinate and height of ``box`` in centered, y-up pixels.

    Returns ``(y_b, h)`` with ``y_b = image_h / 2 - (box.y + box.h)``.
    ``image_w`` is accepted for symmetry; the model only uses y.
    """
    return image_h / 2.0 - (box.y + box.h), box.h


def centered_to_raster(y_b, h, x_center, w, image_w, image_h):
    """Inverse of :func:`raster_to_centered` for a box of width ``w``."""
    bottom = image_h / 2.0 - y_b
    return BoundingBox(x_center - w / 2.0, bottom - h, w, h)


def clip_box(box, image_w, image_h):
    """Clip to ``[0, image_w] x [0, image_h]``; ``None`` if nothing is left."""
    x0, y0 = max(box.x, 0.0), max(box.y, 0.0)
    x1, y1 = min(box.right, float(image_w)), min(box.bottom, float(image_h))
    if x1 <= x0 or y1 <= y0:
        return None
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)
