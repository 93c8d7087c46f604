"""Metric object sizes, horizons and camera heights from amodal boxes."""

from .boxes import (AmodalTargets, BoundingBox, DetectionRecord, InstanceRecord,
                    ModalBoxBaseline, ap_amodal, decode_targets, encode_targets, iou,
                    mask_to_box, mean_amodal_iou, raster_to_centered)
from .errors import (AmodalSizeError, InputError, NotConvergedWarning, NumericalError,
                     RankDeficiencyError)
from .geometry import (CameraModel, WorldPoint, depth_from_height, ground_point_approx,
                       ground_point_exact, horizon_from_tilt, image_height, project_point)
from .size_inference import SizeEstimator, camera_height_summary, estimate_sizes

__version__ = "0.1.0"
