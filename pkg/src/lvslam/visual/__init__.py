from .ba import BAResult, bundle_adjust
from .landmarks import (
    FUSION,
    TRIANGULATED,
    LineLandmark,
    PointLandmark,
    absorb_fusion_line,
    depth_check,
    triangulate_line,
    triangulate_point,
    trim_endpoints,
)
from .residuals import direction_residual, reprojection_residual
from .segments import Keyframe, PointObservation, Segment2D, detect_lines

__all__ = [
    "BAResult",
    "FUSION",
    "Keyframe",
    "LineLandmark",
    "PointLandmark",
    "PointObservation",
    "Segment2D",
    "TRIANGULATED",
    "absorb_fusion_line",
    "bundle_adjust",
    "depth_check",
    "detect_lines",
    "direction_residual",
    "reprojection_residual",
    "triangulate_line",
    "triangulate_point",
    "trim_endpoints",
]
