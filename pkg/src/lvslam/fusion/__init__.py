from ..sweep import SensorSweep, motion_compensate_sweep
from .index import DirectionIndex
from .reconstruct import (
    ArcAssociation,
    FusionLine,
    VisualArc,
    associate_arc,
    mean_direction,
    reconstruct_line_linear,
    reconstruct_line_planar,
)

__all__ = [
    "ArcAssociation",
    "DirectionIndex",
    "FusionLine",
    "SensorSweep",
    "VisualArc",
    "associate_arc",
    "mean_direction",
    "motion_compensate_sweep",
    "reconstruct_line_linear",
    "reconstruct_line_planar",
]
