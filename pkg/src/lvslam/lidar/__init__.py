from .features import (
    FeatureClass,
    FeatureCloud,
    FeaturePoint,
    LINEAR_CLASSES,
    PLANAR_CLASSES,
    classify_points,
    local_pca,
)

__all__ = [
    "FeatureClass",
    "FeatureCloud",
    "FeaturePoint",
    "LINEAR_CLASSES",
    "PLANAR_CLASSES",
    "classify_points",
    "local_pca",
]
