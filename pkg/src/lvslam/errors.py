"""Exception hierarchy shared across the package."""


class LvslamError(Exception):
    """Base class for all errors raised by this package."""


# --- geometry ---

class DegenerateLine(LvslamError):
    """Line construction failed (zero-length segment or invalid coordinates)."""


class ParallelPlanes(LvslamError):
    """Two planes are parallel (or identical); no unique intersection line."""


class LineThroughCenter(LvslamError):
    """Line passes through the camera center; image projection undefined."""


class ZeroVector(LvslamError):
    """A direction was requested from the zero vector."""


class AntipodalEndpoints(LvslamError):
    """Arc endpoints are (near) antipodal; the great-circle arc is ambiguous."""


class FractionOutOfRange(LvslamError):
    """Interpolation fraction outside [0, 1]."""


# --- point-cloud features ---

class TooFewNeighbors(LvslamError):
    """Local PCA needs at least 3 neighborhood points."""


class EmptyCloud(LvslamError):
    """Operation requires a non-empty point cloud."""


class TimestampOutOfSweep(LvslamError):
    """Point time offset lies outside the sweep interval."""


# --- fusion ---

class InsufficientSupport(LvslamError):
    """Too few matched feature points to reconstruct a line."""


class PoorPlaneFit(LvslamError):
    """Plane fit residual exceeded the configured RMS bound."""


class NoDominantCluster(LvslamError):
    """No direction cluster holds a strict majority of the matches."""


class EmptyCluster(LvslamError):
    """Mean direction of an empty cluster is undefined."""


# --- visual subsystem ---

class DegenerateTriangulation(LvslamError):
    """Projection planes are parallel (line through the epipole)."""


class InsufficientBaseline(LvslamError):
    """Camera baseline too short for triangulation."""


class NoValidObservation(LvslamError):
    """No observation constrains the landmark endpoints."""


class DegenerateImageLine(LvslamError):
    """Homogeneous image line with zero normal part."""


class NotConverged(LvslamError):
    """Optimizer hit the iteration cap. Carries the best state found."""

    def __init__(self, message, result=None, final_cost=None):
        super().__init__(message)
        self.result = result
        self.final_cost = final_cost


class RankDeficient(LvslamError):
    """Optimization window is under-constrained."""


# --- lidar subsystem ---

class UnknownPointId(LvslamError):
    """Direction correction references a point id not in the cloud."""


class NonLinearPoint(LvslamError):
    """Direction correction targeted a point that is not linear-class."""


class NoCorrespondences(LvslamError):
    """Registration found no gated correspondences in any category."""


class Diverged(LvslamError):
    """Registration residual kept growing; alignment abandoned."""


class InvalidAlpha(LvslamError):
    """Optimized-point rate bound must lie in (0, 1]."""


# --- harness / supervisor ---

class InsufficientOverlap(LvslamError):
    """Too few common timestamps between trajectories."""


class UnknownPreset(LvslamError):
    """Requested scene preset does not exist."""


class ConfigError(LvslamError):
    """Malformed configuration file or value."""


class SourceError(LvslamError):
    """Input source missing or unreadable."""


class EmptyStreams(LvslamError):
    """Trajectory composition needs at least one non-empty stream."""
