from .camera import FrameObservation, simulate_camera
from .evaluate import AteResult, evaluate_ate, umeyama
from .lidar import LidarModel, simulate_lidar
from .schedule import DegradationSchedule, FrameDegradation
from .world import World, generate_scene
from . import io

__all__ = [
    "AteResult",
    "DegradationSchedule",
    "FrameDegradation",
    "FrameObservation",
    "LidarModel",
    "World",
    "evaluate_ate",
    "generate_scene",
    "io",
    "simulate_camera",
    "simulate_lidar",
    "umeyama",
]
