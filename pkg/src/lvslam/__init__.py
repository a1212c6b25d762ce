"""Tightly-coupled LiDAR-visual SLAM on geometric line/plane features.

Two odometry subsystems (monocular line/point visual SLAM and feature-based
LiDAR ICP) exchange line depth and direction through a camera-centered
spherical fusion frame; a supervisor fails over to LiDAR odometry when visual
tracking degrades. A synthetic world generator and simulated sensors make the
whole pipeline verifiable without real sensor data.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config, save_config

__all__ = ["PipelineConfig", "load_config", "save_config", "__version__"]
