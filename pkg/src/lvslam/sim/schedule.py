"""Per-frame sensor degradation schedules."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class FrameDegradation:
    blackout: bool = False       # camera returns nothing
    blur_px: float = 0.0         # extra endpoint noise; short segments drop
    brightness: float = 1.0      # detection retention probability scale
    lidar_dropout: float = 0.0   # fraction of sweep points dropped


@dataclass
class DegradationSchedule:
    entries: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, frame: int) -> FrameDegradation:
        if not 0 <= frame < len(self.entries):
            raise IndexError(f"no degradation entry for frame {frame}")
        return self.entries[frame]

    @staticmethod
    def nominal(n_frames: int) -> "DegradationSchedule":
        return DegradationSchedule([FrameDegradation()] * n_frames)

    @staticmethod
    def camera_blackout(n_frames: int, start: int,
                        length: int) -> "DegradationSchedule":
        entries = []
        for k in range(n_frames):
            entries.append(FrameDegradation(blackout=start <= k < start + length))
        return DegradationSchedule(entries)

    @staticmethod
    def motion_blur(n_frames: int, blur_px: float = 3.0, start: int = 0,
                    length: int | None = None) -> "DegradationSchedule":
        length = n_frames if length is None else length
        entries = []
        for k in range(n_frames):
            active = start <= k < start + length
            entries.append(FrameDegradation(blur_px=blur_px if active else 0.0))
        return DegradationSchedule(entries)

    @staticmethod
    def low_light(n_frames: int, brightness: float = 0.3) -> "DegradationSchedule":
        return DegradationSchedule([FrameDegradation(brightness=brightness)]
                                   * n_frames)
