"""Camera trajectories: RealEstate10K parsing, relativization, normalization,
target-pose composition, and basic generated motions."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyTrajectory,
    InvalidFrameCount,
    LengthMismatch,
    MalformedLine,
    MissingOrbitRadius,
)
from .geometry import Intrinsics, Pose, pose_compose, pose_invert, rotation_about_axis


@dataclass(frozen=True)
class TrajectoryFrame:
    timestamp: int
    pose: Pose
    intrinsics: Intrinsics | None = None


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[TrajectoryFrame, ...]
    source_id: str = ""

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise EmptyTrajectory("trajectory has no frames")
        ts = [f.timestamp for f in frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def poses(self) -> list[Pose]:
        return [f.pose for f in self.frames]

    def translations(self) -> np.ndarray:
        return np.stack([f.pose.translation for f in self.frames])


class MotionKind(enum.Enum):
    ZOOM_IN = "zoom-in"
    ZOOM_OUT = "zoom-out"
    PAN_LEFT = "pan-left"
    PAN_RIGHT = "pan-right"
    PAN_UP = "pan-up"
    PAN_DOWN = "pan-down"
    ROTATE_CW = "rotate-cw"
    ROTATE_CCW = "rotate-ccw"
    ORBIT_CW = "orbit-cw"
    ORBIT_CCW = "orbit-ccw"


def parse_realestate(text: str, width: float = 1.0, height: float = 1.0) -> Trajectory:
    """Parse RealEstate10K-style trajectory text.

    First line is an opaque source identifier.  Every other non-empty line has
    19 fields: timestamp, normalized fx fy cx cy, two zeros, then the 12
    row-major entries of the 3x4 camera-from-world matrix.  Normalized
    intrinsics are scaled by the supplied resolution.
    """
    lines = text.splitlines()
    source_id = lines[0].strip() if lines else ""
    frames = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 19:
            raise MalformedLine(lineno, f"expected 19 fields, got {len(fields)}")
        try:
            values = [float(x) for x in fields]
        except ValueError as exc:
            raise MalformedLine(lineno, str(exc)) from None
        timestamp = int(values[0])
        k = Intrinsics(
            fx=values[1] * width,
            fy=values[2] * height,
            cx=values[3] * width,
            cy=values[4] * height,
            width=int(round(width)) if width > 1 else 1,
            height=int(round(height)) if height > 1 else 1,
        )
        m = np.array(values[7:19]).reshape(3, 4)
        pose = Pose(m[:, :3], m[:, 3])
        frames.append(TrajectoryFrame(timestamp, pose, k))
    if not frames:
        raise EmptyTrajectory("no frame lines in trajectory text")
    return Trajectory(tuple(frames), source_id)


def relativize(t: Trajectory) -> Trajectory:
    """Express each pose relative to the first frame (first becomes identity)."""
    first_inv = pose_invert(t.frames[0].pose)
    frames = tuple(
        TrajectoryFrame(f.timestamp, pose_compose(f.pose, first_inv), f.intrinsics)
        for f in t.frames
    )
    return Trajectory(frames, t.source_id)


def normalize_translation(t: Trajectory, target_scale: float = 1.0) -> Trajectory:
    """Rescale translations so their norms sum to target_scale.

    The statistic is the sum of per-frame translation L2 norms; all-zero
    trajectories (pure rotation) pass through unchanged.
    """
    total = float(sum(np.linalg.norm(f.pose.translation) for f in t.frames))
    if total <= 1e-12:
        return t
    scale = target_scale / total
    frames = tuple(
        TrajectoryFrame(f.timestamp, Pose(f.pose.rotation, f.pose.translation * scale), f.intrinsics)
        for f in t.frames
    )
    return Trajectory(frames, t.source_id)


def compose_targets(relative: Trajectory, original: Trajectory) -> Trajectory:
    """Left-multiply relative motions onto original poses: target_j = delta_j o original_j."""
    if len(relative) != len(original):
        raise LengthMismatch(f"{len(relative)} relative vs {len(original)} original frames")
    frames = tuple(
        TrajectoryFrame(o.timestamp, pose_compose(r.pose, o.pose), o.intrinsics)
        for r, o in zip(relative.frames, original.frames)
    )
    return Trajectory(frames, original.source_id)


def identity_trajectory(frame_count: int) -> Trajectory:
    if frame_count < 1:
        raise InvalidFrameCount("need at least one frame")
    return Trajectory(tuple(TrajectoryFrame(j, Pose.identity()) for j in range(frame_count)))


_PAN_AXES = {
    MotionKind.PAN_RIGHT: np.array([1.0, 0.0, 0.0]),
    MotionKind.PAN_LEFT: np.array([-1.0, 0.0, 0.0]),
    MotionKind.PAN_DOWN: np.array([0.0, 1.0, 0.0]),
    MotionKind.PAN_UP: np.array([0.0, -1.0, 0.0]),
    MotionKind.ZOOM_IN: np.array([0.0, 0.0, 1.0]),
    MotionKind.ZOOM_OUT: np.array([0.0, 0.0, -1.0]),
}


def basic_trajectory(
    kind: MotionKind,
    magnitude: float,
    frames: int,
    orbit_radius: float | None = None,
) -> Trajectory:
    """Linear-ramp motion from identity: pans/zooms translate along +-x/+-y/+-z,
    rotates spin about the view axis, orbits circle a point on the view axis."""
    if frames < 2:
        raise InvalidFrameCount(f"frames must be >= 2, got {frames}")
    if not np.isfinite(magnitude):
        raise ValueError("magnitude must be finite")
    if kind in (MotionKind.ORBIT_CW, MotionKind.ORBIT_CCW):
        if orbit_radius is None or orbit_radius <= 0:
            raise MissingOrbitRadius("orbit motions need orbit_radius > 0")

    out = []
    for j in range(frames):
        frac = j / (frames - 1)
        amount = frac * magnitude
        if kind in _PAN_AXES:
            pose = Pose(np.eye(3), _PAN_AXES[kind] * amount)
        elif kind in (MotionKind.ROTATE_CW, MotionKind.ROTATE_CCW):
            sign = 1.0 if kind is MotionKind.ROTATE_CW else -1.0
            pose = Pose(rotation_about_axis([0, 0, 1], sign * amount), np.zeros(3))
        else:
            sign = 1.0 if kind is MotionKind.ORBIT_CW else -1.0
            phi = sign * amount
            r = float(orbit_radius)
            rot = np.array(
                [
                    [np.cos(phi), 0.0, np.sin(phi)],
                    [0.0, 1.0, 0.0],
                    [-np.sin(phi), 0.0, np.cos(phi)],
                ]
            )
            trans = np.array([-r * np.sin(phi), 0.0, r * (1.0 - np.cos(phi))])
            pose = Pose(rot, trans)
        out.append(TrajectoryFrame(j, pose))
    return Trajectory(tuple(out))
