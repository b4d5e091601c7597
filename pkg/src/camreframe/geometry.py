"""Rigid camera poses, pinhole projection, and point transforms.

Conventions: camera-from-world poses (x_cam = R @ x_world + t), right-handed
coordinates, camera looks down +z, image u rightward and v downward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepth

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Pose:
    """Camera-from-world rigid transform: rotation (3,3) + translation (3,)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("pose entries must be finite")
        if np.max(np.abs(r.T @ r - np.eye(3))) > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant must be +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def matrix34(self) -> np.ndarray:
        """3x4 [R | t] matrix."""
        return np.hstack([self.rotation, self.translation[:, None]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform world points (..., 3) into camera coordinates."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def camera_center(self) -> np.ndarray:
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


def pose_compose(a: Pose, b: Pose) -> Pose:
    """Transform applying b then a: R = Ra Rb, t = Ra tb + ta."""
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def pose_invert(p: Pose) -> Pose:
    """Inverse transform: R^T, -R^T t."""
    rt = p.rotation.T
    return Pose(rt, -rt @ p.translation)


def project_point(k: Intrinsics, p_cam) -> tuple[float, float, float]:
    """Pinhole projection of a camera-frame point to (u, v, depth)."""
    x, y, z = np.asarray(p_cam, dtype=np.float64).reshape(3)
    if z <= 0:
        raise NonPositiveDepth(f"point depth {z} is not positive")
    return k.fx * x / z + k.cx, k.fy * y / z + k.cy, z


def unproject_pixel(k: Intrinsics, u: float, v: float, depth: float) -> np.ndarray:
    """Inverse pinhole: pixel + depth to a camera-frame 3D point."""
    if depth <= 0:
        raise NonPositiveDepth(f"depth {depth} is not positive")
    return np.array([(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth])


def rotation_angle(r: np.ndarray) -> float:
    """Rotation angle in radians from a 3x3 rotation matrix (trace formula)."""
    return float(np.arccos(np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)))


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a quaternion (w, x, y, z); normalizes internally."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """Quaternion (w, x, y, z) from a rotation matrix, w >= 0."""
    r = np.asarray(r, dtype=np.float64)
    tr = np.trace(r)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] > r[2, 2]:
        s = np.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
