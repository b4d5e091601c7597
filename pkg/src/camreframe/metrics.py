"""Camera-pose accuracy metrics and a PSNR fidelity stand-in."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMask, LengthMismatch, ShapeMismatch
from .trajectory import Trajectory, normalize_translation, relativize


@dataclass(frozen=True)
class PoseErrorReport:
    rot_error: float
    trans_error: float
    per_frame_rot: tuple = field(default_factory=tuple)
    per_frame_trans: tuple = field(default_factory=tuple)


def rot_error(est: Trajectory, gt: Trajectory) -> float:
    """Summed per-frame rotation angle between relativized trajectories:
    sum_j arccos(clamp((tr(R_est R_gt^T) - 1) / 2))."""
    return sum(per_frame_rot_errors(est, gt))


def per_frame_rot_errors(est: Trajectory, gt: Trajectory) -> list[float]:
    if len(est) != len(gt):
        raise LengthMismatch(f"{len(est)} vs {len(gt)} frames")
    out = []
    for e, g in zip(est.frames, gt.frames):
        arg = (np.trace(e.pose.rotation @ g.pose.rotation.T) - 1.0) / 2.0
        out.append(float(np.arccos(np.clip(arg, -1.0, 1.0))))
    return out


def trans_error(est: Trajectory, gt: Trajectory) -> float:
    """Summed Euclidean translation distance after relativization and
    scale normalization (translation norms summed to 1) of both trajectories."""
    return sum(per_frame_trans_errors(est, gt))


def per_frame_trans_errors(est: Trajectory, gt: Trajectory) -> list[float]:
    if len(est) != len(gt):
        raise LengthMismatch(f"{len(est)} vs {len(gt)} frames")
    est_n = normalize_translation(relativize(est), 1.0)
    gt_n = normalize_translation(relativize(gt), 1.0)
    return [
        float(np.linalg.norm(g.pose.translation - e.pose.translation))
        for e, g in zip(est_n.frames, gt_n.frames)
    ]


def pose_error_report(est: Trajectory, gt: Trajectory) -> PoseErrorReport:
    """Full preprocessing (relativize both) plus both metrics."""
    est_r, gt_r = relativize(est), relativize(gt)
    rots = per_frame_rot_errors(est_r, gt_r)
    trs = per_frame_trans_errors(est_r, gt_r)
    return PoseErrorReport(
        rot_error=sum(rots),
        trans_error=sum(trs),
        per_frame_rot=tuple(rots),
        per_frame_trans=tuple(trs),
    )


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """10 log10(1 / MSE) for videos in [0, 1]; inf when the images coincide.

    An optional (F, H, W) mask restricts the average to known pixels
    (all channels of a masked pixel count)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    diff2 = (a - b) ** 2
    if mask is not None:
        if mask.shape != (a.shape[0],) + a.shape[2:]:
            raise ShapeMismatch(f"mask {mask.shape} for video {a.shape}")
        sel = mask > 0.5
        if not np.any(sel):
            raise EmptyMask("mask selects no pixels")
        mse = float(diff2.transpose(0, 2, 3, 1)[sel].mean())
    else:
        mse = float(diff2.mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
