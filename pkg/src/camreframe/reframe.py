"""Point-cloud lifting, z-buffer splat rendering, occlusion masks, and the
pixel/latent codec contract used for latent reframing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonDivisibleFactor, PoseCountMismatch, ShapeMismatch
from .geometry import Intrinsics, Pose
from .scheduler import estimate_x0

_NEAR = 1e-4
_SPLAT_EPS = 1e-6


@dataclass(frozen=True)
class TimeAwarePointCloud:
    """Per-frame colored world-space point sets.

    positions[f]: (N_f, 3); colors[f]: (N_f, 3) in [0, 1]; source order is the
    row-major pixel order of the originating frame (used for tie-breaking).
    """

    positions: tuple
    colors: tuple
    frame_count: int


class IdentityCodec:
    """Latent space equals pixel space; decode(encode(x)) is exact."""

    spatial_factor = 1

    def encode(self, pixels: np.ndarray) -> np.ndarray:
        return np.array(pixels, dtype=np.float64)

    def decode(self, latents: np.ndarray) -> np.ndarray:
        return np.array(latents, dtype=np.float64)


class PoolingCodec:
    """Average-pool encoder with nearest-neighbor decoder; exercises mask
    downsampling and shape plumbing (encode o decode is identity on latents)."""

    def __init__(self, spatial_factor: int = 4):
        self.spatial_factor = int(spatial_factor)

    def encode(self, pixels: np.ndarray) -> np.ndarray:
        f = self.spatial_factor
        fr, c, h, w = pixels.shape
        if h % f or w % f:
            raise NonDivisibleFactor(f"factor {f} does not divide {h}x{w}")
        return pixels.reshape(fr, c, h // f, f, w // f, f).mean(axis=(3, 5))

    def decode(self, latents: np.ndarray) -> np.ndarray:
        f = self.spatial_factor
        return np.repeat(np.repeat(latents, f, axis=2), f, axis=3)


def lift_frames(video: np.ndarray, pointmaps: np.ndarray, validity: np.ndarray) -> TimeAwarePointCloud:
    """One colored world point per valid pixel per frame."""
    video = np.asarray(video, dtype=np.float64)
    f, c, h, w = video.shape
    if pointmaps.shape != (f, h, w, 3) or validity.shape != (f, h, w):
        raise ShapeMismatch(
            f"video {video.shape}, pointmaps {pointmaps.shape}, validity {validity.shape}"
        )
    positions, colors = [], []
    for j in range(f):
        keep = validity[j].reshape(-1) > 0.5
        positions.append(pointmaps[j].reshape(-1, 3)[keep])
        colors.append(video[j].reshape(c, -1).T[keep])
    return TimeAwarePointCloud(tuple(positions), tuple(colors), f)


def _splat_frame(points, colors, orders, frames, pose: Pose, k: Intrinsics, radius: float):
    """Z-buffer splat of one frame; ties break on (frame, row-major order)."""
    h, w = k.height, k.width
    image = np.zeros((3, h, w))
    mask = np.zeros((h, w))
    if len(points) == 0:
        return image, mask
    cam = pose.apply(points)
    z = cam[:, 2]
    front = z > _NEAR
    if not np.any(front):
        return image, mask
    cam, z = cam[front], z[front]
    colors, orders, frames = colors[front], orders[front], frames[front]
    u = k.fx * cam[:, 0] / z + k.cx
    v = k.fy * cam[:, 1] / z + k.cy

    # square splats: integer pixels with |px - u| < radius (per axis)
    lo_u = np.ceil(u - radius + _SPLAT_EPS).astype(np.int64)
    hi_u = np.floor(u + radius - _SPLAT_EPS).astype(np.int64)
    lo_v = np.ceil(v - radius + _SPLAT_EPS).astype(np.int64)
    hi_v = np.floor(v + radius - _SPLAT_EPS).astype(np.int64)

    span = int(np.ceil(2 * radius)) + 1
    pix_ids, depths, cols, frs, ords = [], [], [], [], []
    for du in range(span):
        for dv in range(span):
            px = lo_u + du
            py = lo_v + dv
            ok = (px <= hi_u) & (py <= hi_v) & (px >= 0) & (px < w) & (py >= 0) & (py < h)
            if not np.any(ok):
                continue
            pix_ids.append(py[ok] * w + px[ok])
            depths.append(z[ok])
            cols.append(colors[ok])
            frs.append(frames[ok])
            ords.append(orders[ok])
    if not pix_ids:
        return image, mask
    pix_ids = np.concatenate(pix_ids)
    depths = np.concatenate(depths)
    cols = np.concatenate(cols)
    frs = np.concatenate(frs)
    ords = np.concatenate(ords)

    sort = np.lexsort((ords, frs, depths, pix_ids))
    pix_sorted = pix_ids[sort]
    first = np.ones(len(pix_sorted), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    win = sort[first]
    flat_img = image.reshape(3, -1)
    flat_img[:, pix_ids[win]] = cols[win].T
    mask.reshape(-1)[pix_ids[win]] = 1.0
    return image, mask


def render_cloud(
    cloud: TimeAwarePointCloud,
    target_poses,
    intrinsics: Intrinsics,
    mode: str = "time-aware",
    splat_radius: float = 1.0,
):
    """Render each frame from its target pose; returns (video, mask).

    "time-aware" uses only that frame's points; "time-static" uses the union
    of all frames' points for every output frame.  Nearest depth wins per
    pixel, ties broken by lower frame index then row-major source order.
    """
    if len(target_poses) != cloud.frame_count:
        raise PoseCountMismatch(f"{len(target_poses)} poses for {cloud.frame_count} frames")
    if mode not in ("time-aware", "time-static"):
        raise ValueError(f"unknown mode {mode!r}")

    h, w = intrinsics.height, intrinsics.width
    if mode == "time-static":
        all_pts = np.concatenate([p for p in cloud.positions]) if cloud.positions else np.zeros((0, 3))
        all_cols = np.concatenate([c for c in cloud.colors]) if cloud.colors else np.zeros((0, 3))
        all_frames = np.concatenate(
            [np.full(len(p), j, dtype=np.int64) for j, p in enumerate(cloud.positions)]
        )
        all_orders = np.concatenate(
            [np.arange(len(p), dtype=np.int64) for p in cloud.positions]
        )

    images, masks = [], []
    for j in range(cloud.frame_count):
        if mode == "time-aware":
            pts = cloud.positions[j]
            cols = cloud.colors[j]
            frames = np.full(len(pts), j, dtype=np.int64)
            orders = np.arange(len(pts), dtype=np.int64)
        else:
            pts, cols, frames, orders = all_pts, all_cols, all_frames, all_orders
        img, msk = _splat_frame(pts, cols, orders, frames, target_poses[j], intrinsics, splat_radius)
        images.append(img)
        masks.append(msk)
    return np.stack(images), np.stack(masks)


def downsample_mask(mask: np.ndarray, factor: int) -> np.ndarray:
    """Latent-resolution mask: a cell is known only if every covered pixel is
    known (conservative AND)."""
    if factor == 1:
        return np.array(mask)
    f, h, w = mask.shape
    if h % factor or w % factor:
        raise NonDivisibleFactor(f"factor {factor} does not divide {h}x{w}")
    blocks = mask.reshape(f, h // factor, factor, w // factor, factor)
    return blocks.min(axis=(2, 4))


def reframe_latent(
    z_t: np.ndarray,
    t,
    denoiser,
    codec,
    pointmaps: np.ndarray,
    validity: np.ndarray,
    source_poses,
    target_poses,
    intrinsics: Intrinsics,
    mode: str,
    sched,
    splat_radius: float = 1.0,
):
    """Estimate the clean video, re-render it from target poses, and re-encode.

    Returns (z0_reframed, latent_mask, x0_reframed).  `source_poses` is unused
    by the splatter (points are already in world coordinates) but kept so
    callers state the full geometric context.
    """
    eps_hat = denoiser(z_t, t)
    z0_hat = estimate_x0(z_t, eps_hat, t, sched)
    x0_hat = np.clip(codec.decode(z0_hat), 0.0, 1.0)
    cloud = lift_frames(x0_hat, pointmaps, validity)
    x0_reframed, pixel_mask = render_cloud(cloud, target_poses, intrinsics, mode, splat_radius)
    z0_reframed = codec.encode(x0_reframed)
    latent_mask = downsample_mask(pixel_mask, codec.spatial_factor)
    return z0_reframed, latent_mask, x0_reframed
