"""Deterministic procedural scenes with exact analytic ground truth.

A scene is a textured background plane plus optional moving spheres; rendering
is per-pixel ray casting, so frames, depth maps, and world point maps form an
exact oracle for the splatter and the alignment optimizer.  All randomness
comes from the SplitMix64 stream in `rng`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alignment import EdgeObservation
from .errors import FrameOutOfRange, InvalidSpec
from .geometry import Intrinsics, Pose
from .rng import derive_seed, gaussian, uniform
from .trajectory import Trajectory

_NEAR = 1e-4


@dataclass(frozen=True)
class Mover:
    center0: np.ndarray  # world position at frame 0
    velocity: np.ndarray  # world displacement per frame
    radius: float
    tex_freq: float
    tex_phase: np.ndarray  # (3,)

    def center(self, frame_index: int) -> np.ndarray:
        return self.center0 + frame_index * self.velocity


@dataclass(frozen=True)
class SceneModel:
    background_depth: float
    plane_freq: np.ndarray  # (3, 2) per-channel spatial frequency (x, y)
    plane_phase: np.ndarray  # (3,)
    movers: tuple[Mover, ...]
    frame_count: int
    seed: int


@dataclass(frozen=True)
class GroundTruthBundle:
    frames: np.ndarray  # (F, 3, H, W) in [0, 1]
    depth: np.ndarray  # (F, H, W)
    pointmaps: np.ndarray  # (F, H, W, 3) world coordinates
    validity: np.ndarray  # (F, H, W) in {0, 1}
    source_poses: Trajectory
    intrinsics: Intrinsics


def default_intrinsics(width: int, height: int) -> Intrinsics:
    return Intrinsics(fx=float(width), fy=float(width), cx=width / 2.0, cy=height / 2.0,
                      width=width, height=height)


def make_scene(kind: str = "static", frames: int = 16, resolution=(64, 48), seed: int = 0) -> SceneModel:
    """Deterministic scene; `kind` is "static" (plane only) or "dynamic"
    (plane plus linearly moving spheres)."""
    if kind not in ("static", "dynamic"):
        raise InvalidSpec(f"unknown scene kind {kind!r}")
    if frames < 2:
        raise InvalidSpec(f"frames must be >= 2, got {frames}")
    w, h = resolution
    if w < 8 or h < 8:
        raise InvalidSpec(f"resolution must be at least 8x8, got {resolution}")

    u = uniform(derive_seed(seed, 1), 16)
    # low spatial frequencies keep per-pixel texture gradients small, so the
    # splatter's nearest-neighbor resampling stays well above 35 dB
    plane_freq = 0.3 + 0.4 * u[:6].reshape(3, 2)
    plane_phase = 2 * np.pi * u[6:9]
    movers = []
    if kind == "dynamic":
        mu = uniform(derive_seed(seed, 2), 16)
        for i in range(2):
            base = mu[8 * i : 8 * i + 8]
            movers.append(
                Mover(
                    center0=np.array([-0.8 + 1.6 * base[0], -0.5 + 1.0 * base[1], 2.2 + 0.6 * base[2]]),
                    velocity=np.array([(base[3] - 0.5) * 0.08, (base[4] - 0.5) * 0.05, 0.0]),
                    radius=0.35 + 0.15 * base[5],
                    tex_freq=1.0 + base[6],
                    tex_phase=2 * np.pi * np.array([base[7], base[0], base[3]]),
                )
            )
    return SceneModel(
        background_depth=4.0,
        plane_freq=plane_freq,
        plane_phase=plane_phase,
        movers=tuple(movers),
        frame_count=frames,
        seed=seed,
    )


def _plane_color(scene: SceneModel, pts: np.ndarray) -> np.ndarray:
    """(N, 3) smooth procedural texture from world x, y."""
    x, y = pts[:, 0], pts[:, 1]
    chans = [
        0.5 + 0.22 * np.sin(scene.plane_freq[c, 0] * x + scene.plane_freq[c, 1] * y + scene.plane_phase[c])
        for c in range(3)
    ]
    return np.stack(chans, axis=1)


def _sphere_color(m: Mover, pts: np.ndarray, center: np.ndarray) -> np.ndarray:
    rel = pts - center
    s = rel[:, 0] + rel[:, 1] + rel[:, 2]
    chans = [0.5 + 0.3 * np.sin(m.tex_freq * s + m.tex_phase[c]) for c in range(3)]
    return np.stack(chans, axis=1)


def render_gt(scene: SceneModel, pose: Pose, intrinsics: Intrinsics, frame_index: int):
    """Exact ray-cast render: (image (3,H,W), depth (H,W), pointmap (H,W,3),
    validity (H,W))."""
    if not 0 <= frame_index < scene.frame_count:
        raise FrameOutOfRange(f"frame {frame_index} outside [0, {scene.frame_count})")
    k = intrinsics
    h, w = k.height, k.width
    vv, uu = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    # camera-frame ray directions with unit z, so the ray parameter is depth
    dirs_cam = np.stack([(uu - k.cx) / k.fx, (vv - k.cy) / k.fy, np.ones_like(uu)], axis=-1)
    dirs = dirs_cam.reshape(-1, 3) @ pose.rotation  # R^T applied row-wise
    origin = pose.camera_center()

    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    hit_kind = np.full(n, -1, dtype=np.int64)  # -1 none, 0 plane, 1+i sphere i

    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = (scene.background_depth - origin[2]) / dz
    ok = (dz > 1e-12) & (t_plane > _NEAR)
    best_t = np.where(ok, t_plane, best_t)
    hit_kind = np.where(ok, 0, hit_kind)

    for i, mv in enumerate(scene.movers):
        c = mv.center(frame_index)
        oc = origin - c
        a = np.sum(dirs * dirs, axis=1)
        b = 2.0 * dirs @ oc
        cc = float(oc @ oc) - mv.radius**2
        disc = b * b - 4 * a * cc
        with np.errstate(invalid="ignore"):
            sq = np.sqrt(np.maximum(disc, 0.0))
            t1 = (-b - sq) / (2 * a)
            t2 = (-b + sq) / (2 * a)
        t_hit = np.where(t1 > _NEAR, t1, t2)
        ok = (disc >= 0) & (t_hit > _NEAR) & (t_hit < best_t)
        best_t = np.where(ok, t_hit, best_t)
        hit_kind = np.where(ok, 1 + i, hit_kind)

    valid = hit_kind >= 0
    depth = np.where(valid, best_t, 0.0)
    pts = origin + dirs * np.where(valid, best_t, 0.0)[:, None]

    colors = np.zeros((n, 3))
    plane_sel = hit_kind == 0
    if np.any(plane_sel):
        colors[plane_sel] = _plane_color(scene, pts[plane_sel])
    for i, mv in enumerate(scene.movers):
        sel = hit_kind == 1 + i
        if np.any(sel):
            colors[sel] = _sphere_color(mv, pts[sel], mv.center(frame_index))
    colors = np.clip(colors, 0.0, 1.0)

    image = colors.reshape(h, w, 3).transpose(2, 0, 1)
    return image, depth.reshape(h, w), pts.reshape(h, w, 3), valid.reshape(h, w).astype(np.float64)


def make_bundle(scene: SceneModel, source_poses: Trajectory, intrinsics: Intrinsics) -> GroundTruthBundle:
    """Render ground truth for every frame of a source trajectory."""
    frames, depths, pmaps, valids = [], [], [], []
    for j, tf in enumerate(source_poses.frames):
        img, dep, pm, val = render_gt(scene, tf.pose, intrinsics, j)
        frames.append(img)
        depths.append(dep)
        pmaps.append(pm)
        valids.append(val)
    return GroundTruthBundle(
        frames=np.stack(frames),
        depth=np.stack(depths),
        pointmaps=np.stack(pmaps),
        validity=np.stack(valids),
        source_poses=source_poses,
        intrinsics=intrinsics,
    )


def _confidence(depth: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(depth)
    return 1.0 / (1.0 + np.hypot(gx, gy))


def emit_edge_observations(
    scene: SceneModel,
    source_poses: Trajectory,
    edges: list[tuple[int, int]],
    intrinsics: Intrinsics,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> list[EdgeObservation]:
    """Ground-truth point maps per edge, expressed in the reference camera's
    frame, with optional seeded Gaussian perturbation and depth-gradient
    confidences.  Stands in for a neural two-view reconstructor."""
    cache = {}

    def frame_gt(j):
        if j not in cache:
            cache[j] = render_gt(scene, source_poses.frames[j].pose, intrinsics, j)
        return cache[j]

    out = []
    for n, m in edges:
        _, depth_n, pm_n, _ = frame_gt(n)
        _, depth_m, pm_m, _ = frame_gt(m)
        pose_n = source_poses.frames[n].pose
        q_ref = pose_n.apply(pm_n)
        q_src = pose_n.apply(pm_m)
        if noise_sigma > 0:
            q_ref = q_ref + noise_sigma * gaussian(derive_seed(seed, n, m, 0), q_ref.shape)
            q_src = q_src + noise_sigma * gaussian(derive_seed(seed, n, m, 1), q_src.shape)
        out.append(
            EdgeObservation(
                ref_frame=n,
                src_frame=m,
                pointmap_ref=q_ref,
                pointmap_src=q_src,
                confidence_ref=_confidence(depth_n),
                confidence_src=_confidence(depth_m),
            )
        )
    return out
