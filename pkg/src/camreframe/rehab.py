"""Masked latent rehabilitation and the end-to-end denoising pipeline.

Sampling-step indices follow the "step 25 ... step 0" convention: the largest
index is pure noise, 0 is clean.  During rehabilitation the known region is
held `noise_offset` sampling steps cleaner than the unknown region, and after
the final merge the whole latent is denoised without further merging.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteLatent, ShapeMismatch
from .reframe import reframe_latent
from .rng import derive_seed, gaussian
from .scheduler import NoiseSchedule, SampleSteps, add_noise, ddim_step
from .trajectory import Trajectory, compose_targets, normalize_translation, relativize


@dataclass(frozen=True)
class RunConfig:
    sample_steps: int = 25
    warp_step: int = 8
    noise_offset: int = 3
    guidance: float = 7.5
    mode: str = "time-aware"
    seed: int = 0
    splat_radius: float = 1.0
    target_scale: float = 1.0

    def __post_init__(self):
        if not 0 <= self.warp_step < self.sample_steps:
            raise ValueError(f"warp_step {self.warp_step} outside [0, {self.sample_steps})")
        if self.noise_offset < 0:
            raise ValueError("noise_offset must be >= 0")
        if self.warp_step + self.noise_offset > self.sample_steps:
            raise ValueError("warp_step + noise_offset must be <= sample_steps")
        if self.mode not in ("time-aware", "time-static"):
            raise ValueError(f"unknown mode {self.mode!r}")


def merge_step(z_known: np.ndarray, z_unknown: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """m * z_known + (1 - m) * z_unknown, mask broadcast across channels."""
    if z_known.shape != z_unknown.shape:
        raise ShapeMismatch(f"{z_known.shape} vs {z_unknown.shape}")
    f, _, h, w = z_known.shape
    if mask.shape != (f, h, w):
        raise ShapeMismatch(f"mask {mask.shape} for latents {z_known.shape}")
    m = mask[:, None, :, :]
    return m * z_known + (1.0 - m) * z_unknown


def known_level(unknown_step: int, offset: int) -> int:
    """Sampling level of the known region: unknown_step - offset, clamped at 0."""
    return max(unknown_step - offset, 0)


def _noised_known(z0: np.ndarray, level: int, steps: SampleSteps, sched: NoiseSchedule, seed: int):
    """Known region re-noised to a sampling level; returns (latent, eps_draw)."""
    eps = gaussian(seed, z0.shape)
    return add_noise(z0, steps.train_index(level), eps, sched), eps


def rehabilitate(
    z0_reframed: np.ndarray,
    mask: np.ndarray,
    denoiser,
    sched: NoiseSchedule,
    steps: SampleSteps,
    config: RunConfig,
    rng_seed: int,
    trace: list | None = None,
) -> np.ndarray:
    """RePaint-style masked denoising with the harmonization offset.

    Merge iterations run from level sample_steps down to warp_step+offset+1;
    the remaining levels denoise the whole merged latent without merging.
    When `trace` is given, (level, known_latent, eps) tuples are appended at
    every merge for conservation checks.
    """
    s_top = config.sample_steps
    offset = config.noise_offset
    t_w = config.warp_step

    unknown = gaussian(derive_seed(rng_seed, 0xA11CE, s_top), z0_reframed.shape)
    known, eps = _noised_known(
        z0_reframed, known_level(s_top, offset), steps, sched, derive_seed(rng_seed, 0xBEEF, s_top)
    )

    z = None
    for s in range(s_top, t_w + offset, -1):
        z = merge_step(known, unknown, mask)
        if trace is not None:
            trace.append((s, known.copy(), eps.copy()))
        if not np.all(np.isfinite(z)):
            raise NonFiniteLatent(s)
        eps_hat = denoiser(z, steps.train_index(s))
        unknown = ddim_step(z, eps_hat, steps.train_index(s), steps.train_index(s - 1), sched)
        known, eps = _noised_known(
            z0_reframed, known_level(s - 1, offset), steps, sched, derive_seed(rng_seed, 0xBEEF, s - 1)
        )

    # final merge: unknown at t_w + offset, known at t_w; then plain denoising
    z = merge_step(known, unknown, mask)
    if trace is not None:
        trace.append((t_w + offset, known.copy(), eps.copy()))
    for s in range(t_w + offset, 0, -1):
        if not np.all(np.isfinite(z)):
            raise NonFiniteLatent(s)
        eps_hat = denoiser(z, steps.train_index(s))
        z = ddim_step(z, eps_hat, steps.train_index(s), steps.train_index(s - 1), sched)
    if not np.all(np.isfinite(z)):
        raise NonFiniteLatent(0)
    return z


def compute_target_poses(trajectory: Trajectory, source_poses: Trajectory, target_scale: float) -> Trajectory:
    """Relativize and scale-normalize the control trajectory, then left-multiply
    onto the source poses."""
    rel = normalize_translation(relativize(trajectory), target_scale)
    return compose_targets(rel, source_poses)


def run_pipeline(
    initial_noise_seed: int,
    denoiser,
    codec,
    sched: NoiseSchedule,
    steps: SampleSteps,
    config: RunConfig,
    pointmaps: np.ndarray,
    validity: np.ndarray,
    source_poses: Trajectory,
    trajectory: Trajectory,
    intrinsics,
):
    """Full camera-controlled denoising run.

    Plain DDIM from seeded noise down to the warp step, then latent reframing
    to the target poses, then masked rehabilitation; returns
    (video, latent, mask, report).
    """
    timings = {}
    t0 = time.perf_counter()

    frame_count = pointmaps.shape[0]
    latent_h = intrinsics.height // codec.spatial_factor
    latent_w = intrinsics.width // codec.spatial_factor
    shape = (frame_count, 3, latent_h, latent_w)

    target_traj = compute_target_poses(trajectory, source_poses, config.target_scale)
    target_pose_list = target_traj.poses()
    source_pose_list = source_poses.poses()

    z = gaussian(derive_seed(initial_noise_seed, 0x51EED), shape)
    for s in range(config.sample_steps, config.warp_step, -1):
        eps_hat = denoiser(z, steps.train_index(s))
        z = ddim_step(z, eps_hat, steps.train_index(s), steps.train_index(s - 1), sched)
    timings["plain_denoise_s"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    z0_reframed, latent_mask, x0_reframed = reframe_latent(
        z,
        steps.train_index(config.warp_step),
        denoiser,
        codec,
        pointmaps,
        validity,
        source_pose_list,
        target_pose_list,
        intrinsics,
        config.mode,
        sched,
        config.splat_radius,
    )
    if hasattr(denoiser, "retarget"):
        denoiser.retarget(z0_reframed, latent_mask)
    timings["reframe_s"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    z_final = rehabilitate(
        z0_reframed, latent_mask, denoiser, sched, steps, config, derive_seed(config.seed, 0x4EAB)
    )
    timings["rehabilitate_s"] = time.perf_counter() - t2

    video = np.clip(codec.decode(z_final), 0.0, 1.0)
    timings["total_s"] = time.perf_counter() - t0

    report = {
        "mask_coverage": float(latent_mask.mean()),
        "target_poses": [p.matrix34().tolist() for p in target_pose_list],
        "frames": int(frame_count),
        "mode": config.mode,
        "warp_step": config.warp_step,
        "noise_offset": config.noise_offset,
        "sample_steps": config.sample_steps,
        "timings": timings,
    }
    return video, z_final, latent_mask, report
