"""Diffusion noise schedule, forward noising, DDIM stepping, classifier-free
guidance, and the pluggable denoiser contract.

Latent videos are plain float64/float32 arrays shaped (F, C, H, W).  Sampling
steps use two index systems: "training-step index" t in [0, train_steps) and
"sampling-step index" k in [0, sample_steps], where k = sample_steps is pure
noise and k = 0 is clean (CLEAN sentinel for the alpha-bar = 1 endpoint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateAlpha,
    InvalidBetaRange,
    InvalidCounts,
    ShapeMismatch,
    StepOrderViolation,
)

#: Sentinel for the fully-denoised endpoint (alpha-bar treated as 1).
CLEAN = None


@dataclass(frozen=True)
class NoiseSchedule:
    """Cumulative alpha-bar table for train_steps diffusion steps."""

    train_steps: int
    alpha_bar: np.ndarray

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.shape != (self.train_steps,):
            raise ValueError("alpha_bar length must equal train_steps")
        if not np.all(np.isfinite(ab)) or np.any(ab < 0) or np.any(ab > 1):
            raise ValueError("alpha_bar entries must lie in [0, 1]")
        object.__setattr__(self, "alpha_bar", ab)

    def validate_strict(self) -> None:
        """Full invariants for production schedules (tests may use looser tables)."""
        ab = self.alpha_bar
        if not np.all(np.diff(ab) < 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if not (ab[0] > 0.99 and ab[-1] < 0.01):
            raise ValueError("alpha_bar endpoints out of range")


def make_schedule(
    train_steps: int = 1000,
    kind: str = "linear",
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
) -> NoiseSchedule:
    """Linear-beta schedule: alpha_bar[t] = prod_{s<=t} (1 - beta_s)."""
    if train_steps < 2:
        raise InvalidCounts(f"train_steps must be >= 2, got {train_steps}")
    if kind != "linear":
        raise ValueError(f"unknown schedule kind {kind!r}")
    if not (0 < beta_start < beta_end < 1):
        raise InvalidBetaRange(f"need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, train_steps)
    sched = NoiseSchedule(train_steps, np.cumprod(1.0 - betas))
    sched.validate_strict()
    return sched


@dataclass(frozen=True)
class SampleSteps:
    """Descending training-step indices used for sampling."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b >= a for a, b in zip(idx, idx[1:])):
            raise ValueError("sampling indices must be strictly descending")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def train_index(self, k: int):
        """Training-step index for sampling-step k; k = 0 means CLEAN."""
        if k == 0:
            return CLEAN
        if not 1 <= k <= len(self.indices):
            raise InvalidCounts(f"sampling step {k} outside [0, {len(self.indices)}]")
        return self.indices[len(self.indices) - k]


def select_timesteps(train_steps: int, sample_steps: int) -> SampleSteps:
    """Evenly spaced subsampling: t_i = ceil((i+1) * train/sample) - 1, descending."""
    if not 1 <= sample_steps <= train_steps:
        raise InvalidCounts(f"need 1 <= sample_steps <= train_steps, got {sample_steps}/{train_steps}")
    idx = [int(np.ceil((i + 1) * train_steps / sample_steps)) - 1 for i in range(sample_steps - 1, -1, -1)]
    return SampleSteps(tuple(idx))


def _check_shapes(*arrays):
    shapes = {np.asarray(a).shape for a in arrays}
    if len(shapes) != 1:
        raise ShapeMismatch(f"mismatched shapes: {sorted(shapes)}")


def _alpha(sched: NoiseSchedule, t) -> float:
    if t is CLEAN:
        return 1.0
    return float(sched.alpha_bar[t])


def add_noise(z0: np.ndarray, t, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Forward noising: sqrt(ab_t) z0 + sqrt(1 - ab_t) eps."""
    _check_shapes(z0, eps)
    ab = _alpha(sched, t)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


def estimate_x0(z_t: np.ndarray, eps_hat: np.ndarray, t, sched: NoiseSchedule) -> np.ndarray:
    """Invert forward noising: (z_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t)."""
    _check_shapes(z_t, eps_hat)
    ab = _alpha(sched, t)
    if ab <= 1e-12:
        raise DegenerateAlpha(f"alpha_bar[{t}] = {ab} too small to invert")
    return (z_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def ddim_step(z_t: np.ndarray, eps_hat: np.ndarray, t, t_prev, sched: NoiseSchedule) -> np.ndarray:
    """Deterministic DDIM update (eta = 0); t_prev = CLEAN returns the x0 estimate."""
    if t_prev is not CLEAN and t_prev >= t:
        raise StepOrderViolation(f"t_prev {t_prev} must be < t {t}")
    x0 = estimate_x0(z_t, eps_hat, t, sched)
    ab_prev = _alpha(sched, t_prev)
    return np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps_hat


def cfg_combine(eps_uncond: np.ndarray, eps_cond: np.ndarray, guidance: float) -> np.ndarray:
    """Classifier-free guidance: eps_u + g * (eps_c - eps_u)."""
    _check_shapes(eps_uncond, eps_cond)
    return eps_uncond + guidance * (eps_cond - eps_uncond)


def oracle_epsilon(z_t: np.ndarray, t, target: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Noise prediction that makes estimate_x0 return `target` exactly."""
    _check_shapes(z_t, target)
    ab = _alpha(sched, t)
    if ab >= 1.0 - 1e-12:
        raise DegenerateAlpha(f"alpha_bar[{t}] = {ab} too close to 1")
    return (z_t - np.sqrt(ab) * target) / np.sqrt(1.0 - ab)


class OracleDenoiser:
    """DenoiserContract implementation with a perfect target (test oracle).

    `retarget` lets the pipeline pin the known region to the reframed latent
    while keeping the original target as the generative prior elsewhere.
    """

    def __init__(self, target: np.ndarray, sched: NoiseSchedule):
        self.target = np.asarray(target, dtype=np.float64)
        self.sched = sched

    def __call__(self, z, t, condition=None):
        return oracle_epsilon(z, t, self.target, self.sched)

    def retarget(self, z0_known: np.ndarray, latent_mask: np.ndarray) -> None:
        m = np.asarray(latent_mask)[:, None, :, :]
        self.target = m * z0_known + (1.0 - m) * self.target


def _smooth3(x: np.ndarray) -> np.ndarray:
    """3x3 box smoothing over the trailing two axes with edge replication."""
    pad = np.pad(x, [(0, 0)] * (x.ndim - 2) + [(1, 1), (1, 1)], mode="edge")
    out = np.zeros_like(x, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            out += pad[..., dy : dy + x.shape[-2], dx : dx + x.shape[-1]]
    return out / 9.0


class ToyDenoiser:
    """Imperfect denoiser: the oracle prediction passed through a mild spatial
    box smoothing, so estimates drift slightly from the stored latent."""

    def __init__(self, target: np.ndarray, sched: NoiseSchedule, blend: float = 0.5):
        self.target = np.asarray(target, dtype=np.float64)
        self.sched = sched
        self.blend = float(blend)

    def __call__(self, z, t, condition=None):
        eps = oracle_epsilon(z, t, self.target, self.sched)
        return (1.0 - self.blend) * eps + self.blend * _smooth3(eps)

    def retarget(self, z0_known: np.ndarray, latent_mask: np.ndarray) -> None:
        m = np.asarray(latent_mask)[:, None, :, :]
        self.target = m * z0_known + (1.0 - m) * self.target


class CfgDenoiser:
    """Adapter applying classifier-free guidance around a base denoiser."""

    def __init__(self, base, guidance: float, condition=None):
        self.base = base
        self.guidance = float(guidance)
        self.condition = condition

    def __call__(self, z, t, condition=None):
        cond = condition if condition is not None else self.condition
        eps_u = self.base(z, t, None)
        eps_c = self.base(z, t, cond)
        return cfg_combine(eps_u, eps_c, self.guidance)

    def retarget(self, z0_known, latent_mask):
        if hasattr(self.base, "retarget"):
            self.base.retarget(z0_known, latent_mask)
