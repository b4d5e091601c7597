"""Global alignment of pairwise point-map observations.

Recovers per-frame world point maps, per-frame poses (world-from-camera,
frame 0 pinned to identity), and per-edge log scales by minimizing a
confidence-weighted sum of unsquared point distances.  The optimizer
alternates closed-form block updates (weighted Procrustes for poses,
scalar least squares for scales, linear consensus for translations and
point maps); hand-derived analytic gradients of the objective are kept
for verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DisconnectedGraph,
    InconsistentShapes,
    NonFiniteLoss,
    TooFewFrames,
    WindowTooSmall,
)
from .geometry import Pose, quat_to_rotation

_NORM_EPS = 1e-12


@dataclass(frozen=True)
class EdgeObservation:
    """Two point maps from one image pair, both in the reference camera's frame."""

    ref_frame: int
    src_frame: int
    pointmap_ref: np.ndarray  # (H, W, 3)
    pointmap_src: np.ndarray  # (H, W, 3)
    confidence_ref: np.ndarray  # (H, W)
    confidence_src: np.ndarray  # (H, W)

    def __post_init__(self):
        if self.ref_frame == self.src_frame:
            raise ValueError("edge must join two distinct frames")
        h, w, _ = self.pointmap_ref.shape
        for name in ("pointmap_src",):
            if getattr(self, name).shape != (h, w, 3):
                raise InconsistentShapes(f"{name} shape {getattr(self, name).shape}")
        for name in ("confidence_ref", "confidence_src"):
            c = getattr(self, name)
            if c.shape != (h, w):
                raise InconsistentShapes(f"{name} shape {c.shape}")
            if not np.all(np.isfinite(c)) or np.any(c < 0):
                raise ValueError("confidences must be finite and non-negative")

    @property
    def grid_shape(self):
        return self.pointmap_ref.shape[:2]


@dataclass
class AlignmentState:
    """Optimization result: world point maps, frame poses, per-edge log scales."""

    global_pointmaps: np.ndarray  # (F, H, W, 3)
    frame_poses: list  # world-from-camera Pose per frame
    log_scales: np.ndarray  # (E,), matching edge order
    edges: list = field(default_factory=list)  # (ref, src) per log scale
    initial_loss: float = float("nan")
    final_loss: float = float("nan")


@dataclass
class AlignmentConfig:
    steps: int = 300
    # retained for interface stability; the closed-form block updates have no
    # step-size knob
    learning_rate: float = 0.01
    seed: int = 0
    # translation/point-map consensus sweeps per outer step
    inner_iterations: int = 10


def build_graph(frame_count: int, window: int) -> list[tuple[int, int]]:
    """Sliding-window connectivity graph: all ordered pairs inside each window
    of `window` consecutive frames, deduplicated, sorted by (n, m)."""
    if frame_count < 2:
        raise TooFewFrames(f"need >= 2 frames, got {frame_count}")
    if window < 2:
        raise WindowTooSmall(f"window must be >= 2, got {window}")
    pairs = set()
    n_windows = max(1, frame_count - window + 1)
    for start in range(n_windows):
        members = range(start, min(start + window, frame_count))
        for n in members:
            for m in members:
                if n != m:
                    pairs.add((n, m))
    return sorted(pairs)


@dataclass
class _EdgeData:
    ref: int
    src: int
    q_ref: np.ndarray  # (N, 3)
    q_src: np.ndarray
    c_ref: np.ndarray  # (N,)
    c_src: np.ndarray


def _flatten_observations(observations) -> tuple[list[_EdgeData], tuple[int, int]]:
    if not observations:
        raise InconsistentShapes("no observations")
    grid = observations[0].grid_shape
    edges = []
    for ob in observations:
        if ob.grid_shape != grid:
            raise InconsistentShapes(f"edge grid {ob.grid_shape} != {grid}")
        edges.append(
            _EdgeData(
                ob.ref_frame,
                ob.src_frame,
                ob.pointmap_ref.reshape(-1, 3).astype(np.float64),
                ob.pointmap_src.reshape(-1, 3).astype(np.float64),
                ob.confidence_ref.reshape(-1).astype(np.float64),
                ob.confidence_src.reshape(-1).astype(np.float64),
            )
        )
    return edges, grid


def _check_connected(edges: list[_EdgeData], frame_count: int) -> None:
    adj = {f: set() for f in range(frame_count)}
    for e in edges:
        if e.ref >= frame_count or e.src >= frame_count:
            raise InconsistentShapes(f"edge ({e.ref}, {e.src}) outside frame range")
        adj[e.ref].add(e.src)
        adj[e.src].add(e.ref)
    seen = {0}
    stack = [0]
    while stack:
        f = stack.pop()
        for g in adj[f]:
            if g not in seen:
                seen.add(g)
                stack.append(g)
    missing = sorted(set(range(frame_count)) - seen)
    if missing:
        raise DisconnectedGraph(missing)


# Partial derivatives of the unit-quaternion rotation matrix w.r.t. (w, x, y, z).
def _quat_rotation_jacobian(qhat: np.ndarray) -> np.ndarray:
    w, x, y, z = qhat
    return 2.0 * np.array(
        [
            [[0, -z, y], [z, 0, -x], [-y, x, 0]],
            [[0, y, z], [y, -2 * x, -w], [z, w, -2 * x]],
            [[-2 * y, x, w], [x, 0, z], [-w, z, -2 * y]],
            [[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0]],
        ]
    )


def _rotation_grad_to_quat(q: np.ndarray, g_rot: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    qhat = q / n
    jac = _quat_rotation_jacobian(qhat)
    g_hat = np.einsum("kij,ij->k", jac, g_rot)
    # chain through the normalization q -> q/|q|
    return (g_hat - np.dot(g_hat, qhat) * qhat) / n


def _loss_and_grads(P, quats, trans, sigmas, edges):
    """Loss sum_e sum_v sum_i C ||P - s (R Q + t)|| and its analytic gradients."""
    n_frames = P.shape[0]
    rots = [quat_to_rotation(quats[f]) for f in range(n_frames)]
    g_p = np.zeros_like(P)
    g_rot = np.zeros((n_frames, 3, 3))
    g_t = np.zeros_like(trans)
    g_s = np.zeros_like(sigmas)
    p_flat = P.reshape(n_frames, -1, 3)
    loss = 0.0
    for k, e in enumerate(edges):
        s = np.exp(sigmas[k])
        rot, t = rots[e.ref], trans[e.ref]
        for view, q, c in ((e.ref, e.q_ref, e.c_ref), (e.src, e.q_src, e.c_src)):
            tq = q @ rot.T + t
            r = p_flat[view] - s * tq
            d = np.linalg.norm(r, axis=1)
            loss += float(np.dot(c, d))
            u = np.where(d[:, None] > _NORM_EPS, r / np.maximum(d, _NORM_EPS)[:, None], 0.0)
            w = c[:, None] * u
            g_p[view] += w.reshape(g_p[view].shape)
            g_t[e.ref] -= s * w.sum(axis=0)
            g_s[k] -= s * float(np.sum(w * tq))
            g_rot[e.ref] -= s * (w.T @ q)
    g_q = np.zeros_like(quats)
    for f in range(1, n_frames):
        g_q[f] = _rotation_grad_to_quat(quats[f], g_rot[f])
    # frame 0 pose is pinned to identity
    g_t[0] = 0.0
    return loss, g_p, g_q, g_t, g_s


def _loss_only(P, quats, trans, sigmas, edges) -> float:
    return _loss_and_grads(P, quats, trans, sigmas, edges)[0]


def alignment_loss(state: AlignmentState, observations) -> float:
    """Objective value for an explicit state against an observation list."""
    edges, grid = _flatten_observations(observations)
    P = np.asarray(state.global_pointmaps, dtype=np.float64)
    if P.shape[1:3] != grid:
        raise InconsistentShapes(f"pointmap grid {P.shape[1:3]} != observation grid {grid}")
    if len(state.log_scales) != len(observations):
        raise InconsistentShapes("log_scales length != edge count")
    rots = [p.rotation for p in state.frame_poses]
    ts = [p.translation for p in state.frame_poses]
    p_flat = P.reshape(P.shape[0], -1, 3)
    loss = 0.0
    for k, e in enumerate(edges):
        if e.ref >= len(rots) or e.src >= len(rots):
            raise InconsistentShapes(f"edge ({e.ref}, {e.src}) outside state frames")
        s = np.exp(state.log_scales[k])
        for view, q, c in ((e.ref, e.q_ref, e.c_ref), (e.src, e.q_src, e.c_src)):
            tq = q @ rots[e.ref].T + ts[e.ref]
            d = np.linalg.norm(p_flat[view] - s * tq, axis=1)
            loss += float(np.dot(c, d))
    return loss


def _plain_loss(P_flat, rots, trans, scales, edges) -> float:
    loss = 0.0
    for k, e in enumerate(edges):
        s, rot, t = scales[k], rots[e.ref], trans[e.ref]
        for view, q, c in ((e.ref, e.q_ref, e.c_ref), (e.src, e.q_src, e.c_src)):
            d = np.linalg.norm(P_flat[view] - s * (q @ rot.T + t), axis=1)
            loss += float(np.dot(c, d))
    return loss


def optimize_alignment(
    observations,
    intrinsics=None,
    config: AlignmentConfig | None = None,
    frame_count: int | None = None,
) -> AlignmentState:
    """Run the configured number of block-coordinate steps on the objective.

    Each step solves, in closed form: the pose of every reference frame
    (confidence- and scale-weighted Procrustes over all incident edge views),
    every edge scale (scalar least squares), then `inner_iterations` sweeps of
    the jointly linear translation/point-map consensus.  Frame 0 pose stays
    identity; log scales are re-centered to zero mean after every step
    (global-scale gauge).  Intrinsics are accepted for interface symmetry but
    unused: observations already carry metric 3D points.
    """
    config = config or AlignmentConfig()
    if config.steps < 1:
        raise ValueError("steps must be >= 1")
    if config.inner_iterations < 1:
        raise ValueError("inner_iterations must be >= 1")
    edges, grid = _flatten_observations(observations)
    if frame_count is None:
        frame_count = max(max(e.ref, e.src) for e in edges) + 1
    _check_connected(edges, frame_count)

    h, w = grid
    n_pix = h * w
    P = np.zeros((frame_count, n_pix, 3))
    seeded = [False] * frame_count
    for e in edges:
        if not seeded[e.ref]:
            P[e.ref] = e.q_ref
            seeded[e.ref] = True
        if not seeded[e.src]:
            P[e.src] = e.q_src
            seeded[e.src] = True
    rots = [np.eye(3) for _ in range(frame_count)]
    trans = np.zeros((frame_count, 3))
    scales = np.ones(len(edges))

    # flat edge-view table: each edge contributes its ref and src views
    views = []  # (view_frame, ref_frame, edge_index, Q (N,3), C (N,))
    for k, e in enumerate(edges):
        views.append((e.ref, e.ref, k, e.q_ref, e.c_ref))
        views.append((e.src, e.ref, k, e.q_src, e.c_src))
    by_ref = {}
    for k, e in enumerate(edges):
        by_ref.setdefault(e.ref, []).append(k)
    csum = np.zeros((frame_count, n_pix))
    for view, _, _, _, c in views:
        csum[view] += c
    if np.any(csum <= 0.0):
        bad = sorted(np.where(csum.sum(axis=1) <= 0.0)[0].tolist())
        raise DisconnectedGraph(bad)

    initial_loss = _plain_loss(P, rots, trans, scales, edges)

    for step in range(config.steps):
        for n, eidx in by_ref.items():
            if n != 0:
                # weighted Procrustes: fit R, t of frame n against all views
                # of its edges, targets P / s, weights C s^2
                qs, ps, ws = [], [], []
                for k in eidx:
                    e, s = edges[k], scales[k]
                    for view, q, c in ((e.ref, e.q_ref, e.c_ref), (e.src, e.q_src, e.c_src)):
                        qs.append(q)
                        ps.append(P[view] / s)
                        ws.append(c * s * s)
                q_all, p_all, w_all = np.concatenate(qs), np.concatenate(ps), np.concatenate(ws)
                wsum = w_all.sum()
                mq = (w_all[:, None] * q_all).sum(axis=0) / wsum
                mp = (w_all[:, None] * p_all).sum(axis=0) / wsum
                cov = ((p_all - mp) * w_all[:, None]).T @ (q_all - mq)
                u, _, vt = np.linalg.svd(cov)
                d = np.sign(np.linalg.det(u @ vt))
                rot = u @ np.diag([1.0, 1.0, d]) @ vt
                rots[n] = rot
                trans[n] = mp - rot @ mq
            rot, t = rots[n], trans[n]
            for k in eidx:
                e = edges[k]
                num = den = 0.0
                for view, q, c in ((e.ref, e.q_ref, e.c_ref), (e.src, e.q_src, e.c_src)):
                    tq = q @ rot.T + t
                    num += float(np.sum(c[:, None] * tq * P[view]))
                    den += float(np.dot(c, np.sum(tq * tq, axis=1)))
                scales[k] = num / den

        # rotations and scales fixed: translations and point maps form a
        # linear consensus problem, relaxed by alternating exact solves
        rotated = [(view, ref, k, scales[k] * (q @ rots[ref].T), c) for view, ref, k, q, c in views]
        t_den = np.zeros(frame_count)
        for _, ref, k, _, c in rotated:
            t_den[ref] += float(c.sum()) * scales[k] * scales[k]
        for _ in range(config.inner_iterations):
            t_num = np.zeros((frame_count, 3))
            for view, ref, k, b, c in rotated:
                t_num[ref] += scales[k] * (c[:, None] * (P[view] - b)).sum(axis=0)
            for n in range(1, frame_count):
                trans[n] = t_num[n] / t_den[n]
            acc = np.zeros_like(P)
            for view, ref, k, b, c in rotated:
                acc[view] += c[:, None] * (b + scales[k] * trans[ref])
            P = acc / csum[:, :, None]

        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(trans)) and np.all(scales > 0.0)):
            raise NonFiniteLoss(step)
        gauge = np.exp(np.mean(np.log(scales)))
        scales /= gauge
        P /= gauge

    final_loss = _plain_loss(P, rots, trans, scales, edges)
    poses = [Pose(rots[f], trans[f]) for f in range(frame_count)]
    return AlignmentState(
        global_pointmaps=P.reshape(frame_count, h, w, 3),
        frame_poses=poses,
        log_scales=np.log(scales),
        edges=[(e.ref, e.src) for e in edges],
        initial_loss=initial_loss,
        final_loss=final_loss,
    )


def umeyama_similarity(src: np.ndarray, dst: np.ndarray):
    """Closed-form similarity fit (scale, rotation, translation) minimizing
    ||dst - s (R src + t)||^2; the independent oracle for alignment tests."""
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    xs, xd = src - mu_s, dst - mu_d
    cov = xd.T @ xs / len(src)
    u, sing, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt))
    diag = np.diag([1.0, 1.0, d])
    rot = u @ diag @ vt
    var_s = float(np.mean(np.sum(xs * xs, axis=1)))
    scale = float(np.trace(np.diag(sing) @ diag)) / var_s
    t = mu_d / scale - rot @ mu_s
    return scale, rot, t
