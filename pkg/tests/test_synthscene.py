"""Synthetic scene oracle: determinism, geometric consistency, observations."""

import numpy as np
import pytest

from camreframe.alignment import build_graph
from camreframe.errors import FrameOutOfRange, InvalidSpec
from camreframe.geometry import Pose, pose_invert, unproject_pixel
from camreframe.synthscene import (
    default_intrinsics,
    emit_edge_observations,
    make_bundle,
    make_scene,
    render_gt,
)
from camreframe.trajectory import identity_trajectory

from conftest import sweep_trajectory


def test_make_scene_validation():
    with pytest.raises(InvalidSpec):
        make_scene("weird")
    with pytest.raises(InvalidSpec):
        make_scene("static", frames=1)
    with pytest.raises(InvalidSpec):
        make_scene("static", resolution=(4, 4))


def test_static_scene_has_no_movers():
    assert make_scene("static").movers == ()


def test_dynamic_scene_linear_motion():
    scene = make_scene("dynamic", frames=16)
    for m in scene.movers:
        np.testing.assert_allclose(m.center(15) - m.center(0), 15 * m.velocity, atol=1e-12)
    assert len(scene.movers) == 2


def test_determinism():
    a = make_scene("dynamic", 8, (32, 24), seed=42)
    b = make_scene("dynamic", 8, (32, 24), seed=42)
    assert np.array_equal(a.plane_freq, b.plane_freq)
    k = default_intrinsics(32, 24)
    ia, *_ = render_gt(a, Pose.identity(), k, 0)
    ib, *_ = render_gt(b, Pose.identity(), k, 0)
    assert np.array_equal(ia, ib)


def test_background_only_axis_aligned_depth():
    scene = make_scene("static", 2, (16, 12), seed=0)
    k = default_intrinsics(16, 12)
    _, depth, _, validity = render_gt(scene, Pose.identity(), k, 0)
    assert np.all(validity == 1.0)
    # fronto-parallel plane: camera-z depth is constant d_bg
    np.testing.assert_allclose(depth, scene.background_depth, atol=1e-9)


def test_pointmap_consistency_with_unproject():
    scene = make_scene("dynamic", 4, (16, 12), seed=2)
    k = default_intrinsics(16, 12)
    pose = sweep_trajectory(4).frames[2].pose
    _, depth, pm, validity = render_gt(scene, pose, k, 2)
    inv = pose_invert(pose)
    for v, u in [(3, 4), (7, 11), (0, 0)]:
        if validity[v, u] < 0.5:
            continue
        cam = unproject_pixel(k, u + 0.0, v + 0.0, depth[v, u])
        world = inv.apply(cam)
        np.testing.assert_allclose(world, pm[v, u], atol=1e-6)


def test_frame_out_of_range():
    scene = make_scene("static", 2, (16, 12))
    with pytest.raises(FrameOutOfRange):
        render_gt(scene, Pose.identity(), default_intrinsics(16, 12), 2)


def test_bundle_shapes(small_static_bundle):
    scene, traj, bundle = small_static_bundle
    f = scene.frame_count
    h, w = bundle.intrinsics.height, bundle.intrinsics.width
    assert bundle.frames.shape == (f, 3, h, w)
    assert bundle.depth.shape == (f, h, w)
    assert bundle.pointmaps.shape == (f, h, w, 3)
    assert bundle.validity.shape == (f, h, w)
    assert np.all(bundle.frames >= 0) and np.all(bundle.frames <= 1)


def test_static_scene_pointmaps_static(small_static_bundle):
    # same world surface regardless of frame index for the static scene:
    # render frame 0 and frame 5 from one pose and compare point maps
    scene, traj, bundle = small_static_bundle
    k = bundle.intrinsics
    _, _, pm0, _ = render_gt(scene, traj.frames[0].pose, k, 0)
    _, _, pm5, _ = render_gt(scene, traj.frames[0].pose, k, 5)
    assert np.abs(pm0 - pm5).max() < 1e-9


def test_dynamic_scene_pointmaps_differ(small_dynamic_bundle):
    scene, traj, bundle = small_dynamic_bundle
    k = bundle.intrinsics
    _, _, pm0, _ = render_gt(scene, Pose.identity(), k, 0)
    _, _, pm7, _ = render_gt(scene, Pose.identity(), k, 7)
    assert np.abs(pm0 - pm7).max() > 1e-3


def test_observations_consistent_zero_noise():
    traj = sweep_trajectory(4)
    scene = make_scene("static", 4, (16, 12), seed=1)
    k = default_intrinsics(16, 12)
    obs = emit_edge_observations(scene, traj, build_graph(4, 2), k, 0.0, 0)
    for ob in obs:
        # ref map re-expressed in world frame must match the scene surface
        assert np.all(ob.confidence_ref > 0) and np.all(ob.confidence_ref <= 1)
        pose_n = traj.frames[ob.ref_frame].pose
        world = pose_invert(pose_n).apply(ob.pointmap_ref)
        _, _, pm, _ = render_gt(scene, pose_n, k, ob.ref_frame)
        np.testing.assert_allclose(world, pm, atol=1e-9)


def test_observations_identity_poses_match():
    traj = identity_trajectory(3)
    scene = make_scene("static", 3, (16, 12), seed=1)
    k = default_intrinsics(16, 12)
    obs = emit_edge_observations(scene, traj, [(0, 1)], k, 0.0, 0)
    np.testing.assert_allclose(obs[0].pointmap_ref, obs[0].pointmap_src, atol=1e-9)


def test_observations_noise_is_seeded():
    traj = sweep_trajectory(3)
    scene = make_scene("static", 3, (16, 12), seed=1)
    k = default_intrinsics(16, 12)
    a = emit_edge_observations(scene, traj, [(0, 1)], k, 0.01, 5)
    b = emit_edge_observations(scene, traj, [(0, 1)], k, 0.01, 5)
    c = emit_edge_observations(scene, traj, [(0, 1)], k, 0.01, 6)
    assert np.array_equal(a[0].pointmap_ref, b[0].pointmap_ref)
    assert not np.array_equal(a[0].pointmap_ref, c[0].pointmap_ref)
