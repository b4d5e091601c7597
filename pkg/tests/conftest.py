"""Shared fixtures: small synthetic scenes and ground-truth trajectories."""

import numpy as np
import pytest

from camreframe.geometry import Pose, rotation_about_axis
from camreframe.synthscene import default_intrinsics, make_bundle, make_scene
from camreframe.trajectory import Trajectory, TrajectoryFrame


def sweep_trajectory(frames, deg_per_frame=2.0, axis=(0.3, 1.0, 0.1)):
    """Gentle rotation + translation ramp used as ground truth in most tests."""
    out = tuple(
        TrajectoryFrame(
            j,
            Pose(
                rotation_about_axis(axis, np.deg2rad(deg_per_frame * j)),
                np.array([0.04 * j, -0.02 * j, 0.01 * j]),
            ),
        )
        for j in range(frames)
    )
    return Trajectory(out)


@pytest.fixture(scope="session")
def small_static_bundle():
    """6-frame 16x12 static scene with the sweep trajectory."""
    scene = make_scene("static", 6, (16, 12), seed=1)
    k = default_intrinsics(16, 12)
    traj = sweep_trajectory(6)
    return scene, traj, make_bundle(scene, traj, k)


@pytest.fixture(scope="session")
def medium_static_bundle():
    """16-frame 64x48 static scene (the acceptance-scale resolution)."""
    scene = make_scene("static", 16, (64, 48), seed=3)
    k = default_intrinsics(64, 48)
    traj = sweep_trajectory(16, deg_per_frame=0.6)
    return scene, traj, make_bundle(scene, traj, k)


@pytest.fixture(scope="session")
def small_dynamic_bundle():
    """8-frame 32x24 dynamic scene (moving spheres), static camera.

    The fixed camera makes time-static union renders constant across frames
    (exact depth ties resolve to frame 0), isolating object motion."""
    scene = make_scene("dynamic", 8, (32, 24), seed=5)
    k = default_intrinsics(32, 24)
    traj = Trajectory(tuple(TrajectoryFrame(j, Pose.identity()) for j in range(8)))
    return scene, traj, make_bundle(scene, traj, k)
