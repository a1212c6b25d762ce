import math

import numpy as np
import pytest

from lvslam.config import FeatureConfig, LidarConfig
from lvslam.errors import InvalidAlpha, NoCorrespondences, NonLinearPoint, UnknownPointId
from lvslam.geometry import Pose, quat_from_axis_angle
from lvslam.lidar import FeatureClass, classify_points
from lvslam.lidar.odometry import (
    LidarOdometry,
    LocalMap,
    correct_linear_directions,
    icp_register,
    update_local_map,
)

RNG = np.random.default_rng(31)


def structured_scene(rng=RNG, jitter=0.005):
    """Floor, two walls, and poles: enough structure to lock all 6 DoF."""
    parts = []
    for x, y in ((0, 0), (4, 1), (2, -2), (-1, 3)):
        z = np.linspace(0, 2.5, 40)
        parts.append(np.column_stack([np.full_like(z, float(x)),
                                      np.full_like(z, float(y)), z]))
    for axis in range(2):
        u, v = np.meshgrid(np.linspace(-2, 4, 28), np.linspace(0, 2.5, 16))
        if axis == 0:
            parts.append(np.column_stack([u.ravel(), np.full(u.size, -3.0),
                                          v.ravel()]))
        else:
            parts.append(np.column_stack([np.full(u.size, 5.0), u.ravel() - 1,
                                          v.ravel()]))
    fx, fy = np.meshgrid(np.linspace(-2, 5, 30), np.linspace(-3, 3, 26))
    parts.append(np.column_stack([fx.ravel(), fy.ravel(),
                                  np.zeros(fx.size)]))
    pts = np.vstack(parts)
    return pts + rng.normal(scale=jitter, size=pts.shape)


def classified_scene(rng=RNG, jitter=0.005):
    return classify_points(structured_scene(rng, jitter),
                           FeatureConfig(neighbor_radius=0.4))


class TestCorrectLinearDirections:
    def pole_cloud(self):
        z = np.linspace(0, 2, 30)
        pts = np.column_stack([np.zeros_like(z), np.zeros_like(z), z])
        return classify_points(pts)

    def test_idempotent_assignment(self):
        cloud = self.pole_cloud()
        ids = np.nonzero(cloud.class_mask([FeatureClass.PILLAR]))[0]
        direction = cloud.principal_directions[ids[0]].copy()
        out = correct_linear_directions(cloud, [(ids, direction)])
        assert np.allclose(np.abs(out.principal_directions[ids] @ direction),
                           1.0, atol=1e-9)
        assert np.all(out.optimized[ids])
        assert not np.any(cloud.optimized)  # input untouched

    def test_noisy_directions_become_exact(self):
        cloud = self.pole_cloud()
        ids = np.nonzero(cloud.class_mask([FeatureClass.PILLAR]))[0]
        rng = np.random.default_rng(0)
        for i in ids:
            noise = rng.normal(scale=math.radians(5), size=3)
            d = cloud.principal_directions[i] + noise
            cloud.principal_directions[i] = d / np.linalg.norm(d)
        out = correct_linear_directions(cloud, [(ids, np.array([0, 0, 1.0]))])
        dirs = out.principal_directions[ids]
        spread = np.abs(dirs @ np.array([0, 0, 1.0]))
        assert np.allclose(spread, 1.0, atol=1e-12)

    def test_facade_assignment_rejected(self):
        xs, zs = np.meshgrid(np.linspace(0, 3, 20), np.linspace(0, 3, 20))
        wall = np.column_stack([xs.ravel(), np.zeros(xs.size), zs.ravel()])
        cloud = classify_points(wall)
        facade_ids = np.nonzero(cloud.class_mask([FeatureClass.FACADE]))[0]
        with pytest.raises(NonLinearPoint):
            correct_linear_directions(cloud, [(facade_ids[:1], [0, 0, 1.0])])

    def test_unknown_id(self):
        cloud = self.pole_cloud()
        with pytest.raises(UnknownPointId):
            correct_linear_directions(cloud, [([len(cloud) + 5], [0, 0, 1.0])])


class TestIcpRegister:
    def test_fixed_point_identity(self):
        cloud = classified_scene()
        reg = icp_register(cloud, cloud, Pose.identity())
        assert reg.iterations == 1
        assert reg.rms_residual < 1e-12
        assert np.allclose(reg.relative_pose.translation, 0, atol=1e-12)

    def test_recovers_rigid_motion(self):
        target = classified_scene()
        move = Pose(quat_from_axis_angle([0, 0, 1], 0.04),
                    np.array([0.15, -0.1, 0.05]))
        source = target.transformed(move)
        reg = icp_register(source, target, Pose.identity())
        recovered = reg.relative_pose
        expected = move.inverse()
        assert np.linalg.norm(recovered.translation - expected.translation) < 1e-6
        assert recovered.rotation_angle_to(expected) < 1e-6

    def test_disjoint_clouds_no_correspondences(self):
        cloud = classified_scene()
        far = cloud.transformed(Pose(np.array([0, 0, 0, 1.0]),
                                     np.array([100.0, 0, 0])))
        with pytest.raises(NoCorrespondences):
            icp_register(far, cloud, Pose.identity())

    def test_residual_monotonic_over_accepted_iterations(self):
        target = classified_scene()
        move = Pose(quat_from_axis_angle([0, 1, 0], 0.03),
                    np.array([0.2, 0.1, 0.0]))
        source = target.transformed(move)
        reg = icp_register(source, target, Pose.identity())
        assert np.all(np.diff(reg.residual_history) <= 1e-15)

    def test_registration_equivariance(self):
        target = classified_scene()
        move = Pose(quat_from_axis_angle([0, 0, 1], 0.05), np.array([0.1, 0.2, 0]))
        source = target.transformed(move)
        base = icp_register(source, target, Pose.identity()).relative_pose

        G = Pose(quat_from_axis_angle([1, 1, 1], 0.7), np.array([3.0, -2.0, 1.0]))
        conj = icp_register(source.transformed(G), target.transformed(G),
                            G @ Pose.identity() @ G.inverse()).relative_pose
        expected = G @ base @ G.inverse()
        assert np.linalg.norm(conj.translation - expected.translation) < 1e-6
        assert conj.rotation_angle_to(expected) < 1e-6


class TestLocalMap:
    def make_cloud(self, n, optimized_n, frame_id, rng):
        pts = rng.uniform(0, 10, size=(n, 3))
        cloud = classify_points(pts, FeatureConfig(neighbor_radius=3.0))
        cloud.optimized[:optimized_n] = True
        cloud.frame_id = frame_id
        return cloud

    def test_alpha_one_keeps_all_optimized(self):
        rng = np.random.default_rng(1)
        m = LocalMap(window=5)
        cloud = self.make_cloud(200, 180, 0, rng)
        m = update_local_map(m, cloud, alpha=1.0)
        assert int(m.merged.optimized.sum()) == 180

    def test_rate_bound_enforced(self):
        # counting oracle: 100 points, 80 optimized, alpha = 0.5
        rng = np.random.default_rng(2)
        m = LocalMap(window=5)
        cloud = self.make_cloud(100, 80, 0, rng)
        m = update_local_map(m, cloud, alpha=0.5)
        assert m.optimized_rate() <= 0.5

    def test_window_eviction(self):
        rng = np.random.default_rng(3)
        m = LocalMap(window=5)
        for k in range(6):
            m = update_local_map(m, self.make_cloud(50, 0, k, rng), alpha=0.6)
        assert len(m.frames) == 5
        assert m.frame_ids == [1, 2, 3, 4, 5]

    def test_invalid_alpha(self):
        with pytest.raises(InvalidAlpha):
            update_local_map(LocalMap(), self.make_cloud(
                10, 0, 0, np.random.default_rng(0)), alpha=0.0)

    def test_rate_bound_across_many_updates(self):
        rng = np.random.default_rng(4)
        m = LocalMap(window=5)
        alpha = 0.6
        for k in range(12):
            n_opt = rng.integers(0, 90)
            m = update_local_map(m, self.make_cloud(100, n_opt, k, rng), alpha)
            assert m.optimized_rate() <= alpha + 1e-12
            assert len(m.frames) <= 5


class TestLidarOdometry:
    def test_static_world_identity_increments(self):
        # the map is voxel-decimated, so a static pose settles within a few
        # millimeters of identity rather than exactly on it
        odo = LidarOdometry()
        cloud = classified_scene()
        poses = []
        for _ in range(4):
            result = odo.track(cloud, odo.predict())
            assert not result.degraded
            poses.append(result.pose)
        for pose in poses:
            assert np.linalg.norm(pose.translation) < 5e-3
            assert np.degrees(pose.rotation_angle_to(Pose.identity())) < 0.2

    def test_constant_velocity_sequence(self):
        rng = np.random.default_rng(9)
        world = structured_scene(rng, jitter=0.004)
        odo = LidarOdometry()
        errors = []
        for k in range(8):
            gt = Pose(quat_from_axis_angle([0, 0, 1], 0.01 * k),
                      np.array([0.1 * k, 0.02 * k, 0.0]), timestamp=0.1 * k)
            sensor_pts = gt.inverse().transform(world)
            cloud = classify_points(sensor_pts, FeatureConfig(neighbor_radius=0.4))
            result = odo.track(cloud, odo.predict())
            errors.append(np.linalg.norm(result.pose.translation - gt.translation))
        assert max(errors) < 0.01

    def test_empty_pipeline_degrades_gracefully(self):
        odo = LidarOdometry()
        cloud = classified_scene()
        odo.track(cloud, odo.predict())
        far = cloud.transformed(Pose(np.array([0, 0, 0, 1.0]),
                                     np.array([500.0, 0, 0])))
        result = odo.track(far, Pose(np.array([0, 0, 0, 1.0]),
                                     np.array([500.0, 0, 0])))
        assert result.degraded is True
