import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import K_TEST
from lvslam.config import VisualConfig
from lvslam.errors import (
    DegenerateImageLine,
    DegenerateLine,
    DegenerateTriangulation,
    InsufficientBaseline,
    NoValidObservation,
    ZeroVector,
)
from lvslam.fusion import FusionLine
from lvslam.geometry import PluckerLine, Pose, quat_from_axis_angle
from lvslam.visual import (
    FUSION,
    TRIANGULATED,
    LineLandmark,
    Segment2D,
    absorb_fusion_line,
    depth_check,
    detect_lines,
    direction_residual,
    reprojection_residual,
    triangulate_line,
    triangulate_point,
    trim_endpoints,
)

RNG = np.random.default_rng(5)


class TestDetectLines:
    def test_synthetic_passthrough(self):
        class Frame:
            segments = [Segment2D((0, 0), (100, 0), 1),
                        Segment2D((0, 0), (10, 0), 2)]
        out = detect_lines(Frame(), min_length=30.0)
        assert [s.descriptor_id for s in out] == [1]

    def test_infinite_min_length_rejects_all(self):
        class Frame:
            segments = [Segment2D((0, 0), (500, 0), 1)]
        assert detect_lines(Frame(), min_length=math.inf) == []

    def test_uniform_image_yields_nothing(self):
        assert detect_lines(np.full((80, 80), 0.5), min_length=10) == []

    def test_drawn_line_detected(self):
        image = np.zeros((120, 120))
        for i in range(20, 100):
            image[60, i] = 1.0
        segs = detect_lines(image, min_length=30)
        assert len(segs) == 1
        seg = segs[0]
        assert abs(seg.xs[1] - 60) < 3 and abs(seg.xe[1] - 60) < 3
        assert seg.length > 50


class TestTriangulateLine:
    def test_recovers_world_line(self):
        # world line y=1, z=2, along x; baseline perpendicular to the line
        a, b = np.array([-1.0, 1.0, 2.0]), np.array([2.0, 1.0, 2.0])
        pose1 = Pose.identity()
        pose2 = Pose(np.array([0, 0, 0, 1.0]), np.array([0.0, 1.0, 0.0]))
        segs = []
        for pose in (pose1, pose2):
            inv = pose.inverse()
            uv = []
            for p in (a, b):
                pc = inv.transform(p)
                uv.append([K_TEST[0, 0] * pc[0] / pc[2] + K_TEST[0, 2],
                           K_TEST[1, 1] * pc[1] / pc[2] + K_TEST[1, 2]])
            segs.append(Segment2D(uv[0], uv[1]))
        line = triangulate_line(segs[0], segs[1], pose1, pose2, K_TEST)
        assert abs(abs(line.direction[0]) - 1.0) < 1e-9
        assert line.distance_to_point(a) < 1e-9
        assert line.distance_to_point(b) < 1e-9

    def test_epipolar_degeneracy(self):
        # line parallel to the baseline: both projection planes coincide
        a, b = np.array([-1.0, 1.0, 2.0]), np.array([2.0, 1.0, 2.0])
        pose1 = Pose.identity()
        pose2 = Pose(np.array([0, 0, 0, 1.0]), np.array([1.0, 0.0, 0.0]))
        segs = []
        for pose in (pose1, pose2):
            inv = pose.inverse()
            uv = []
            for p in (a, b):
                pc = inv.transform(p)
                uv.append([K_TEST[0, 0] * pc[0] / pc[2] + K_TEST[0, 2],
                           K_TEST[1, 1] * pc[1] / pc[2] + K_TEST[1, 2]])
            segs.append(Segment2D(uv[0], uv[1]))
        with pytest.raises(DegenerateTriangulation):
            triangulate_line(segs[0], segs[1], pose1, pose2, K_TEST)

    def test_identical_poses_insufficient_baseline(self):
        seg = Segment2D((100, 100), (200, 200))
        with pytest.raises(InsufficientBaseline):
            triangulate_line(seg, seg, Pose.identity(), Pose.identity(), K_TEST)


class TestAbsorbFusionLine:
    def fusion_line(self, a, b):
        return FusionLine(
            line=PluckerLine.from_endpoints(a, b),
            provenance="planar-intersection", support_count=8,
            mean_direction=PluckerLine.from_endpoints(a, b).direction,
            confidence=0.9, segment_id=3)

    def test_absorbed_landmark_matches_endpoint_formula(self):
        a, b = np.array([0.0, 1.0, 2.0]), np.array([3.0, 1.0, 2.0])
        lm = absorb_fusion_line(self.fusion_line(a, b), landmark_id=1)
        assert lm.source == FUSION
        assert np.allclose(np.abs(lm.line.direction), [1, 0, 0])
        assert np.allclose(lm.line.moment, np.cross(a, b) / np.linalg.norm(b - a))
        assert lm.fusion_direction is not None

    def test_existing_triangulated_landmark_keeps_line(self):
        # precedence rule: the triangulated estimate stays the state, the
        # fusion line only contributes its direction
        a, b = np.array([0.0, 1.0, 2.0]), np.array([3.0, 1.0, 2.0])
        fl = self.fusion_line(a, b)
        existing = LineLandmark(
            id=1, line=PluckerLine.from_endpoints((0, 1.1, 2), (3, 1.1, 2)),
            source=TRIANGULATED)
        before = existing.line
        existing.attach_fusion_direction(fl.mean_direction)
        assert existing.source == TRIANGULATED
        assert np.allclose(np.abs(existing.line.moment), np.abs(before.moment))
        assert np.dot(existing.line.direction, existing.fusion_direction) >= 0

    def test_zero_length_raises(self):
        with pytest.raises(DegenerateLine):
            PluckerLine.from_endpoints((1, 1, 1), (1, 1, 1))


class TestTrimEndpoints:
    def line_landmark(self):
        return LineLandmark(
            id=0, line=PluckerLine.from_point_direction((0, 0, 4), (1, 0, 0)),
            source=TRIANGULATED)

    def test_single_observation_back_projects(self):
        lm = self.line_landmark()
        # camera at origin, f=1: world x in [0, 1] maps to pixels u in [0, .25]
        seg = Segment2D((0, 0), (0.25, 0))
        trimmed = trim_endpoints(lm, [seg], [Pose.identity()], np.eye(3))
        ts = sorted(trimmed.parameter_of(p) for p in trimmed.endpoints)
        assert np.allclose(ts, [0.0, 1.0], atol=1e-9)

    def test_two_observations_union(self):
        # oracle: extents [0,1] and [0.5,1.5] on the line parameter union to
        # [0, 1.5]
        lm = self.line_landmark()
        seg1 = Segment2D((0, 0), (0.25, 0))
        pose2 = Pose(np.array([0, 0, 0, 1.0]), np.array([0.5, 0, 0]))
        seg2 = Segment2D((0, 0), (0.25, 0))
        trimmed = trim_endpoints(lm, [seg1, seg2], [Pose.identity(), pose2],
                                 np.eye(3))
        ts = sorted(trimmed.parameter_of(p) for p in trimmed.endpoints)
        assert np.allclose(ts, [0.0, 1.5], atol=1e-9)
        for p in trimmed.endpoints:
            assert trimmed.distance_to_point(p) < 1e-12

    def test_perpendicular_rays_degenerate(self):
        lm = self.line_landmark()
        # vertical image segment: both rays are perpendicular to the line
        seg = Segment2D((0, -0.1), (0, 0.1))
        with pytest.raises(NoValidObservation):
            trim_endpoints(lm, [seg], [Pose.identity()], np.eye(3))


class TestDepthCheck:
    def test_triangulated_keep(self):
        assert depth_check(TRIANGULATED, 0.05) is True

    def test_threshold_split_by_source(self):
        assert depth_check(TRIANGULATED, 0.15) is False
        assert depth_check(FUSION, 0.15) is True

    def test_boundary_kept(self):
        assert depth_check(TRIANGULATED, 0.1) is True
        assert depth_check(FUSION, 0.2) is True

    def test_fusion_threshold_superset(self):
        for r in np.linspace(0, 0.5, 101):
            if depth_check(TRIANGULATED, r):
                assert depth_check(FUSION, r)


class TestReprojectionResidual:
    def test_zero_at_incident_endpoints(self):
        seg = Segment2D((10, 20), (50, 20))
        l = seg.image_line()
        assert np.allclose(reprojection_residual(seg, l), [0.0, 0.0], atol=1e-9)

    def test_unit_normal_line_gives_y(self):
        seg = Segment2D((3, 2), (7, -1))
        e = reprojection_residual(seg, np.array([0.0, 1.0, 0.0]))
        assert np.allclose(e, [2.0, -1.0])

    def test_hand_evaluated_case(self):
        # (3,4,0) line, endpoint (1,1): (3+4)/sqrt(9+16) = 1.4
        seg = Segment2D((1, 1), (0, 0))
        e = reprojection_residual(seg, np.array([3.0, 4.0, 0.0]))
        assert abs(e[0] - 1.4) < 1e-12

    def test_degenerate_image_line(self):
        with pytest.raises(DegenerateImageLine):
            reprojection_residual(Segment2D((0, 0), (1, 1)),
                                  np.array([0.0, 0.0, 1.0]))

    def test_scale_invariance(self):
        seg = Segment2D((11, -3), (40, 17))
        l = np.array([0.3, -1.2, 8.0])
        assert np.allclose(reprojection_residual(seg, l),
                           reprojection_residual(seg, 7.5 * l), atol=1e-12)


class TestDirectionResidual:
    def test_parallel(self):
        assert direction_residual([0, 0, 2.0], [0, 0, 5.0]) == pytest.approx(0.0)

    def test_orthogonal(self):
        assert direction_residual([1, 0, 0], [0, 1, 0]) == pytest.approx(1.0)

    def test_antiparallel(self):
        assert direction_residual([1, 0, 0], [-1, 0, 0]) == pytest.approx(2.0)

    def test_zero_vector_raises(self):
        with pytest.raises(ZeroVector):
            direction_residual([0, 0, 0], [1, 0, 0])

    @given(st.floats(0.01, 100), st.floats(0.01, 100))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance(self, a, b):
        u = np.array([0.3, -0.5, 0.8])
        v = np.array([1.0, 0.2, -0.4])
        assert direction_residual(a * u, b * v) == pytest.approx(
            direction_residual(u, v), abs=1e-12)

    def test_symmetry(self):
        for _ in range(20):
            u, v = RNG.normal(size=3), RNG.normal(size=3)
            assert direction_residual(u, v) == pytest.approx(
                direction_residual(v, u), abs=1e-12)


class TestTriangulatePoint:
    def test_recovers_point(self):
        p = np.array([0.5, -0.3, 4.0])
        pose1 = Pose.identity()
        pose2 = Pose(quat_from_axis_angle([0, 1, 0], 0.05), np.array([1.0, 0, 0]))
        uvs = []
        for pose in (pose1, pose2):
            pc = pose.inverse().transform(p)
            uvs.append([K_TEST[0, 0] * pc[0] / pc[2] + K_TEST[0, 2],
                        K_TEST[1, 1] * pc[1] / pc[2] + K_TEST[1, 2]])
        est = triangulate_point(uvs[0], uvs[1], pose1, pose2, K_TEST)
        assert np.allclose(est, p, atol=1e-9)
