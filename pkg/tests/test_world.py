import math

import numpy as np
import pytest

from movnbv.geometry import invert, transform_points, wrap_angle
from movnbv.world import (
    CameraModel,
    ObjectPose2D,
    ObjectTruth,
    RobotState,
    TrajectoryScript,
    TriangleMesh,
    build_gt_cloud,
    default_camera,
    default_object_mesh,
    execute_motion,
    load_mesh,
    measure_position,
    read_ply,
    render_depth,
    render_scan,
    step_object,
    write_off,
    write_ply,
)
from movnbv.world.mesh import MeshLoadError, box_mesh, merge
from movnbv.trajectory_belief import build_transition

from oracles import point_mesh_distance


def camera_looking_along_x(camera, z=0.0):
    """Camera at the origin whose optical axis is world +x, no pitch."""
    R = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    T = np.eye(4)
    T[:3, :3] = R
    T[2, 3] = z
    return T


def unit_cube(center):
    c = np.asarray(center, float)
    return merge([box_mesh(c - 0.5, c + 0.5)])


class TestStepObject:
    def test_noiseless_constant_velocity(self):
        script = TrajectoryScript(q_c=0.0, initial_velocity=(0.5, 0.0))
        s = script.initial_state()
        out = step_object(s, 1.0, script, np.random.default_rng(0))
        np.testing.assert_array_equal(out.position, [0.5, 0.0])
        np.testing.assert_array_equal(out.velocity, [0.5, 0.0])

    def test_deterministic_with_seed(self):
        script = TrajectoryScript(q_c=0.02)

        def run():
            rng = np.random.default_rng(7)
            s = script.initial_state()
            traj = []
            for _ in range(20):
                s = step_object(s, 1.0, script, rng)
                traj.append(np.concatenate([s.position, s.velocity, [s.heading]]))
            return np.array(traj)

        np.testing.assert_array_equal(run(), run())

    def test_s_curve_step_length(self):
        script = TrajectoryScript(kind="s-curve", speed=0.5, amplitude=0.3, period=16.0)
        s = script.initial_state()
        rng = np.random.default_rng(0)
        for _ in range(12):
            nxt = step_object(s, 1.0, script, rng)
            step = np.linalg.norm(nxt.position - s.position)
            assert 0.45 < step < 0.6
            s = nxt

    def test_heading_tangential(self):
        script = TrajectoryScript(kind="s-curve")
        s = step_object(script.initial_state(), 1.0, script, None)
        assert s.heading == pytest.approx(math.atan2(s.velocity[1], s.velocity[0]))

    def test_heading_retained_when_stopped(self):
        script = TrajectoryScript(kind="constant-velocity", initial_velocity=(0.0, 0.0))
        s = ObjectTruth(np.zeros(2), np.zeros(2), 1.1)
        assert step_object(s, 1.0, script, None).heading == 1.1

    def test_increment_covariance_matches_q(self):
        q, dt = 0.015, 1.0
        script = TrajectoryScript(q_c=q)
        rng = np.random.default_rng(11)
        Phi, Q = build_transition(dt, q)
        s = ObjectTruth(np.zeros(2), np.array([0.5, 0.0]), 0.0)
        incs = []
        for _ in range(10_000):
            nxt = step_object(s, dt, script, rng)
            x0 = np.concatenate([s.position, s.velocity])
            x1 = np.concatenate([nxt.position, nxt.velocity])
            incs.append(x1 - Phi @ x0)
            s = nxt
        C = np.cov(np.array(incs).T)
        diag = np.diag(Q)
        np.testing.assert_allclose(np.diag(C), diag, rtol=0.1)
        np.testing.assert_allclose(C[0, 2], Q[0, 2], rtol=0.1)
        np.testing.assert_allclose(C[1, 3], Q[1, 3], rtol=0.1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TrajectoryScript(kind="zigzag")


class TestMeasurePosition:
    def test_zero_noise(self):
        m = measure_position([1.0, 2.0], 0.0, np.random.default_rng(0), 3.0)
        np.testing.assert_array_equal(m.value, [1.0, 2.0])
        assert m.timestamp == 3.0

    def test_statistics(self):
        rng = np.random.default_rng(5)
        draws = np.array([measure_position([1.0, -1.0], 0.10, rng).value for _ in range(10_000)])
        err = draws - [1.0, -1.0]
        np.testing.assert_allclose(err.std(axis=0), 0.10, rtol=0.05)
        assert np.linalg.norm(err.mean(axis=0)) < 0.005


class TestRenderDepth:
    def test_cube_depth_bounds(self):
        cam = CameraModel.pinhole(200.0, 160, 120)
        T = camera_looking_along_x(cam)
        pts = render_depth(T, ObjectPose2D((0, 0), 0), unit_cube((2.0, 0, 0)), cam, stride=2)
        assert len(pts) > 0
        depth = transform_points(invert(T), pts)[:, 2]
        assert depth.min() >= 1.5 - 1e-9 and depth.max() <= 2.5 + 1e-9

    def test_object_behind_camera(self):
        cam = CameraModel.pinhole(200.0, 160, 120)
        T = camera_looking_along_x(cam)
        pts = render_depth(T, ObjectPose2D((0, 0), 0), unit_cube((-3.0, 0, 0)), cam)
        assert pts.shape == (0, 3)

    @pytest.mark.parametrize("d, s, f", [(2.0, 0.4, 300.0), (1.5, 0.3, 250.0), (3.0, 0.8, 200.0)])
    def test_square_face_width(self, d, s, f):
        cam = CameraModel.pinhole(f, 320, 240)
        T = camera_looking_along_x(cam)
        # thin slab whose front face is an s x s square at depth d
        mesh = merge([box_mesh((d, -s / 2, -s / 2), (d + 0.05, s / 2, s / 2))])
        pts = render_depth(T, ObjectPose2D((0, 0), 0), mesh, cam, stride=1)
        pc = transform_points(invert(T), pts)
        u = f * pc[:, 0] / pc[:, 2] + cam.K[0, 2]
        width = u.max() - u.min() + 1
        assert abs(width - f * s / d) <= 2.0

    def test_points_on_surface(self):
        mesh = default_object_mesh()
        cam = default_camera()
        pose = ObjectPose2D((0.4, -0.2), 0.7)
        T = cam.world_pose((-0.8, -0.5), 0.3)
        pts = render_depth(T, pose, mesh, cam, stride=8)
        assert len(pts) > 20
        from movnbv.geometry import planar_pose

        body = transform_points(invert(planar_pose(pose.position, pose.heading)), pts)
        d = [point_mesh_distance(p, mesh.vertices, mesh.triangles) for p in body[::5]]
        assert max(d) < 1e-6

    def test_scan_partitions_samples(self):
        cam = CameraModel.pinhole(200.0, 160, 120)
        T = camera_looking_along_x(cam)
        hits, misses = render_scan(T, ObjectPose2D((0, 0), 0), unit_cube((2.0, 0, 0)), cam, stride=4)
        assert len(hits) + len(misses) == len(range(0, 160, 4)) * len(range(0, 120, 4))
        # misses end at the far clipping plane
        np.testing.assert_allclose(transform_points(invert(T), misses)[:, 2], cam.depth_max, atol=1e-9)
        np.testing.assert_array_equal(hits, render_depth(T, ObjectPose2D((0, 0), 0), unit_cube((2.0, 0, 0)), cam))

    def test_bad_stride(self):
        with pytest.raises(ValueError):
            render_depth(np.eye(4), ObjectPose2D((0, 0), 0), default_object_mesh(), default_camera(), stride=0)

    def test_deterministic(self):
        mesh, cam = default_object_mesh(), default_camera()
        T = cam.world_pose((-1.2, 0.1), 0.0)
        a = render_depth(T, ObjectPose2D((0, 0), 0.2), mesh, cam)
        b = render_depth(T, ObjectPose2D((0, 0), 0.2), mesh, cam)
        np.testing.assert_array_equal(a, b)


class TestExecuteMotion:
    def test_reaches_feasible_target(self):
        r = RobotState((0, 0), 0.0)
        out = execute_motion(r, (0.3, 0.4), 0.5, 1.0, 1.0, 1.0)
        np.testing.assert_array_equal(out.position, [0.3, 0.4])
        assert out.heading == 0.5

    def test_translation_clamped(self):
        r = RobotState((0, 0), 0.0)
        out = execute_motion(r, (6.0, 8.0), 0.0, 1.0, 1.0, 1.0)
        np.testing.assert_allclose(out.position, [0.6, 0.8])
        assert np.linalg.norm(out.position) == pytest.approx(1.0)

    def test_rotation_clamped(self):
        r = RobotState((0, 0), 0.3)
        out = execute_motion(r, (0, 0), 0.3 + math.pi, 1.0, math.pi / 4, 1.0)
        assert abs(wrap_angle(out.heading - 0.3)) == pytest.approx(math.pi / 4)

    def test_limits_never_violated(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            r = RobotState(rng.normal(size=2) * 3, rng.uniform(-math.pi, math.pi))
            v, w, dt = rng.uniform(0.1, 2), rng.uniform(0.1, 3), rng.uniform(0.1, 2)
            out = execute_motion(r, rng.normal(size=2) * 3, rng.uniform(-10, 10), v, w, dt)
            assert np.linalg.norm(out.position - r.position) <= v * dt + 1e-9
            assert abs(wrap_angle(out.heading - r.heading)) <= w * dt + 1e-9


class TestGroundTruthCloud:
    def test_covers_visible_vertices(self):
        mesh = merge([box_mesh((-0.2, -0.15, 0.2), (0.25, 0.15, 0.6))])
        cam = default_camera()
        cloud = build_gt_cloud(mesh, cam, 1.2, 15.0, stride=2)
        # a vertex is visible from some view if the ray to it hits nothing closer
        from movnbv.world.camera import ring_viewpoints, _first_hits

        checked = 0
        for v in mesh.vertices:
            for pos, yaw in ring_viewpoints(1.2, 15.0):
                T = cam.world_pose(pos, yaw)
                pc = transform_points(invert(T), v[None])[0]
                if pc[2] <= cam.depth_min:
                    continue
                u = cam.K @ (pc / pc[2])
                if not (0 <= u[0] < cam.width and 0 <= u[1] < cam.height):
                    continue
                corners = transform_points(invert(T), mesh.corners.reshape(-1, 3)).reshape(-1, 3, 3)
                hit = _first_hits((pc / pc[2])[None], corners, cam.depth_min, cam.depth_max)[0]
                if hit >= pc[2] - 1e-6:
                    d = np.linalg.norm(cloud - v, axis=1).min()
                    assert d < 2 * 0.03
                    checked += 1
                    break
        assert checked >= 4

    def test_single_view(self):
        mesh, cam = default_object_mesh(), default_camera()
        one = build_gt_cloud(mesh, cam, 1.2, 360.0)
        assert len(one) > 0
        # the single camera sits on +x, so the far vertical (-x) face is unseen
        far_face = (np.abs(one[:, 0] + 0.31) < 1e-6) & (one[:, 2] < 0.40)
        assert not far_face.any()
        full = build_gt_cloud(mesh, cam, 1.2, 15.0)
        assert (np.abs(full[:, 0] + 0.31) < 1e-6).any()

    def test_empty_mesh_rejected(self):
        with pytest.raises(ValueError):
            TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3)))


class TestMeshIO:
    def test_off_roundtrip(self, tmp_path):
        mesh = default_object_mesh()
        write_off(tmp_path / "m.off", mesh)
        back = load_mesh(tmp_path / "m.off")
        np.testing.assert_allclose(back.vertices, mesh.vertices)
        np.testing.assert_array_equal(back.triangles, mesh.triangles)

    def test_off_quads_triangulated(self, tmp_path):
        (tmp_path / "q.off").write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
        assert load_mesh(tmp_path / "q.off").triangles.shape == (2, 3)

    def test_binary_stl(self, tmp_path):
        import struct

        mesh = default_object_mesh()
        with open(tmp_path / "m.stl", "wb") as fh:
            fh.write(b"\0" * 80 + struct.pack("<I", len(mesh.triangles)))
            for tri in mesh.corners:
                fh.write(struct.pack("<3f", 0, 0, 0) + struct.pack("<9f", *tri.ravel()) + b"\0\0")
        back = load_mesh(tmp_path / "m.stl")
        assert len(back.triangles) == len(mesh.triangles)
        np.testing.assert_allclose(np.sort(back.corners.reshape(-1, 3), axis=0),
                                   np.sort(mesh.corners.reshape(-1, 3), axis=0), atol=1e-6)

    def test_ascii_stl(self, tmp_path):
        text = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n"
        (tmp_path / "t.stl").write_text(text)
        m = load_mesh(tmp_path / "t.stl")
        assert m.triangles.shape == (1, 3)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshLoadError):
            load_mesh(tmp_path / "nope.off")

    def test_ply_roundtrip(self, tmp_path):
        pts = np.random.default_rng(0).normal(size=(10, 3))
        write_ply(tmp_path / "c.ply", pts)
        text = (tmp_path / "c.ply").read_text()
        assert "element vertex 10" in text and "property float z" in text
        np.testing.assert_allclose(read_ply(tmp_path / "c.ply"), pts, atol=1e-6)
