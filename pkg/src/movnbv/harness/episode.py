"""One closed-loop reconstruction episode and its per-iteration log."""

from collections import deque
import csv
from dataclasses import dataclass, replace
from functools import lru_cache
import io
import math
import time

import numpy as np

from ..geometry import invert, planar_pose, transform_points
from ..planner import plan_step
from ..scoring import summarize
from ..trajectory_belief import SmootherConfig, smooth
from ..voxel_map import MapFrame, VoxelGrid, completeness_from_keys, extract_frontier, integrate_cloud, occupied_centers, set_frame, voxel_keys
from ..world import (
    CameraModel,
    RobotState,
    build_gt_cloud,
    default_object_mesh,
    execute_motion,
    load_mesh,
    measure_position,
    mount_extrinsics,
    render_scan,
    step_object,
)

COLUMNS = (
    "iteration", "timestamp",
    "meas_x", "meas_y",
    "true_x", "true_y", "true_heading",
    "post_px", "post_py", "post_vx", "post_vy", "post_trace_p", "post_trace_v",
    "pred_px", "pred_py", "pred_vx", "pred_vy", "pred_trace_p", "pred_trace_v",
    "frame_x", "frame_y", "frame_heading",
    "robot_x", "robot_y", "robot_yaw",
    "cand_index", "cand_x", "cand_y", "cand_yaw",
    "expected_score", "feasible_count", "fallback",
    "next_robot_x", "next_robot_y", "next_robot_yaw",
    "v_max", "omega_max", "completeness",
)
TIMING_COLUMNS = ("iteration", "scoring_ms", "step_ms")

# streams drawn from one episode seed; the object trajectory and measurement
# noise are shared by every method run with that seed
_OBJECT, _MEASURE, _PLANNER, _SUMMARY = range(4)


@dataclass
class StepRecord:
    values: dict
    scoring_seconds: float
    step_seconds: float


@dataclass
class EpisodeLog:
    records: list

    @property
    def completeness(self):
        return [r.values["completeness"] for r in self.records]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.records:
            w.writerow([_fmt(r.values[c]) for c in COLUMNS])
        return buf.getvalue()

    def timing_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for r in self.records:
            w.writerow([r.values["iteration"], f"{1e3 * r.scoring_seconds:.3f}", f"{1e3 * r.step_seconds:.3f}"])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def make_camera(cc):
    ext = mount_extrinsics(cc.mount_height, math.radians(cc.pitch_deg))
    cam = CameraModel.pinhole(cc.focal, cc.width, cc.height, extrinsics=ext)
    return replace(cam, depth_min=cc.depth_min, depth_max=cc.depth_max)


def make_mesh(path):
    return load_mesh(path) if path else default_object_mesh()


@lru_cache(maxsize=8)
def _gt_keys_cached(mesh_path, camera_cfg, stand_off, step_deg, resolution):
    cloud = build_gt_cloud(make_mesh(mesh_path), make_camera(camera_cfg), stand_off, step_deg)
    return voxel_keys(cloud, resolution)


def gt_keys(config):
    return _gt_keys_cached(config.mesh, config.camera, config.planner.stand_off,
                           config.gt_angular_step_deg, config.map.completeness_resolution)


def observable_ceiling(camera, cc, stand_off):
    """Highest point inside the image at horizontal range ``stand_off``."""
    half_vfov = math.atan2(camera.K[1, 2] + 0.5, camera.K[1, 1])
    return cc.mount_height + stand_off * math.tan(half_vfov - math.radians(cc.pitch_deg))


def make_grid(config, camera):
    mc = config.map
    c = np.asarray(mc.center, float)
    lo = c - mc.size / 2.0
    hi = c + mc.size / 2.0
    if mc.z_range:
        lo[2], hi[2] = mc.z_range
    elif mc.observable_roi:
        lo[2] = 0.0
        hi[2] = min(hi[2], observable_ceiling(camera, config.camera, config.planner.stand_off))
    return VoxelGrid(lo, hi, mc.resolution)


def _streams(seed):
    return [np.random.default_rng([int(seed), s]) for s in range(4)]


def _initial_robot(truth, config):
    phi = truth.heading + math.radians(config.robot_start_azimuth_deg)
    pos = truth.position + config.planner.stand_off * np.array([math.cos(phi), math.sin(phi)])
    d = truth.position - pos
    return RobotState(pos, math.atan2(d[1], d[0]))


class Episode:
    """Closed-loop simulation state; ``step()`` runs one planning iteration."""

    def __init__(self, config, seed):
        self.config = config
        self.seed = seed
        rng = _streams(seed)
        self.rng_object, self.rng_measure, self.rng_planner, self.rng_summary = rng
        self.camera = make_camera(config.camera)
        self.mesh = make_mesh(config.mesh)
        self.gt = gt_keys(config)
        pc = config.planner
        # a static object has no displacement to scale by; keep the configured limit
        v_max = config.speed_factor * config.nominal_displacement / pc.dt if config.nominal_displacement > 0 else pc.v_max
        self.planner = replace(pc, v_max=v_max,
                               process_psd=config.trajectory.q_c if config.trajectory.q_c > 0 else pc.process_psd)
        self.smoother = SmootherConfig(config.window_length, self.planner.process_psd, config.sigma**2
                                       if config.sigma > 0 else 1e-8, config.anchor_variance)
        self.grid = make_grid(config, self.camera)
        self.keys = np.zeros(0, dtype=np.int64)
        self.window = deque(maxlen=config.window_length)
        self.truth = config.trajectory.initial_state()
        self.time = 0.0
        self.heading = self.truth.heading
        # warm-up: the smoother needs two measurements before the first plan,
        # so the object is tracked for L-1 steps before the robot starts
        for _ in range(config.window_length - 1):
            self._measure()
            self._advance()
        self.robot = _initial_robot(self.truth, config)
        self.iteration = 0

    def _measure(self):
        m = measure_position(self.truth.position, self.config.sigma, self.rng_measure, self.time)
        self.window.append(m)
        return m

    def _advance(self):
        self.truth = step_object(self.truth, self.planner.dt, self.config.trajectory, self.rng_object)
        self.time += self.planner.dt

    def observe(self):
        """Render from the current robot pose and fuse into map and completeness keys."""
        cc = self.config.camera
        cam_pose = self.camera.world_pose(self.robot.position, self.robot.heading)
        cloud, misses = render_scan(cam_pose, self.truth.pose, self.mesh, self.camera, cc.render_stride,
                                    cc.depth_noise, self.rng_measure if cc.depth_noise > 0 else None)
        frame = MapFrame(self.truth.pose) if self.config.map.register_with_gt else self.frame
        integrate_cloud(self.grid, frame, cam_pose[:3, 3], cloud, misses if cc.carve_misses else None)
        # completeness is scored in the true body frame
        body = transform_points(invert(planar_pose(self.truth.position, self.truth.heading)), cloud)
        self.keys = np.union1d(self.keys, voxel_keys(body, self.config.map.completeness_resolution))
        return cloud

    def step(self):
        t_start = time.perf_counter()
        meas = self._measure()
        post = smooth(self.window, self.smoother)
        self.frame = set_frame(post, self.heading, self.planner.speed_threshold)
        self.heading = self.frame.pose.heading
        view_pose = self.robot
        self.observe()
        comp = completeness_from_keys(self.keys, self.gt)
        sc = self.config.summary
        self.summary = summarize(extract_frontier(self.grid), occupied_centers(self.grid), self.rng_summary,
                                 max_points=sc.max_points, per_cluster=sc.per_cluster, k_max=sc.k_max,
                                 mvee_tol=sc.mvee_tol)
        res = plan_step(post, self.robot, self.summary, self.camera, self.planner, self.rng_planner, self.heading)
        self.last_plan = res
        c = res.candidate
        self.robot = execute_motion(self.robot, c.planar_position, c.yaw, self.planner.v_max,
                                    self.planner.omega_max, self.planner.dt)
        pred = res.belief
        values = {
            "iteration": self.iteration, "timestamp": self.time,
            "meas_x": meas.value[0], "meas_y": meas.value[1],
            "true_x": self.truth.position[0], "true_y": self.truth.position[1], "true_heading": self.truth.heading,
            "post_px": post.mean[0], "post_py": post.mean[1], "post_vx": post.mean[2], "post_vy": post.mean[3],
            "post_trace_p": np.trace(post.covariance[:2, :2]), "post_trace_v": np.trace(post.covariance[2:, 2:]),
            "pred_px": pred.mean[0], "pred_py": pred.mean[1], "pred_vx": pred.mean[2], "pred_vy": pred.mean[3],
            "pred_trace_p": np.trace(pred.covariance[:2, :2]), "pred_trace_v": np.trace(pred.covariance[2:, 2:]),
            "frame_x": self.frame.pose.position[0], "frame_y": self.frame.pose.position[1],
            "frame_heading": self.frame.pose.heading,
            "robot_x": view_pose.position[0], "robot_y": view_pose.position[1], "robot_yaw": view_pose.heading,
            "cand_index": c.azimuth_index, "cand_x": c.planar_position[0], "cand_y": c.planar_position[1],
            "cand_yaw": c.yaw, "expected_score": res.expected_score, "feasible_count": len(res.feasible),
            "fallback": res.fallback,
            "next_robot_x": self.robot.position[0], "next_robot_y": self.robot.position[1],
            "next_robot_yaw": self.robot.heading,
            "v_max": self.planner.v_max, "omega_max": self.planner.omega_max, "completeness": comp,
        }
        self._advance()
        self.iteration += 1
        return StepRecord(values, res.scoring_seconds, time.perf_counter() - t_start)


def run_episode(config, seed):
    """Run ``config.iterations`` planning iterations; deterministic given the seed."""
    ep = Episode(config, seed)
    return EpisodeLog([ep.step() for _ in range(config.iterations)])
