"""Pinhole depth camera: intrinsics, robot mounting, and mesh ray casting."""

from dataclasses import dataclass, field
import math

import numpy as np

from ..geometry import invert, make_transform, planar_pose, rot_y, transform_points

# optical frame (x right, y down, z forward) expressed in the robot base frame
# (x forward, y left, z up)
BASE_FROM_OPTICAL = np.array([
    [0.0, 0.0, 1.0],
    [-1.0, 0.0, 0.0],
    [0.0, -1.0, 0.0],
])


def mount_extrinsics(height=0.5, pitch=math.radians(10.0)):
    """Robot-base -> camera-optical transform for a camera at ``height``
    pitched down by ``pitch`` radians."""
    return make_transform(rot_y(pitch) @ BASE_FROM_OPTICAL, [0.0, 0.0, height])


@dataclass(frozen=True)
class CameraModel:
    K: np.ndarray
    width: int
    height: int
    extrinsics: np.ndarray = field(default_factory=mount_extrinsics)
    depth_min: float = 0.1
    depth_max: float = 4.0

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        if K.shape != (3, 3) or abs(K[1, 0]) + abs(K[2, 0]) + abs(K[2, 1]) > 0:
            raise ValueError("K must be upper-triangular 3x3")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if not self.depth_min < self.depth_max:
            raise ValueError("depth_min must be < depth_max")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "extrinsics", np.asarray(self.extrinsics, dtype=float))

    @classmethod
    def pinhole(cls, focal, width, height, **kw):
        K = np.array([[focal, 0.0, (width - 1) / 2.0], [0.0, focal, (height - 1) / 2.0], [0.0, 0.0, 1.0]])
        return cls(K, width, height, **kw)

    def pixel_grid(self, stride=1):
        """Sample pixel coordinates (u, v) at the centres of ``stride`` blocks."""
        off = (stride - 1) / 2.0
        us = np.arange(0, self.width, stride) + off
        vs = np.arange(0, self.height, stride) + off
        return us, vs

    def rays(self, stride=1):
        """Camera-frame ray directions K^-1 (u, v, 1), one per sampled pixel.

        Directions have unit z, so the ray parameter equals optical depth.
        Returns (directions, (u, v)) with pixels ordered row-major.
        """
        us, vs = self.pixel_grid(stride)
        uu, vv = np.meshgrid(us, vs)
        pix = np.stack([uu.ravel(), vv.ravel(), np.ones(uu.size)], axis=1)
        dirs = pix @ np.linalg.inv(self.K).T
        return dirs, (uu.ravel(), vv.ravel())

    def world_pose(self, robot_position, robot_heading):
        """World -> camera-optical pose for a robot at the given planar pose."""
        return planar_pose(robot_position, robot_heading) @ self.extrinsics


def default_camera():
    return CameraModel.pinhole(280.0, 320, 240)


def _first_hits(dirs, corners, depth_min, depth_max, chunk=2048):
    """Nearest ray-triangle hit depth per ray (inf where none), rays from the origin."""
    v0 = corners[:, 0]
    e1 = corners[:, 1] - v0
    e2 = corners[:, 2] - v0
    tvec = -v0
    qvec = np.cross(tvec, e1)
    e2q = np.einsum("tk,tk->t", e2, qvec)
    out = np.full(len(dirs), np.inf)
    for s in range(0, len(dirs), chunk):
        D = dirs[s:s + chunk, None, :]
        pvec = np.cross(D, e2[None])
        det = np.einsum("tk,rtk->rt", e1, pvec)
        ok = np.abs(det) > 1e-12
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        u = np.einsum("tk,rtk->rt", tvec, pvec) * inv
        v = np.einsum("rk,tk->rt", D[:, 0, :], qvec) * inv
        t = e2q[None, :] * inv
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= depth_min) & (t <= depth_max)
        t = np.where(hit, t, np.inf)
        out[s:s + chunk] = t.min(axis=1)
    return out


def render_scan(camera_world_pose, object_pose, mesh, camera, stride=4, depth_noise=0.0, rng=None):
    """Depth observation split into surface hits and no-return rays.

    Returns (hits, misses): world-frame surface points, and world-frame
    endpoints at ``depth_max`` for sampled pixels whose ray hit nothing.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    world_from_body = planar_pose(object_pose.position, object_pose.heading)
    cam_from_body = invert(camera_world_pose) @ world_from_body
    corners = transform_points(cam_from_body, mesh.corners.reshape(-1, 3)).reshape(-1, 3, 3)
    dirs, _ = camera.rays(stride)
    depth = _first_hits(dirs, corners, camera.depth_min, camera.depth_max)
    keep = np.isfinite(depth)
    misses = dirs[~keep] * camera.depth_max
    depth = depth[keep]
    if depth_noise > 0:
        if rng is None:
            raise ValueError("depth noise needs an rng")
        depth = depth + rng.normal(0.0, depth_noise, size=depth.shape)
    pts_cam = dirs[keep] * depth[:, None]
    return transform_points(camera_world_pose, pts_cam), transform_points(camera_world_pose, misses)


def render_depth(camera_world_pose, object_pose, mesh, camera, stride=4, depth_noise=0.0, rng=None):
    """Simulated depth observation as a world-frame point cloud.

    Each sampled pixel's ray is intersected with the posed mesh; the nearest
    hit inside the depth range becomes a point. Pixels without a hit are
    dropped.
    """
    return render_scan(camera_world_pose, object_pose, mesh, camera, stride, depth_noise, rng)[0]


def ring_viewpoints(stand_off, angular_step_deg=15.0, center=(0.0, 0.0)):
    """Inward-facing planar robot poses evenly spaced on a circle."""
    n = max(1, int(round(360.0 / angular_step_deg)))
    out = []
    for i in range(n):
        phi = math.radians(i * 360.0 / n)
        pos = (center[0] + stand_off * math.cos(phi), center[1] + stand_off * math.sin(phi))
        yaw = math.atan2(center[1] - pos[1], center[0] - pos[0])
        out.append((np.array(pos), yaw))
    return out


def build_gt_cloud(mesh, camera, stand_off, angular_step_deg=15.0, stride=2):
    """Merged cloud from inward-facing views around the object, in its body frame."""
    from .motion import ObjectPose2D

    if not camera.depth_min <= stand_off <= camera.depth_max:
        raise ValueError("stand_off must lie within the camera depth range")
    origin = ObjectPose2D(np.zeros(2), 0.0)
    clouds = [
        render_depth(camera.world_pose(pos, yaw), origin, mesh, camera, stride)
        for pos, yaw in ring_viewpoints(stand_off, angular_step_deg)
    ]
    return np.vstack(clouds) if clouds else np.zeros((0, 3))
