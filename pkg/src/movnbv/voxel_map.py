"""Bounded object-centric voxel map: ray carving, frontier extraction, completeness."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import invert, planar_pose, transform_points
from .trajectory_belief import nominal_heading
from .world.motion import ObjectPose2D

UNKNOWN, FREE, OCCUPIED = 0, 1, 2
LABEL_NAMES = {UNKNOWN: "unknown", FREE: "free", OCCUPIED: "occupied"}

_NEIGHBOURS = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


@dataclass(frozen=True)
class MapFrame:
    """Pose of the object-centric map frame in the world."""

    pose: ObjectPose2D

    @property
    def world_from_frame(self):
        return planar_pose(self.pose.position, self.pose.heading)

    def to_frame(self, points_world):
        return transform_points(invert(self.world_from_frame), points_world)


def set_frame(belief, previous_heading=0.0, speed_threshold=0.02):
    """Map frame at the posterior mean position, aligned with the tangential heading."""
    heading = nominal_heading(belief, previous_heading, speed_threshold)
    return MapFrame(ObjectPose2D(belief.position.copy(), heading))


class VoxelGrid:
    """Dense label grid over an axis-aligned box in the map frame.

    Voxel ``(i, j, k)`` covers ``lo + res*[i, j, k]`` to ``lo + res*[i+1, j+1, k+1]``.
    """

    def __init__(self, lo=(-0.6, -0.6, -0.1), hi=(0.6, 0.6, 1.1), resolution=0.03):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        if np.any(hi <= lo):
            raise ValueError("extent must be strictly positive on every axis")
        self.resolution = float(resolution)
        self.lo = lo
        self.shape = tuple(int(n) for n in np.maximum(1, np.round((hi - lo) / resolution)))
        self.hi = lo + self.resolution * np.array(self.shape)
        self.labels = np.full(self.shape, UNKNOWN, dtype=np.int8)

    @classmethod
    def centered(cls, center=(0.0, 0.0, 0.5), size=1.2, resolution=0.03):
        c = np.asarray(center, dtype=float)
        return cls(c - size / 2.0, c + size / 2.0, resolution)

    def copy(self):
        out = VoxelGrid.__new__(VoxelGrid)
        out.resolution, out.lo, out.hi, out.shape = self.resolution, self.lo.copy(), self.hi.copy(), self.shape
        out.labels = self.labels.copy()
        return out

    def index_of(self, points):
        return np.floor((np.asarray(points, float) - self.lo) / self.resolution).astype(np.int64)

    def inside(self, idx):
        return np.all((idx >= 0) & (idx < np.array(self.shape)), axis=-1)

    def centers(self, idx):
        return self.lo + (np.asarray(idx, float) + 0.5) * self.resolution

    def voxels(self, label):
        return np.argwhere(self.labels == label)

    def dump(self, path):
        """ASCII dump, one ``i j k label`` line per observed voxel."""
        idx = np.argwhere(self.labels != UNKNOWN)
        lines = [f"{i} {j} {k} {LABEL_NAMES[int(self.labels[i, j, k])]}" for i, j, k in idx]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def _clip_segments(origin, d, lo, hi):
    """Parametric [t_enter, t_exit] of segments origin + t*d, t in [0, 1], inside the box."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - origin) / d
        t2 = (hi - origin) / d
    parallel = d == 0
    inside_slab = (origin >= lo) & (origin <= hi)
    tmin = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2))
    tmax = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2))
    t_enter = np.maximum(tmin.max(axis=1), 0.0)
    t_exit = np.minimum(tmax.min(axis=1), 1.0)
    return t_enter, t_exit


def traverse(grid, origin, points):
    """Voxels crossed by the segments origin -> point, excluding each endpoint voxel.

    Integer-stepping (Amanatides-Woo) traversal, vectorised across rays.
    Returns an (m, 3) index array, possibly with repeats.
    """
    origin = np.asarray(origin, dtype=float)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    d = points - origin
    t_enter, t_exit = _clip_segments(origin, d, grid.lo, grid.hi)
    ok = t_enter < t_exit
    if not ok.any():
        return np.zeros((0, 3), dtype=np.int64)
    d = d[ok]
    t_enter, t_exit = t_enter[ok], t_exit[ok]
    end = grid.index_of(points[ok])
    end_inside = grid.inside(end)
    shape = np.array(grid.shape)
    res = grid.resolution

    t_mid = t_enter + 1e-9 * (t_exit - t_enter)
    start = origin + t_mid[:, None] * d
    idx = np.clip(grid.index_of(start), 0, shape - 1)
    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_delta = np.where(d != 0, res / np.abs(d), np.inf)
        boundary = grid.lo + (idx + (step > 0)) * res
        t_max = np.where(d != 0, (boundary - origin) / d, np.inf)

    active = np.ones(len(d), dtype=bool)
    rows = np.arange(len(d))
    out = []
    for _ in range(int(shape.sum()) + 3):
        at_end = end_inside & np.all(idx == end, axis=1)
        active &= ~at_end
        if not active.any():
            break
        out.append(idx[active].copy())
        axis = np.argmin(t_max, axis=1)
        t_next = t_max[rows, axis]
        active &= t_next < t_exit
        idx[rows, axis] += step[rows, axis]
        t_max[rows, axis] += t_delta[rows, axis]
        active &= np.all((idx >= 0) & (idx < shape), axis=1)
    if not out:
        return np.zeros((0, 3), dtype=np.int64)
    return np.vstack(out)


def integrate_cloud(grid, frame, camera_origin_world, cloud_world, free_endpoints=None):
    """Fuse a world-frame cloud into ``grid`` (in place) and return the grid.

    Crossed voxels become Free unless already Occupied; each endpoint voxel
    inside the extent becomes Occupied. ``free_endpoints`` are far ends of
    no-return rays: they carve Free space but mark nothing Occupied.
    """
    cloud_world = np.asarray(cloud_world, dtype=float).reshape(-1, 3)
    free_world = np.zeros((0, 3)) if free_endpoints is None else np.asarray(free_endpoints, float).reshape(-1, 3)
    if not (np.all(np.isfinite(cloud_world)) and np.all(np.isfinite(free_world))):
        raise ValueError("cloud contains non-finite points")
    if len(cloud_world) == 0 and len(free_world) == 0:
        return grid
    pts = frame.to_frame(cloud_world)
    cam = frame.to_frame(np.asarray(camera_origin_world, float)[None])[0]
    crossed = traverse(grid, cam, np.vstack([pts, frame.to_frame(free_world)]) if len(free_world) else pts)
    if len(crossed):
        i, j, k = crossed.T
        sel = grid.labels[i, j, k] != OCCUPIED
        grid.labels[i[sel], j[sel], k[sel]] = FREE
    end = grid.index_of(pts)
    end = end[grid.inside(end)]
    if len(end):
        grid.labels[end[:, 0], end[:, 1], end[:, 2]] = OCCUPIED
    return grid


def frontier_mask(grid):
    free = grid.labels == FREE
    near_free = np.zeros_like(free)
    for axis in range(3):
        for shift in (1, -1):
            src = [slice(None)] * 3
            dst = [slice(None)] * 3
            if shift == 1:
                src[axis], dst[axis] = slice(1, None), slice(None, -1)
            else:
                src[axis], dst[axis] = slice(None, -1), slice(1, None)
            near_free[tuple(dst)] |= free[tuple(src)]
    return (grid.labels == UNKNOWN) & near_free


def extract_frontier(grid):
    """Centres (map frame) of Unknown voxels with at least one Free 6-neighbour."""
    return grid.centers(np.argwhere(frontier_mask(grid)))


def occupied_centers(grid):
    return grid.centers(grid.voxels(OCCUPIED))


def voxel_keys(points, resolution):
    """Integer voxel keys for a cloud, one per distinct voxel (sorted)."""
    idx = np.floor(np.asarray(points, float).reshape(-1, 3) / resolution).astype(np.int64)
    off = 1 << 20
    idx = idx + off
    keys = (idx[:, 0] << 42) | (idx[:, 1] << 21) | idx[:, 2]
    return np.unique(keys)


def completeness(reconstructed, gt, resolution):
    """Percentage of ground-truth voxels also hit by the reconstruction."""
    gt_keys = voxel_keys(gt, resolution)
    if len(gt_keys) == 0:
        raise ValueError("ground-truth cloud is empty")
    rec_keys = voxel_keys(reconstructed, resolution)
    return completeness_from_keys(rec_keys, gt_keys)


def completeness_from_keys(rec_keys, gt_keys):
    if len(gt_keys) == 0:
        raise ValueError("ground-truth cloud is empty")
    hit = np.intersect1d(rec_keys, gt_keys, assume_unique=True)
    return 100.0 * len(hit) / len(gt_keys)
