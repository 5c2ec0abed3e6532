"""Ground-truth world: object geometry and motion, measurements, depth camera, robot."""

from .camera import CameraModel, build_gt_cloud, default_camera, mount_extrinsics, render_depth, render_scan, ring_viewpoints
from .mesh import MeshLoadError, TriangleMesh, default_object_mesh, load_mesh, read_ply, write_off, write_ply
from .motion import (
    ObjectPose2D,
    ObjectTruth,
    RobotState,
    TrajectoryScript,
    execute_motion,
    measure_position,
    step_object,
    within_reach,
)
