"""Small rigid-transform helpers shared across modules."""

import math

import numpy as np


def wrap_angle(angle):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    angle = np.asarray(angle, dtype=float)
    wrapped = np.mod(angle + np.pi, 2.0 * np.pi) - np.pi
    # np.mod maps +pi to -pi; flip those back so the interval is (-pi, pi].
    wrapped = np.where(wrapped <= -np.pi, np.pi, wrapped)
    # leave in-range inputs bit-exact
    wrapped = np.where((angle > -np.pi) & (angle <= np.pi), angle, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def rot_z(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def make_transform(rotation, translation):
    T = np.eye(4)
    T[:3, :3] = rotation
    T[:3, 3] = translation
    return T


def planar_pose(position, heading):
    """SE(3) embedding of a planar pose: yaw about z, translation in the ground plane."""
    return make_transform(rot_z(heading), [position[0], position[1], 0.0])


def invert(T):
    """Inverse of a rigid transform."""
    R = T[..., :3, :3]
    t = T[..., :3, 3]
    out = np.zeros_like(T)
    Rt = np.swapaxes(R, -1, -2)
    out[..., :3, :3] = Rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", Rt, t)
    out[..., 3, 3] = 1.0
    return out


def transform_points(T, points):
    """Apply a 4x4 rigid transform to an (n, 3) array of points."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    return points @ T[:3, :3].T + T[:3, 3]
