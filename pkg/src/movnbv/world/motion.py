"""Ground-truth object motion, position measurements, and unicycle robot execution."""

from dataclasses import dataclass
import math

import numpy as np

from ..geometry import wrap_angle
from ..trajectory_belief import PositionMeasurement, heading_from_velocity

KINDS = ("white-noise-acceleration", "s-curve", "constant-velocity")


@dataclass(frozen=True)
class ObjectPose2D:
    position: np.ndarray
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class ObjectTruth:
    """Ground-truth object state carried by the simulator."""

    position: np.ndarray
    velocity: np.ndarray
    heading: float
    time: float = 0.0

    @property
    def pose(self):
        return ObjectPose2D(self.position, self.heading)


@dataclass(frozen=True)
class TrajectoryScript:
    """How the object moves.

    ``white-noise-acceleration`` samples the exact discretisation of the
    constant-velocity prior with PSD ``q_c``. ``s-curve`` follows
    ``start + speed*t*e_x + amplitude*sin(2 pi t / period)*e_y`` rotated by
    ``direction``. ``constant-velocity`` never changes velocity.
    """

    kind: str = "white-noise-acceleration"
    initial_position: tuple = (0.0, 0.0)
    initial_velocity: tuple = (0.5, 0.0)
    q_c: float = 0.01
    speed: float = 0.5
    amplitude: float = 0.6
    period: float = 12.0
    direction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}; expected one of {KINDS}")
        if self.q_c < 0:
            raise ValueError("q_c must be >= 0")
        if self.kind == "s-curve" and self.period <= 0:
            raise ValueError("s-curve period must be positive")

    def initial_state(self):
        if self.kind == "s-curve":
            pos, vel = self._s_curve(0.0)
        else:
            pos = np.array(self.initial_position, dtype=float)
            vel = np.array(self.initial_velocity, dtype=float)
        return ObjectTruth(pos, vel, heading_from_velocity(vel, self.direction, 1e-9), 0.0)

    def _s_curve(self, t):
        w = 2.0 * math.pi / self.period
        local_p = np.array([self.speed * t, self.amplitude * math.sin(w * t)])
        local_v = np.array([self.speed, self.amplitude * w * math.cos(w * t)])
        c, s = math.cos(self.direction), math.sin(self.direction)
        R = np.array([[c, -s], [s, c]])
        return np.asarray(self.initial_position, float) + R @ local_p, R @ local_v


def step_object(state, dt, script, rng, speed_threshold=0.02):
    """Advance the ground-truth object by ``dt``; returns the new ObjectTruth."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t = state.time + dt
    if script.kind == "white-noise-acceleration":
        q = script.q_c
        # per-axis Cholesky factor of [[dt^3/3, dt^2/2], [dt^2/2, dt]] * q
        l11 = math.sqrt(q * dt**3 / 3.0)
        l21 = math.sqrt(3.0 * q * dt) / 2.0
        l22 = math.sqrt(q * dt / 4.0)
        z = rng.standard_normal(4)
        pos = state.position + dt * state.velocity + l11 * z[:2]
        vel = state.velocity + l21 * z[:2] + l22 * z[2:]
    elif script.kind == "constant-velocity":
        pos = state.position + dt * state.velocity
        vel = state.velocity.copy()
    else:
        pos, vel = script._s_curve(t)
    heading = heading_from_velocity(vel, state.heading, speed_threshold)
    return ObjectTruth(pos, vel, heading, t)


def measure_position(true_position, sigma, rng, timestamp=0.0):
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    noise = rng.normal(0.0, 1.0, size=2) * sigma
    return PositionMeasurement(np.asarray(true_position, float) + noise, timestamp)


def within_reach(robot, target_position, target_yaw, v_max, omega_max, dt):
    """Single-step reachability: travel and wrapped yaw change both within limits."""
    dist = float(np.linalg.norm(np.asarray(target_position, float) - robot.position))
    dyaw = abs(wrap_angle(target_yaw - robot.heading))
    return dist <= v_max * dt and dyaw <= omega_max * dt


def execute_motion(robot, target_position, target_yaw, v_max, omega_max, dt):
    """Drive toward a target pose for one step under unicycle speed limits."""
    if v_max <= 0 or omega_max <= 0 or dt <= 0:
        raise ValueError("motion limits and dt must be positive")
    target_position = np.asarray(target_position, dtype=float)
    delta = target_position - robot.position
    dist = float(np.linalg.norm(delta))
    reach = v_max * dt
    if dist <= reach:
        position = target_position.copy()
    else:
        position = robot.position + delta * (reach / dist)

    dyaw = wrap_angle(target_yaw - robot.heading)
    turn = omega_max * dt
    if abs(dyaw) <= turn:
        heading = wrap_angle(target_yaw)
    else:
        heading = wrap_angle(robot.heading + math.copysign(turn, dyaw))
    return RobotState(position, heading)
