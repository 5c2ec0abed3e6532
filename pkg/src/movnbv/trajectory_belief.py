"""Object-state estimation: fixed-lag smoothing under a white-noise-acceleration
prior, one-step prediction, and the tangential nominal heading.

State layout is ``[px, py, vx, vy]`` throughout.
"""

from dataclasses import dataclass
import math

import numpy as np

from .geometry import wrap_angle

STATE_DIM = 4
H = np.hstack([np.eye(2), np.zeros((2, 2))])


class InsufficientDataError(ValueError):
    """Raised when a smoothing window holds fewer than two measurements."""


@dataclass(frozen=True)
class ObjectState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(2))
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("object state must be finite")

    def as_vector(self):
        return np.concatenate([self.position, self.velocity])


@dataclass(frozen=True)
class PositionMeasurement:
    value: np.ndarray
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "value", np.asarray(self.value, dtype=float).reshape(2))
        if not (np.all(np.isfinite(self.value)) and math.isfinite(self.timestamp)):
            raise ValueError("measurement must be finite")


@dataclass(frozen=True)
class Belief:
    """Gaussian over the planar object state at ``timestamp``."""

    mean: np.ndarray
    covariance: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(STATE_DIM)
        cov = np.asarray(self.covariance, dtype=float).reshape(STATE_DIM, STATE_DIM)
        scale = max(float(np.abs(cov).max()), 1.0)
        if not np.allclose(cov, cov.T, rtol=1e-9, atol=1e-9 * scale):
            raise ValueError("belief covariance must be symmetric")
        cov = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(cov).min() < -1e-9 * max(np.trace(cov), 1e-300):
            raise ValueError("belief covariance must be positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def position(self):
        return self.mean[:2]

    @property
    def velocity(self):
        return self.mean[2:]

    @property
    def position_cov(self):
        return self.covariance[:2, :2]


@dataclass(frozen=True)
class SmootherConfig:
    window_length: int = 8
    process_psd: float = 0.01
    measurement_variance: float = 0.01
    anchor_variance: float = 1e4

    def __post_init__(self):
        if self.window_length < 2:
            raise ValueError("window_length must be >= 2")
        if self.process_psd <= 0 or self.measurement_variance <= 0 or self.anchor_variance <= 0:
            raise ValueError("process_psd, measurement_variance and anchor_variance must be > 0")


def build_transition(dt, q_c):
    """Closed-form transition ``Phi`` and process covariance ``Q`` for a step ``dt``."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    if q_c < 0:
        raise ValueError(f"q_c must be non-negative, got {q_c}")
    eye = np.eye(2)
    Phi = np.eye(STATE_DIM)
    Phi[:2, 2:] = dt * eye
    Q = np.block([
        [(dt**3 / 3.0) * q_c * eye, (dt**2 / 2.0) * q_c * eye],
        [(dt**2 / 2.0) * q_c * eye, dt * q_c * eye],
    ])
    return Phi, Q


def _process_information(dt, q_c):
    # exact inverse of Q(dt); avoids a numerical inversion of an ill-scaled matrix
    eye = np.eye(2)
    return np.block([
        [(12.0 / dt**3) * eye, (-6.0 / dt**2) * eye],
        [(-6.0 / dt**2) * eye, (4.0 / dt) * eye],
    ]) / q_c


def smooth(window, config):
    """Marginal belief of the newest state of a fixed-lag MAP window.

    The chain's information matrix is block tridiagonal, so the newest
    state's marginal follows from one forward block elimination: the Schur
    complement left after eliminating every older state is exactly the
    marginal information of the last one.

    Parameters
    ----------
    window : sequence of PositionMeasurement
        Measurements with strictly increasing timestamps. Only the most
        recent ``config.window_length`` are used.
    config : SmootherConfig

    Returns
    -------
    Belief
        Stamped with the last measurement's timestamp.
    """
    window = list(window)[-config.window_length:]
    if len(window) < 2:
        raise InsufficientDataError(f"need at least 2 measurements, got {len(window)}")
    times = np.array([m.timestamp for m in window])
    dts = np.diff(times)
    if np.any(dts <= 0):
        raise ValueError("measurement timestamps must be strictly increasing")

    R_inv = np.eye(2) / config.measurement_variance
    HtRH = H.T @ R_inv @ H
    n = len(window)

    # weak anchor on the first state, centred on its own measurement so the
    # estimate is exactly translation-equivariant
    anchor_mean = np.concatenate([window[0].value, np.zeros(2)])
    S = np.eye(STATE_DIM) / config.anchor_variance + HtRH
    s = H.T @ R_inv @ window[0].value + anchor_mean / config.anchor_variance
    for j in range(1, n):
        Phi, _ = build_transition(dts[j - 1], config.process_psd)
        Qi = _process_information(dts[j - 1], config.process_psd)
        # contribution of the motion factor between j-1 and j
        S = S + Phi.T @ Qi @ Phi
        off = -Qi @ Phi  # block (j, j-1)
        gain = np.linalg.solve(S, off.T)  # S_{j-1}^{-1} Lambda_{j-1, j}
        S_next = Qi + HtRH - off @ gain
        s = H.T @ R_inv @ window[j].value - gain.T @ s
        S = S_next

    cov = np.linalg.inv(S)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ s
    return Belief(mean, cov, float(times[-1]))


def predict(belief, dt, q_c):
    """Propagate a belief ``dt`` seconds ahead with no measurement update."""
    Phi, Q = build_transition(dt, q_c)
    mean = Phi @ belief.mean
    cov = Phi @ belief.covariance @ Phi.T + Q
    return Belief(mean, cov, belief.timestamp + dt)


def heading_from_velocity(velocity, previous_heading, speed_threshold):
    velocity = np.asarray(velocity, dtype=float)
    if math.hypot(velocity[0], velocity[1]) > speed_threshold:
        return wrap_angle(math.atan2(velocity[1], velocity[0]))
    return wrap_angle(previous_heading)


def nominal_heading(belief, previous_heading=0.0, speed_threshold=0.02):
    """Heading of the mean velocity; ``previous_heading`` when nearly stationary."""
    if speed_threshold <= 0:
        raise ValueError("speed_threshold must be positive")
    return heading_from_velocity(belief.velocity, previous_heading, speed_threshold)
