"""Prediction-conditioned candidate viewpoints, reachability filtering, and Monte Carlo selection."""

from dataclasses import dataclass, field
import math
import time

import numpy as np

from .geometry import invert, planar_pose, wrap_angle
from .scoring import score_poses
from .trajectory_belief import heading_from_velocity, nominal_heading, predict

METHODS = ("predictive", "non_predictive", "tracking_only", "random", "predicted_mean")
SHAPES = ("ellipse", "ring")


@dataclass(frozen=True)
class EllipseParams:
    center: np.ndarray
    heading: float
    semi_axes: tuple
    stand_off: float
    kappa: float
    azimuth_count: int

    def __post_init__(self):
        a, b = self.semi_axes
        if self.azimuth_count < 3:
            raise ValueError("need at least 3 azimuths")
        if a < self.stand_off or b < self.stand_off:
            raise ValueError("semi-axes must be at least the stand-off distance")


@dataclass(frozen=True)
class CandidateViewpoint:
    planar_position: np.ndarray
    yaw: float
    camera_pose: np.ndarray  # camera optical frame -> world
    azimuth_index: int


@dataclass(frozen=True)
class PlannerConfig:
    v_max: float = 1.0
    omega_max: float = math.pi / 2
    dt: float = 1.0
    n_samples: int = 40
    method: str = "predictive"
    candidate_shape: str = "ellipse"
    stand_off: float = 1.2
    kappa: float = 2.0
    azimuths: int = 32
    alpha: float = 0.5
    stride: int = 2
    process_psd: float = 0.01
    speed_threshold: float = 0.02

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.candidate_shape not in SHAPES:
            raise ValueError(f"unknown candidate shape {self.candidate_shape!r}")
        if min(self.v_max, self.omega_max, self.dt, self.stand_off, self.kappa, self.process_psd) <= 0:
            raise ValueError("limits, dt, stand-off, kappa and q_c must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.azimuths < 3:
            raise ValueError("azimuths must be >= 3")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass
class PlanResult:
    candidate: CandidateViewpoint
    expected_score: float
    belief: object  # the belief candidates were generated from
    candidates: list
    feasible: list
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fallback: bool = False
    scoring_seconds: float = 0.0


def candidate_ellipse(belief, previous_heading, config):
    heading = nominal_heading(belief, previous_heading, config.speed_threshold)
    P = belief.position_cov
    if config.candidate_shape == "ring":
        lam = max(float(np.linalg.eigvalsh(P).max()), 0.0)
        a = b = config.stand_off + config.kappa * math.sqrt(lam)
    else:
        c, s = math.cos(heading), math.sin(heading)
        R = np.array([[c, -s], [s, c]])
        Pr = R.T @ P @ R
        a = config.stand_off + config.kappa * math.sqrt(max(Pr[0, 0], 0.0))
        b = config.stand_off + config.kappa * math.sqrt(max(Pr[1, 1], 0.0))
    return EllipseParams(belief.position.copy(), heading, (a, b), config.stand_off, config.kappa, config.azimuths)


def generate_candidates(belief, previous_heading, config, camera):
    """Inward-facing viewpoints at uniform azimuths on the uncertainty-adapted ellipse."""
    ell = candidate_ellipse(belief, previous_heading, config)
    a, b = ell.semi_axes
    c, s = math.cos(ell.heading), math.sin(ell.heading)
    R = np.array([[c, -s], [s, c]])
    out = []
    for i in range(ell.azimuth_count):
        phi = 2.0 * math.pi * i / ell.azimuth_count
        q = np.array([a * math.cos(phi), b * math.sin(phi)])
        p = ell.center + R @ q
        to_center = ell.center - p
        yaw = wrap_angle(math.atan2(to_center[1], to_center[0]))
        out.append(CandidateViewpoint(p, yaw, camera.world_pose(p, yaw), i))
    return out


def filter_reachable(candidates, robot, config):
    """Candidates reachable in one step; falls back to the nearest one if none are.

    Returns (feasible, fallback_used).
    """
    reach = config.v_max * config.dt
    turn = config.omega_max * config.dt
    feasible = [
        c for c in candidates
        if np.linalg.norm(c.planar_position - robot.position) <= reach
        and abs(wrap_angle(c.yaw - robot.heading)) <= turn
    ]
    if feasible:
        return feasible, False
    dists = [np.linalg.norm(c.planar_position - robot.position) for c in candidates]
    return [candidates[int(np.argmin(dists))]], True


def sample_object_states(belief, n, rng, previous_heading=0.0, speed_threshold=0.02):
    """Draw n object states; returns (positions (n, 2), velocities (n, 2), headings (n,))."""
    cov = 0.5 * (belief.covariance + belief.covariance.T)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # semidefinite: factor through the clipped eigendecomposition so
        # degenerate directions stay exactly at the mean
        w, V = np.linalg.eigh(cov)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    x = belief.mean + rng.standard_normal((n, 4)) @ L.T
    fallback = nominal_heading(belief, previous_heading, speed_threshold)
    headings = np.array([heading_from_velocity(v, fallback, speed_threshold) for v in x[:, 2:]])
    return x[:, :2], x[:, 2:], headings


def relative_poses(candidates, positions, headings):
    """Camera poses in each sampled object frame, shape (C, N, 4, 4)."""
    frames_inv = invert(np.stack([planar_pose(p, h) for p, h in zip(positions, headings)]))
    cams = np.stack([c.camera_pose for c in candidates])
    return np.einsum("nij,cjk->cnik", frames_inv, cams)


def expected_scores(candidates, positions, headings, summary, camera, alpha=0.5, stride=2):
    """Monte Carlo mean of the deterministic score, one value per candidate."""
    rel = relative_poses(candidates, positions, headings)
    C, N = rel.shape[:2]
    return score_poses(rel.reshape(-1, 4, 4), summary, camera, alpha, stride).reshape(C, N).mean(axis=1)


def expected_score(candidate, positions, headings, summary, camera, alpha=0.5, stride=2):
    return float(expected_scores([candidate], positions, headings, summary, camera, alpha, stride)[0])


def select(candidates, scores):
    """Highest score; ties go to the lowest azimuth index."""
    scores = np.asarray(scores, dtype=float)
    best = scores.max()
    tied = [c for c, s in zip(candidates, scores) if s == best]
    return min(tied, key=lambda c: c.azimuth_index)


def plan_step(belief, robot, summary, camera, config, rng, previous_heading=0.0):
    """Choose the next viewpoint from the posterior belief at the current step."""
    method = config.method
    if method == "non_predictive":
        base = belief
    else:
        base = predict(belief, config.dt, config.process_psd)
    candidates = generate_candidates(base, previous_heading, config, camera)
    feasible, fallback = filter_reachable(candidates, robot, config)
    t0 = time.perf_counter()
    if method == "tracking_only":
        d = np.array([np.linalg.norm(c.planar_position - base.position) for c in feasible])
        scores = -np.round(d, 9)
    elif method == "random":
        scores = np.zeros(len(feasible))
        scores[int(rng.integers(len(feasible)))] = 1.0
    else:
        if method == "predicted_mean":
            positions = base.position[None]
            headings = np.array([nominal_heading(base, previous_heading, config.speed_threshold)])
        else:
            positions, _, headings = sample_object_states(
                base, config.n_samples, rng, previous_heading, config.speed_threshold)
        scores = expected_scores(feasible, positions, headings, summary, camera, config.alpha, config.stride)
    elapsed = time.perf_counter() - t0
    chosen = select(feasible, scores)
    k = next(i for i, c in enumerate(feasible) if c is chosen)
    return PlanResult(chosen, float(scores[k]), base, candidates, feasible, scores, fallback, elapsed)
