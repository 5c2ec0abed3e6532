"""Experiment configuration, loaded from YAML with command-line overrides."""

from dataclasses import asdict, dataclass, field, fields, replace
import math
from pathlib import Path

import yaml

from ..planner import METHODS, SHAPES, PlannerConfig
from ..world.motion import TrajectoryScript


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CameraConfig:
    focal: float = 280.0
    width: int = 320
    height: int = 240
    mount_height: float = 0.5
    pitch_deg: float = 10.0
    depth_min: float = 0.1
    depth_max: float = 4.0
    render_stride: int = 4
    depth_noise: float = 0.0
    carve_misses: bool = True  # no-return rays clear free space out to depth_max


@dataclass(frozen=True)
class MapConfig:
    center: tuple = (0.0, 0.0, 0.5)
    size: float = 1.2
    # vertical extent; empty -> ground up to the highest point the camera
    # sees at stand-off distance (cube of ``size`` when observable_roi is off)
    z_range: tuple = ()
    observable_roi: bool = True
    resolution: float = 0.03
    completeness_resolution: float = 0.03
    register_with_gt: bool = False


@dataclass(frozen=True)
class SummaryConfig:
    per_cluster: int = 150
    k_max: int = 6
    max_points: int = 2000
    mvee_tol: float = 1e-4


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run an episode or a sweep.

    ``planner.v_max`` is replaced at run time by
    ``speed_factor * nominal object displacement per step / dt``; it is only
    used as is when the object is static.
    """

    mesh: str = ""  # empty -> built-in test object
    trajectory: TrajectoryScript = field(default_factory=lambda: TrajectoryScript(q_c=0.015))
    sigma: float = 0.10
    window_length: int = 8
    anchor_variance: float = 1e4
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    map: MapConfig = field(default_factory=MapConfig)
    summary: SummaryConfig = field(default_factory=SummaryConfig)
    iterations: int = 10
    speed_factor: float = 2.0
    robot_start_azimuth_deg: float = -90.0
    gt_angular_step_deg: float = 15.0
    methods: tuple = ("predictive", "non_predictive", "tracking_only")
    seeds: tuple = tuple(range(10))
    noise_levels: tuple = ()
    speed_factors: tuple = ()
    shapes: tuple = ()
    sample_counts: tuple = ()
    output_dir: str = "results"

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        for s in self.shapes:
            if s not in SHAPES:
                raise ConfigError(f"unknown candidate shape {s!r}")
        if self.sigma < 0 or any(s < 0 for s in self.noise_levels):
            raise ConfigError("sigma must be >= 0")
        if self.speed_factor <= 0 or any(f <= 0 for f in self.speed_factors):
            raise ConfigError("speed factors must be positive")
        if any(n < 1 for n in self.sample_counts):
            raise ConfigError("sample counts must be >= 1")
        if self.window_length < 2:
            raise ConfigError("window_length must be >= 2")

    @property
    def nominal_displacement(self):
        """Object travel per planning step used to scale the robot speed limit."""
        t = self.trajectory
        speed = t.speed if t.kind == "s-curve" else math.hypot(*t.initial_velocity)
        return speed * self.planner.dt

    def to_dict(self):
        return _plain(asdict(self))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


_NESTED = {
    "trajectory": TrajectoryScript,
    "planner": PlannerConfig,
    "camera": CameraConfig,
    "map": MapConfig,
    "summary": SummaryConfig,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kw = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        kw[k] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def config_from_dict(data):
    data = dict(data or {})
    kw = {}
    for k, v in data.items():
        if k in _NESTED:
            kw[k] = _build(_NESTED[k], v or {}, k)
        else:
            kw[k] = tuple(v) if isinstance(v, list) else v
    return _build(ExperimentConfig, kw, "config")


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with path.open() as fh:
        return config_from_dict(yaml.safe_load(fh))


def save_config(config, path):
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))


def with_overrides(config, **top):
    """Copy with top-level fields and dotted nested fields (``planner.n_samples``) replaced."""
    nested = {}
    flat = {}
    for k, v in top.items():
        if v is None:
            continue
        if "." in k:
            head, tail = k.split(".", 1)
            nested.setdefault(head, {})[tail] = v
        else:
            flat[k] = v
    for head, kv in nested.items():
        try:
            flat[head] = replace(getattr(config, head), **kv)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{head}: {e}") from e
    try:
        return replace(config, **flat)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
