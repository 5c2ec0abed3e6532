"""Experiment configuration, closed-loop episodes, sweeps and the CLI."""

from .config import ConfigError, ExperimentConfig, config_from_dict, load_config, save_config, with_overrides
from .episode import COLUMNS, Episode, EpisodeLog, StepRecord, gt_keys, make_camera, make_grid, make_mesh, run_episode
from .grid import Cell, GridResult, SUMMARY_COLUMNS, cell_config, grid_cells, run_grid, summary_rows
