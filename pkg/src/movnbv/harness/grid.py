"""Sweeps over methods, noise levels, speed factors, candidate shapes and sample counts."""

import csv
from dataclasses import dataclass, field
import itertools
from pathlib import Path

import numpy as np

from .config import with_overrides
from .episode import run_episode

SUMMARY_COLUMNS = ("method", "sigma", "speed_factor", "shape", "n_samples", "iteration",
                   "n_ok", "n_failed", "mean", "std")


@dataclass(frozen=True)
class Cell:
    method: str
    sigma: float
    speed_factor: float
    shape: str
    n_samples: int

    @property
    def tag(self):
        return f"{self.method}_sigma{self.sigma:g}_sf{self.speed_factor:g}_{self.shape}_n{self.n_samples}"


@dataclass
class GridResult:
    logs: dict = field(default_factory=dict)  # (cell, seed) -> EpisodeLog
    errors: dict = field(default_factory=dict)  # (cell, seed) -> message

    def final(self, cell):
        """Final completeness per successful seed, in seed order."""
        return [log.completeness[-1] for (c, _), log in sorted(self.logs.items(), key=lambda kv: kv[0][1])
                if c == cell]

    def cells(self):
        seen = []
        for c, _ in list(self.logs) + list(self.errors):
            if c not in seen:
                seen.append(c)
        return seen


def grid_cells(config):
    sigmas = config.noise_levels or (config.sigma,)
    factors = config.speed_factors or (config.speed_factor,)
    shapes = config.shapes or (config.planner.candidate_shape,)
    counts = config.sample_counts or (config.planner.n_samples,)
    return [Cell(m, float(s), float(f), sh, int(n))
            for m, s, f, sh, n in itertools.product(config.methods, sigmas, factors, shapes, counts)]


def cell_config(config, cell):
    return with_overrides(config, sigma=cell.sigma, speed_factor=cell.speed_factor,
                          **{"planner.method": cell.method, "planner.candidate_shape": cell.shape,
                             "planner.n_samples": cell.n_samples})


def _stats(values):
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std())


def summary_rows(result, cells, iterations):
    """Per-cell mean and population std of completeness per iteration, plus a ``final`` row."""
    rows = []
    for cell in cells:
        logs = [log for (c, _), log in sorted(result.logs.items(), key=lambda kv: kv[0][1]) if c == cell]
        failed = sum(1 for c, _ in result.errors if c == cell)
        head = [cell.method, repr(cell.sigma), repr(cell.speed_factor), cell.shape, cell.n_samples]
        for k in list(range(iterations)) + ["final"]:
            idx = iterations - 1 if k == "final" else k
            mean, std = _stats([log.completeness[idx] for log in logs])
            rows.append(head + [k, len(logs), failed, repr(mean), repr(std)])
    return rows


def run_grid(config, out_dir=None, on_episode=None):
    """Run every cell for every seed; failing episodes are recorded and skipped.

    With ``out_dir``, writes ``episodes/<cell>_s<seed>.csv`` and ``summary.csv``.
    """
    cells = grid_cells(config)
    result = GridResult()
    ep_dir = None
    if out_dir is not None:
        ep_dir = Path(out_dir) / "episodes"
        ep_dir.mkdir(parents=True, exist_ok=True)
    for cell in cells:
        cfg = cell_config(config, cell)
        for seed in config.seeds:
            try:
                log = run_episode(cfg, seed)
            except Exception as e:  # keep the sweep going; the cell is marked failed
                result.errors[(cell, seed)] = f"{type(e).__name__}: {e}"
                if on_episode:
                    on_episode(cell, seed, None)
                continue
            result.logs[(cell, seed)] = log
            if ep_dir is not None:
                (ep_dir / f"{cell.tag}_s{seed}.csv").write_text(log.to_csv())
            if on_episode:
                on_episode(cell, seed, log)
    if out_dir is not None:
        with (Path(out_dir) / "summary.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            w.writerows(summary_rows(result, cells, config.iterations))
        if result.errors:
            (Path(out_dir) / "failed.txt").write_text(
                "".join(f"{c.tag} seed={s}: {msg}\n" for (c, s), msg in result.errors.items()))
    return result
