"""Command-line entry point: ``movnbv {run,grid,gt,score-debug}``."""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ..voxel_map import voxel_keys
from ..world import MeshLoadError, build_gt_cloud, write_ply
from .config import ConfigError, ExperimentConfig, load_config, with_overrides
from .episode import Episode, make_camera, make_mesh, run_episode
from .grid import run_grid


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(t) for t in text.split(",") if t.strip())
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from e
    return parse


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int, default=None, help="episode seed (default 0); restricts a sweep to one seed")
    common.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    common.add_argument("--mesh", help="object mesh (.off/.stl/.ply); default is the built-in object")
    common.add_argument("--method", help="planner method")
    common.add_argument("--iterations", type=int)
    common.add_argument("--sigma", type=float, help="measurement noise std (m)")
    common.add_argument("--q-c", type=float, dest="q_c", help="object process noise PSD")
    common.add_argument("--speed-factor", type=float, dest="speed_factor")
    common.add_argument("--shape", choices=("ellipse", "ring"))
    common.add_argument("--samples", type=int, help="Monte Carlo samples per candidate")

    p = argparse.ArgumentParser(prog="movnbv", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one episode")
    g = sub.add_parser("grid", parents=[common], help="run a sweep")
    g.add_argument("--methods", type=_csv_list(str))
    g.add_argument("--seeds", type=_csv_list(int))
    g.add_argument("--noise-levels", type=_csv_list(float), dest="noise_levels")
    g.add_argument("--speed-factors", type=_csv_list(float), dest="speed_factors")
    g.add_argument("--shapes", type=_csv_list(str))
    g.add_argument("--sample-counts", type=_csv_list(int), dest="sample_counts")
    sub.add_parser("gt", parents=[common], help="build and dump the ground-truth cloud and voxels")
    d = sub.add_parser("score-debug", parents=[common], help="dump ellipsoids and candidate scores for one step")
    d.add_argument("--step", type=int, default=0, help="planning iteration to dump")
    return p


def resolve_config(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    top = {"mesh": args.mesh, "iterations": args.iterations, "sigma": args.sigma,
           "speed_factor": args.speed_factor}
    for name in ("methods", "seeds", "noise_levels", "speed_factors", "shapes", "sample_counts"):
        top[name] = getattr(args, name, None)
    if args.command == "grid" and top["seeds"] is None and args.seed is not None:
        top["seeds"] = (args.seed,)
    if args.seed is None:
        args.seed = 0
    nested = {"planner.method": args.method, "planner.candidate_shape": args.shape,
              "planner.n_samples": args.samples, "trajectory.q_c": args.q_c}
    return with_overrides(config, **top, **nested)


def _out_dir(args, config):
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args, config):
    out = _out_dir(args, config)
    log = run_episode(config, args.seed)
    (out / f"episode_s{args.seed}.csv").write_text(log.to_csv())
    (out / f"timing_s{args.seed}.csv").write_text(log.timing_csv())
    print(f"final completeness {log.completeness[-1]:.2f}% -> {out / f'episode_s{args.seed}.csv'}")


def cmd_grid(args, config):
    out = _out_dir(args, config)

    def report(cell, seed, log):
        status = "FAILED" if log is None else f"{log.completeness[-1]:.2f}%"
        print(f"{cell.tag} seed={seed}: {status}", flush=True)

    result = run_grid(config, out, report)
    print(f"{len(result.logs)} episodes, {len(result.errors)} failed -> {out / 'summary.csv'}")
    return 1 if result.errors else 0


def cmd_gt(args, config):
    out = _out_dir(args, config)
    camera = make_camera(config.camera)
    cloud = build_gt_cloud(make_mesh(config.mesh), camera, config.planner.stand_off, config.gt_angular_step_deg)
    write_ply(out / "gt.ply", cloud)
    res = config.map.completeness_resolution
    keys = voxel_keys(cloud, res)
    off = 1 << 20
    mask = (1 << 21) - 1
    idx = np.stack([(keys >> 42) & mask, (keys >> 21) & mask, keys & mask], axis=1) - off
    np.savetxt(out / "gt_voxels.txt", (idx + 0.5) * res, fmt="%.6f", header=f"voxel centres, resolution {res} m")
    print(f"{len(cloud)} points, {len(keys)} voxels -> {out / 'gt.ply'}")


def cmd_score_debug(args, config):
    out = _out_dir(args, config)
    if not 0 <= args.step < config.iterations:
        raise ConfigError(f"--step must lie in [0, {config.iterations})")
    ep = Episode(config, args.seed)
    for _ in range(args.step + 1):
        ep.step()
    res = ep.last_plan
    ep.summary.dump(out / f"ellipsoids_step{args.step}.txt")
    scores = {id(c): s for c, s in zip(res.feasible, res.scores)}
    with (out / f"scores_step{args.step}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("azimuth_index", "x", "y", "yaw", "feasible", "score", "selected"))
        for c in res.candidates:
            s = scores.get(id(c))
            w.writerow((c.azimuth_index, repr(float(c.planar_position[0])), repr(float(c.planar_position[1])),
                        repr(float(c.yaw)), int(s is not None), "" if s is None else repr(float(s)),
                        int(c is res.candidate)))
    print(f"{len(ep.summary.frontier)} frontier / {len(ep.summary.occupied)} occupied ellipsoids -> {out}")


COMMANDS = {"run": cmd_run, "grid": cmd_grid, "gt": cmd_gt, "score-debug": cmd_score_debug}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config) or 0
    except (ConfigError, MeshLoadError, OSError, ValueError) as e:
        print(f"movnbv: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
