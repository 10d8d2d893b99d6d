"""Command line entry point: ``mssl simulate | localize | eval``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .core_model import ArrayConfig
from .dbscan_mssl import DbscanParams, localize_dbscan_detail
from .errors import MsslError
from .harness import EvalConfig, load_eval_config, run_eval
from .ransac_mssl import RansacParams, ransac_trace
from .scene_sim import SimParams, synthesize_itd

log = logging.getLogger("mssl")


def _add_array_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("array")
    g.add_argument("--half-baseline", type=float, default=0.09, help="half microphone spacing b in meters (default 0.09)")
    g.add_argument("--omega", type=float, default=2 * math.pi / 60, help="rotation speed in rad/s (default 2*pi/60)")
    g.add_argument("--samples-per-rotation", type=int, default=360)
    g.add_argument("--sound-speed", type=float, default=345.0)


def _array(args) -> ArrayConfig:
    return ArrayConfig(args.half_baseline, args.omega, args.samples_per_rotation, args.sound_speed)


def _add_estimator_args(p: argparse.ArgumentParser) -> None:
    r = p.add_argument_group("RANSAC")
    r.add_argument("--n-iter", type=int, default=5000, help="candidate pairs per fitted source (default 5000)")
    r.add_argument("--sigma-conf", type=float, default=0.015688, help="inlier band in meters (default 0.015688)")
    r.add_argument("--threshold", type=float, default=10.0, help="confidence threshold in percent (default 10)")
    r.add_argument("--max-sources", type=int, default=12)
    r.add_argument("--min-inliers", type=int, default=5)
    d = p.add_argument_group("DBSCAN")
    d.add_argument("--epsilon", type=float, default=3.0, help="neighbourhood radius in degrees (default 3)")
    d.add_argument("--min-points", type=int, default=40, help="density threshold m (default 40)")
    d.add_argument("--n-map", type=int, default=10000, help="mapped sample pairs (default 10000)")
    d.add_argument("--amplitude-tolerance", type=float, default=0.02)
    d.add_argument("--dbscan-threshold", type=float, default=10.0, help="relative cluster size cutoff in percent")


def _ransac_params(args) -> RansacParams:
    return RansacParams(args.n_iter, args.sigma_conf, args.threshold, args.max_sources, args.min_inliers, args.seed)


def _dbscan_params(args) -> DbscanParams:
    return DbscanParams(
        args.epsilon, args.min_points, args.n_map, args.amplitude_tolerance, args.dbscan_threshold, args.seed
    )


def cmd_simulate(args) -> int:
    scene = io.load_scene(args.scene)
    params = SimParams(args.rotations, args.noise_sigma, args.seed, args.assignment)
    itd = synthesize_itd(scene, _array(args), params)
    io.save_itd_csv(itd, args.out)
    log.info("wrote %d samples to %s", len(itd), args.out)
    return 0


def cmd_localize(args) -> int:
    itd = io.load_itd_csv(args.itd, _array(args))
    if not itd.covers_rotation():
        log.warning("signal spans less than one full rotation")
    if args.estimator == "ransac":
        trace = ransac_trace(itd, _ransac_params(args))
        result = trace.result
        if args.trace_csv:
            io.save_trace_csv(trace, itd.array.half_baseline_m, args.trace_csv)
        if args.assignment_csv:
            io.save_assignment_csv(itd, trace, args.assignment_csv)
    else:
        result, clustering = localize_dbscan_detail(itd, _dbscan_params(args))
        if args.points_csv:
            io.save_points_csv(clustering.points, clustering.labels, args.points_csv)
    rows = io.result_rows(result)
    if args.out:
        io.write_csv(args.out, io.RESULT_HEADER, rows)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(io.RESULT_HEADER)
        w.writerows(rows)
    return 0


def cmd_eval(args) -> int:
    config = load_eval_config(args.config) if args.config else EvalConfig()
    if args.runs_per_k is not None:
        config = replace(config, runs_per_k=args.runs_per_k)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.estimator is not None:
        config = replace(config, estimator=args.estimator)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_eval(config, workers=args.workers)
    for est in config.estimators:
        cm, mae = result.confusion[est], result.mae[est]
        io.write_csv(out / f"confusion_{est}.csv", cm.header(), cm.rows())
        io.write_csv(out / f"mae_{est}.csv", mae.header(), mae.table())
    with open(out / "runs.jsonl", "w") as fh:
        for r in result.runs:
            fh.write(json.dumps(r) + "\n")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n")
    summary = result.summary()
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mssl", description="Multi-source localization with a rotating two-microphone array")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="scene file -> ITD CSV")
    p.add_argument("scene", help="scene JSON file")
    p.add_argument("-o", "--out", required=True, help="output ITD CSV")
    p.add_argument("--rotations", type=int, default=1)
    p.add_argument("--noise-sigma", type=float, default=0.001, help="ITD noise std in meters (default 0.001)")
    p.add_argument("--assignment", choices=["uniform", "power-weighted"], default="uniform")
    p.add_argument("--seed", type=int, default=0)
    _add_array_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", help="ITD CSV -> source table")
    p.add_argument("itd", help="ITD CSV with header t_s,d_m")
    p.add_argument("--estimator", choices=["ransac", "dbscan"], default="ransac")
    p.add_argument("-o", "--out", help="result CSV (default: stdout)")
    p.add_argument("--points-csv", help="DBSCAN: mapped points with cluster ids")
    p.add_argument("--trace-csv", help="RANSAC: every fitted sinusoid with its confidence")
    p.add_argument("--assignment-csv", help="RANSAC: per-sample fit rank")
    p.add_argument("--seed", type=int, default=0)
    _add_array_args(p)
    _add_estimator_args(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="Monte Carlo sweep -> confusion/MAE CSVs")
    p.add_argument("config", nargs="?", help="evaluation config JSON (default: built-in defaults)")
    p.add_argument("-o", "--out-dir", default="eval_out")
    p.add_argument("--runs-per-k", type=int)
    p.add_argument("--estimator", choices=["ransac", "dbscan", "both"])
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (MsslError, OSError) as exc:
        print(f"mssl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
