"""Command-line front end.

Subcommands: register (align two point-cloud files), benchmark (batch of
synthetic trials to CSV/JSON), generate (write one synthetic instance to
disk), oracle-check (small-instance correctness suite), scaling (timing vs
grid range).

Exit codes: 0 success, 1 engine failure (search space too large, no
candidate, oracle violation), 2 usage or input-file problems.

The global --threads flag sets NUMBA_NUM_THREADS before the compiled kernels
are imported, which is why every handler imports the library lazily.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .errors import GridregError, InvalidInputError, PointCloudIOError

_METRICS = ("trunc-l1", "l2", "l1", "inliers")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridreg",
        description="Grid-search rigid registration of 3-D point clouds.",
    )
    parser.add_argument("--threads", type=int, default=None, metavar="N",
                        help="worker threads for the compiled kernels")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="align a source cloud onto a reference cloud")
    p.add_argument("source", help="source cloud (.xyz or .ply)")
    p.add_argument("reference", help="reference cloud (.xyz or .ply)")
    p.add_argument("--rot-range", type=float, default=45.0, metavar="DEG",
                   help="rotation search half-range per axis (default 45)")
    p.add_argument("--rot-step", type=float, default=3.0, metavar="DEG",
                   help="rotation grid step (default 3)")
    p.add_argument("--trans-range", type=float, default=0.5, metavar="M",
                   help="translation search half-range per axis (default 0.5)")
    p.add_argument("--trans-bin", type=float, default=0.025, metavar="M",
                   help="translation bin size (default 0.025)")
    p.add_argument("--metric", choices=_METRICS, default="trunc-l1",
                   help="refinement metric (default trunc-l1)")
    p.add_argument("--trunc", type=float, default=None, metavar="TAU",
                   help="trunc-l1 threshold (default 5 * trans-bin)")
    p.add_argument("--q", type=float, default=0.5,
                   help="refine candidates with count >= q * best (default 0.5)")
    p.add_argument("--center-pose", metavar="FILE",
                   help="JSON pose the search grid is centered on")
    p.add_argument("--exhaustive", action="store_true",
                   help="run the full 6-D grid search instead of the mode-based engine")
    p.add_argument("--out", metavar="FILE",
                   help="write the transformed source cloud here (.xyz)")
    p.add_argument("--json", action="store_true",
                   help="print the full report as JSON instead of text")
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("benchmark", help="run a batch of synthetic registration trials")
    p.add_argument("--scenario", required=True, metavar="FILE",
                   help="scenario config JSON")
    p.add_argument("--search", required=True, metavar="FILE",
                   help="search config JSON")
    p.add_argument("--trials", type=int, default=10, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="S",
                   help="base seed; trial k uses seed S + k")
    p.add_argument("--csv", metavar="FILE", help="write per-trial rows here")
    p.add_argument("--json", metavar="FILE", dest="json_out",
                   help="write full report (incl. timings) here")
    p.add_argument("--rot-tol-deg", type=float, default=1.0,
                   help="recall threshold on mean Euler error (default 1)")
    p.add_argument("--trans-tol", type=float, default=0.1,
                   help="recall threshold on mean translation error (default 0.1)")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("generate", help="write one synthetic instance to disk")
    p.add_argument("--scenario", required=True, metavar="FILE")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--out-prefix", required=True, metavar="PATH",
                   help="writes PATH_source.xyz, PATH_reference.xyz, PATH_gt.json")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("oracle-check",
                       help="verify mode optimality and engine equality on small instances")
    p.add_argument("--trials", type=int, default=20, metavar="N",
                   help="trials per suite (default 20)")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("scaling", help="median runtime vs search-grid range")
    p.add_argument("--scenario", required=True, metavar="FILE")
    p.add_argument("--search", metavar="FILE",
                   help="base search config JSON (defaults: 3 deg step / 9 deg range, "
                        "0.025 m bin / 0.2 m range)")
    p.add_argument("--rot-ranges", type=float, nargs="*", default=[], metavar="DEG")
    p.add_argument("--trans-ranges", type=float, nargs="*", default=[], metavar="M")
    p.add_argument("--csv", metavar="FILE")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--reps", type=int, default=3,
                   help="repetitions per range point (default 3)")
    p.set_defaults(func=_cmd_scaling)

    return parser


def _load_pose(path):
    from .geometry import RigidTransform, rotation_from_euler
    import numpy as np

    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    t = np.asarray(raw.get("translation", (0.0, 0.0, 0.0)), dtype=np.float64)
    if "rotation" in raw:
        r = np.asarray(raw["rotation"], dtype=np.float64)
    elif "euler_deg" in raw:
        r = rotation_from_euler(np.radians(np.asarray(raw["euler_deg"], dtype=np.float64)))
    else:
        raise InvalidInputError(f"{path}: pose needs 'rotation' or 'euler_deg'")
    return RigidTransform(r, t)


def _k_of(range_value: float, step: float) -> int:
    if step <= 0:
        raise InvalidInputError("grid step must be positive")
    if range_value <= 0:
        return 0
    return max(1, int(math.ceil(range_value / step - 1e-9)))


def _cmd_register(args) -> int:
    from .engines import SearchConfig
    from .harness import register_files
    from .metrics import ErrorMetric

    metric = ErrorMetric.from_name(args.metric, args.trans_bin, args.trunc)
    center = _load_pose(args.center_pose) if args.center_pose else None
    cfg = SearchConfig(
        k_rot=_k_of(math.radians(args.rot_range), math.radians(args.rot_step)),
        rot_step=math.radians(args.rot_step),
        k_trans=_k_of(args.trans_range, args.trans_bin),
        trans_bin=args.trans_bin,
        q=args.q, metric=metric, center=center,
    )
    _, report = register_files(args.source, args.reference, cfg,
                               exhaustive=args.exhaustive, out_path=args.out)
    if args.json:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    else:
        e = report["euler_deg"]
        t = report["translation_m"]
        print(f"engine: {report['engine']}")
        print(f"rotation (deg, xyz): {e[0]:+.4f} {e[1]:+.4f} {e[2]:+.4f}")
        print(f"translation (m):     {t[0]:+.6f} {t[1]:+.6f} {t[2]:+.6f}")
        print(f"inliers: {report['best_inliers']} / {report['source_points']}")
        print(f"alignment error: {report['best_error']:.6g}")
        print(f"chamfer (m): {report['chamfer_before_m']:.6g} -> {report['chamfer_after_m']:.6g}")
        print(f"time (s): {report['elapsed_s']['total']:.3f}")
        if report["transformed_out"]:
            print(f"wrote {report['transformed_out']}")
    return 0


def _progress(done, total, record, *_rest):
    print(f"\rtrial {done}/{total} [{record.status}]", end="", file=sys.stderr,
          flush=True)
    if done == total:
        print(file=sys.stderr)


def _cmd_benchmark(args) -> int:
    from .benchgen import ScenarioConfig
    from .harness import run_batch, search_from_json, write_batch_csv, write_batch_json

    scenario = ScenarioConfig.from_json(args.scenario)
    search = search_from_json(args.search)
    summary, records = run_batch(
        scenario, search, args.trials, args.seed,
        rot_tol_deg=args.rot_tol_deg, trans_tol=args.trans_tol,
        progress=_progress,
    )
    if args.csv:
        write_batch_csv(args.csv, records)
    if args.json_out:
        write_batch_json(args.json_out, scenario, search, summary, records)
    print(f"trials: {summary.n_trials}  failed: {summary.n_failed}")
    print(f"recall: {summary.recall:.3f}")
    if summary.mean_mie_r is not None:
        print(f"mean rotation error (deg): {summary.mean_mie_r:.4f}")
        print(f"mean translation error (m): {summary.mean_mie_t:.5f}")
        print(f"median time (ms): {summary.median_total_ms:.1f}")
    return 0


def _cmd_generate(args) -> int:
    from dataclasses import replace

    from .benchgen import ScenarioConfig, make_instance, save_instance

    scenario = replace(ScenarioConfig.from_json(args.scenario), rng_seed=args.seed)
    paths = save_instance(make_instance(scenario), args.out_prefix)
    for key in ("source", "reference", "sidecar"):
        print(f"wrote {paths[key]}")
    return 0


def _cmd_oracle_check(args) -> int:
    from .harness import run_oracle_checks

    report = run_oracle_checks(n_lemma=args.trials, n_theorem=args.trials,
                               seed=args.seed)
    print(f"mode-optimality sweep: {report.lemma_trials - report.lemma_violations}"
          f"/{report.lemma_trials} ok")
    print(f"engine inlier equality: {report.theorem_trials - report.theorem_violations}"
          f"/{report.theorem_trials} ok")
    for line in report.details:
        print(f"  {line}")
    if not report.ok:
        raise GridregError("oracle checks found violations")
    return 0


def _cmd_scaling(args) -> int:
    from .benchgen import ScenarioConfig
    from .engines import SearchConfig
    from .harness import run_scaling_study, search_from_json, write_scaling_csv

    scenario = ScenarioConfig.from_json(args.scenario)
    if args.search:
        search = search_from_json(args.search)
    else:
        search = SearchConfig(k_rot=3, rot_step=math.radians(3.0),
                              k_trans=8, trans_bin=0.025)
    rows = run_scaling_study(scenario, search, args.rot_ranges, args.trans_ranges,
                             base_seed=args.seed, repetitions=args.reps)
    if args.csv:
        write_scaling_csv(args.csv, rows)
    for row in rows:
        if row["status"] == "ok":
            print(f"{row['kind']:>11} range {row['range_value']:g}: "
                  f"{row['n_rotations']} rotations, "
                  f"phase1 {row['median_phase1_ms']:.1f} ms, "
                  f"total {row['median_total_ms']:.1f} ms")
        else:
            print(f"{row['kind']:>11} range {row['range_value']:g}: {row['status']}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be >= 1")
        # must land in the environment before numba is first imported
        os.environ["NUMBA_NUM_THREADS"] = str(args.threads)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError,
            PointCloudIOError, InvalidInputError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GridregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
