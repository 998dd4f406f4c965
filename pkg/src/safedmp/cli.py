"""Command-line front end: learn a model, run a scenario, benchmark a suite.

Exit codes: 0 success, 2 input or parse error, 3 safety infeasible,
4 non-convergence.  Every command is deterministic for fixed inputs; wall
clock timing is only written when --timing is passed, since it can never be
byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import pathlib
import sys

import numpy as np

from . import bench, dmp, safe_exec, trajectory
from .errors import InvalidInputError, ParseError, SafeDmpError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGED = 4


def write_log_csv(log: safe_exec.ExecutionLog, path) -> None:
    """Write the per-step log; floats use shortest round-trip formatting."""
    if not log.records:
        raise InvalidInputError("cannot write an empty execution log")
    d = log.records[0].x_nominal.shape[0]
    header = ["t"]
    for prefix in ("xn", "xs", "xd", "xm"):
        header += [f"{prefix}_{i}" for i in range(d)]
    header += ["tau", "z", "min_clearance"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in log.records:
            row = [repr(float(r.t))]
            for vec in (r.x_nominal, r.x_safe, r.x_desired, r.x_measured):
                row += [repr(float(v)) for v in vec]
            row += [repr(float(r.tau)), repr(float(r.z)),
                    repr(float(r.min_clearance))]
            writer.writerow(row)


def read_log_csv(path):
    """Parse a log written by :func:`write_log_csv` back into plain rows.

    Returns a list of dicts with keys t, x_nominal, x_safe, x_desired,
    x_measured, tau, z, min_clearance; values round-trip exactly.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty log file", line=1) from None
        if not header or header[0] != "t" or (len(header) - 4) % 4 != 0:
            raise ParseError("malformed log header", line=1)
        d = (len(header) - 4) // 4
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line=lineno
                )
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            record = {"t": values[0]}
            offset = 1
            for key in ("x_nominal", "x_safe", "x_desired", "x_measured"):
                record[key] = np.asarray(values[offset:offset + d])
                offset += d
            record["tau"], record["z"], record["min_clearance"] = values[offset:]
            rows.append(record)
    return rows


def _metrics_json(report: bench.MetricsReport, method: str, scenario: str) -> str:
    payload = bench.report_to_dict(
        [bench.ReportRow(scenario=scenario, method=method, metrics=report)]
    )
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cmd_learn(args) -> int:
    demo_raw = trajectory.load_demo(args.demo)
    if demo_raw.n < args.n_basis:
        raise InvalidInputError(
            f"demonstration has {demo_raw.n} samples; "
            f"need at least n_basis={args.n_basis}"
        )
    rotation = None
    if args.rotate_random:
        from scipy.spatial.transform import Rotation

        rng = np.random.default_rng(args.seed)
        rotation = Rotation.random(random_state=rng).as_matrix()
    demo = trajectory.preprocess(
        demo_raw,
        resample_n=args.resample_n,
        cutoff_hz=args.cutoff_hz,
        z_height=args.z_height,
        rotation=rotation,
    )
    model = dmp.learn_from_trajectory(demo, n_basis=args.n_basis, alpha=args.alpha)
    dmp.save_model(model, args.out)

    check_dt = 1e-3
    result = dmp.rollout(
        model, check_dt, horizon=model.tau_nominal, stop_at_goal=False
    )
    fidelity = bench.mae(result.trajectory, demo)
    diagonal = demo.bounding_box_diagonal()
    print(f"model written to {args.out}")
    print(
        f"rollout-vs-demo MAE: {fidelity:.6g} m "
        f"({100.0 * fidelity / diagonal:.3g}% of bounding-box diagonal)"
    )
    goal_check = dmp.rollout(model, args.dt)
    if not goal_check.converged:
        print("warning: rollout did not reach the goal within the horizon",
              file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    model = dmp.load_model(args.model)
    scenario = bench.load_scenario(args.scenario)
    if args.method:
        scenario = dataclasses.replace(scenario, method=args.method)
    if args.dt:
        scenario = dataclasses.replace(scenario, dt=args.dt)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, rng_seed=args.seed)

    nominal = dmp.rollout(model, scenario.dt, goal_tol=scenario.execution.goal_tol)
    prepared = bench.PreparedScenario(
        scenario=scenario,
        model=model,
        demo=nominal.trajectory,
        nominal=nominal.trajectory,
        nominal_converged=nominal.converged,
    )
    log = bench.run_scenario(prepared)
    prefix = pathlib.Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    log_path = prefix.with_name(prefix.name + "_log.csv")
    metrics_path = prefix.with_name(prefix.name + "_metrics.json")
    write_log_csv(log, log_path)
    metrics = bench.evaluate(prepared, with_timing=args.timing)
    metrics_path.write_text(
        _metrics_json(metrics, scenario.method, scenario.name), encoding="utf-8"
    )
    print(f"log written to {log_path}")
    print(f"metrics written to {metrics_path}")
    if log.safety_infeasible:
        print("safety infeasible: clearance spheres admit no projection",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    if not log.converged:
        print("run did not converge within the horizon", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_bench(args) -> int:
    directory = pathlib.Path(args.scenario_dir)
    if not directory.is_dir():
        raise InvalidInputError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*.json"))
    scenarios = [bench.load_scenario(p) for p in paths]
    workers = int(os.environ.get("SAFEDMP_THREADS", "1"))
    rows = bench.compare(
        scenarios, with_timing=args.timing, max_workers=max(1, workers)
    )
    prefix = pathlib.Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    json_path = prefix.with_name(prefix.name + "_report.json")
    text_path = prefix.with_name(prefix.name + "_report.txt")
    json_path.write_text(bench.report_to_json(rows), encoding="utf-8")
    text_path.write_text(bench.report_to_text(rows), encoding="utf-8")
    print(f"report written to {json_path} and {text_path}")
    sys.stdout.write(bench.report_to_text(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="safedmp",
        description="Learn motion primitives, execute them under a safety "
                    "tube, and benchmark against a potential-field baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    learn = sub.add_parser("learn", help="learn a model from a demonstration")
    learn.add_argument("--demo", required=True,
                       help="CSV path or builtin:<minjerk|sine2|sshape>")
    learn.add_argument("--out", required=True, help="output model JSON path")
    learn.add_argument("--n-basis", type=int, default=dmp.DEFAULT_N_BASIS,
                       dest="n_basis")
    learn.add_argument("--alpha", type=float, default=dmp.DEFAULT_ALPHA)
    learn.add_argument("--dt", type=float, default=safe_exec.DEFAULT_DT)
    learn.add_argument("--resample-n", type=int,
                       default=trajectory.DEFAULT_RESAMPLE_N, dest="resample_n")
    learn.add_argument("--cutoff-hz", type=float,
                       default=trajectory.DEFAULT_CUTOFF_HZ, dest="cutoff_hz")
    learn.add_argument("--z-height", type=float,
                       default=trajectory.DEFAULT_Z_HEIGHT, dest="z_height")
    learn.add_argument("--rotate-random", action="store_true",
                       dest="rotate_random",
                       help="apply a seeded random rotation after lifting")
    learn.add_argument("--seed", type=int, default=0)
    learn.set_defaults(func=cmd_learn)

    run = sub.add_parser("run", help="execute a model in a scenario")
    run.add_argument("--model", required=True, help="model JSON path")
    run.add_argument("--scenario", required=True, help="scenario JSON path")
    run.add_argument("--out", required=True, help="output prefix")
    run.add_argument("--method", choices=bench.METHODS, default=None)
    run.add_argument("--dt", type=float, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--timing", action="store_true",
                     help="include (non-reproducible) wall-clock timing")
    run.set_defaults(func=cmd_run)

    bench_cmd = sub.add_parser("bench", help="compare methods over a scenario dir")
    bench_cmd.add_argument("--scenario-dir", required=True, dest="scenario_dir")
    bench_cmd.add_argument("--out", required=True, help="output prefix")
    bench_cmd.add_argument("--timing", action="store_true",
                           help="include (non-reproducible) wall-clock timing")
    bench_cmd.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, InvalidInputError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SafeDmpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
