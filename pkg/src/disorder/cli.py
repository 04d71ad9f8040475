"""Command-line entry point: ``disorder <command> [flags]``.

Exit codes: 0 success, 1 validation or convergence failure, 2 IO/parse failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import detect as detect_mod
from . import filter as filter_mod
from .checks import verify_model
from .evaluate import evaluate
from .likelihood import ZeroLikelihoodError
from .model import ModelError, ModelFormatError, ModelSpec, model_from_dict
from .oracle import GuardError, oracle_report
from .simulate import Trajectory, simulate_many
from .solver import ConvergenceError, GridConfig, StoppingPolicy, solve

log = logging.getLogger("disorder")


class ParseError(Exception):
    pass


# -- IO ----------------------------------------------------------------------

def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_json(path: str) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_model(path: str) -> ModelSpec:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ParseError(f"{path}: model document must be a JSON object")
    try:
        return model_from_dict(data)
    except ModelFormatError as exc:
        raise ParseError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ParseError(f"{path}: {exc}") from None


def load_policy(path: str, spec: ModelSpec) -> StoppingPolicy:
    data = _load_json(path)
    try:
        return StoppingPolicy.from_dict(data, spec)
    except KeyError as exc:
        raise ParseError(f"{path}: missing field {exc}") from None


def dump_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    _write(text, out)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ParseError(f"cannot write {out}: {exc.strerror or exc}") from None


TRAJ_HEADER = ["seed", "theta1", "theta2", "regime", "observations"]


def trajectories_csv(trajs: list[Trajectory]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJ_HEADER)
    for t in trajs:
        w.writerow([t.seed, t.theta1, t.theta2, t.regime, " ".join(map(str, t.observations))])
    return buf.getvalue()


def read_trajectories(path: str) -> list[Trajectory]:
    rows = list(csv.reader(io.StringIO(_read_text(path))))
    if not rows or rows[0] != TRAJ_HEADER:
        raise ParseError(f"{path}:1: expected header {','.join(TRAJ_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            seed, t1, t2, reg, obs = row
            out.append(Trajectory(tuple(int(v) for v in obs.split()), int(t1), int(t2), int(reg), int(seed)))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: malformed trajectory row") from None
    return out


# -- commands ----------------------------------------------------------------

def cmd_simulate(args) -> None:
    spec = load_model(args.model)
    if args.horizon is None or args.horizon < 1:
        raise ValueError("--horizon must be a positive integer")
    trajs = simulate_many(spec, args.horizon, args.count, args.seed)
    _write(trajectories_csv(trajs), args.out)


def cmd_solve(args) -> None:
    spec = load_model(args.model)
    policy = solve(spec, GridConfig(resolution=args.grid), tol=args.tol, horizon=args.horizon)
    dump_json(policy.to_dict(), args.out)


def _fmt_time(v) -> str:
    return "never" if v is None else str(v)


def cmd_detect(args) -> None:
    spec = load_model(args.model)
    policy = load_policy(args.policy, spec)
    trajs = read_trajectories(args.trajectories)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "tau", "sigma", "theta1", "theta2", "hit1", "hit2"])
    traces = io.StringIO()
    tw = csv.writer(traces, lineterminator="\n")
    tw.writerow(["seed"] + detect_mod.TRACE_HEADER)
    for t in trajs:
        res = detect_mod.run_detector(spec, policy, t.observations, args.horizon, t.theta1, t.theta2)
        w.writerow([t.seed, _fmt_time(res.tau), _fmt_time(res.sigma), t.theta1, t.theta2,
                    int(res.hit1), int(res.hit2)])
        for row in res.trace:
            tw.writerow([t.seed] + ["" if row[k] is None else row[k] for k in detect_mod.TRACE_HEADER])
    _write(buf.getvalue(), args.out)
    if args.trace:
        _write(traces.getvalue(), args.trace)


def cmd_filter(args) -> None:
    spec = load_model(args.model)
    trajs = read_trajectories(args.trajectories)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed"] + filter_mod.TRACE_HEADER)
    for t in trajs:
        for row in filter_mod.trace_rows(filter_mod.run_filter(spec, t.observations)):
            w.writerow([t.seed] + row)
    _write(buf.getvalue(), args.out)


def cmd_evaluate(args) -> None:
    spec = load_model(args.model)
    policy = load_policy(args.policy, spec)
    report = evaluate(spec, policy, args.runs, args.seed, horizon=args.horizon)
    dump_json(report.to_dict(), args.out)


def cmd_verify(args) -> None:
    spec = load_model(args.model)
    report = verify_model(spec, args.depth)
    dump_json(report, args.out)
    if not report["passed"]:
        raise SystemExit(1)


def cmd_oracle(args) -> None:
    spec = load_model(args.model)
    dump_json(oracle_report(spec, args.horizon), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="disorder", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--model", required=True)
        sp.add_argument("--out", default=None, help="output path (default stdout)")
        sp.set_defaults(fn=fn)
        return sp

    sp = cmd("simulate", cmd_simulate, "sample trajectories to CSV")
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)

    sp = cmd("solve", cmd_solve, "solve the double stopping problem to a policy JSON")
    sp.add_argument("--grid", type=int, default=20, help="simplex grid resolution")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--horizon", type=int, default=None, help="finite-horizon policy")

    sp = cmd("detect", cmd_detect, "run a policy over trajectories")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--horizon", type=int, default=None)
    sp.add_argument("--trace", default=None, help="write per-step decision trace CSV here")

    sp = cmd("filter", cmd_filter, "per-step posterior trace for trajectories")
    sp.add_argument("--trajectories", required=True)

    sp = cmd("evaluate", cmd_evaluate, "Monte Carlo detection probability")
    sp.add_argument("--policy", required=True)
    sp.add_argument("--runs", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--horizon", type=int, default=None)

    sp = cmd("verify", cmd_verify, "exhaustive oracle checks up to --depth")
    sp.add_argument("--depth", type=int, default=5)

    sp = cmd("oracle", cmd_oracle, "brute-force optimum and posterior tables")
    sp.add_argument("--horizon", type=int, default=5)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, ConvergenceError, GuardError, ZeroLikelihoodError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
