"""Command-line entry point: ``qpinn run | compare | interpolate | list-problems``."""
from __future__ import annotations

import argparse
import csv
import os
import sys
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .checkpoint import Checkpoint, fmt
from .config import RunConfig, read_config
from .engine import CircuitModel
from .errors import ConfigurationError, DivergenceError, QPINNError
from .optimizer import ConvergenceLog, TrainResult, build_models, train
from .problems import PROBLEM_IDS, ProblemSpec, make_problem, one_minus_r2, poisson_grid

CONVERGENCE_HEADER = ["iteration", "loss_total", "loss_residual", "loss_boundary", "one_minus_r2"]
EXIT_USAGE = 2
EXIT_DIVERGED = 3


# --------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------

def _writer(path):
    handle = open(path, "w", newline="")
    return handle, csv.writer(handle, lineterminator="\n")


def predict(models: list[CircuitModel], points) -> list[np.ndarray]:
    return [m.forward(points, ("f",)).values["f"] for m in models]


def solution_header(problem: ProblemSpec) -> list[str]:
    coords = ["x", "y"] if problem.is_2d else ["x"]
    if problem.n_models == 1:
        return coords + ["u_pred", "u_oracle", "error"]
    cols = []
    for k in range(1, problem.n_models + 1):
        cols += [f"u{k}_pred", f"u{k}_oracle", f"u{k}_error"]
    return coords + cols


def write_solution(path, problem: ProblemSpec, models: list[CircuitModel], points) -> float:
    """Write predictions, reference values and absolute errors; return 1 - R^2."""
    points = np.asarray(points, dtype=float)
    preds = predict(models, points)
    truth = problem.oracle.evaluate(points)
    coords = points.reshape(len(points), -1)
    handle, w = _writer(path)
    with handle:
        w.writerow(solution_header(problem))
        for i in range(len(points)):
            row = [fmt(c) for c in coords[i]]
            for p, t in zip(preds, truth):
                row += [fmt(p[i]), fmt(t[i]), fmt(abs(p[i] - t[i]))]
            w.writerow(row)
    return one_minus_r2(np.concatenate(preds), np.concatenate(truth))


def write_convergence(path, log: ConvergenceLog) -> None:
    handle, w = _writer(path)
    with handle:
        w.writerow(CONVERGENCE_HEADER)
        for r in log.records:
            w.writerow([str(r.iteration), fmt(r.loss_total), fmt(r.loss_residual),
                        fmt(r.loss_boundary), fmt(r.one_minus_r2)])


def write_comparison(path, log_a: ConvergenceLog, log_b: ConvergenceLog) -> None:
    handle, w = _writer(path)
    with handle:
        w.writerow(["iteration", "one_minus_r2_a", "one_minus_r2_b", "loss_total_a", "loss_total_b"])
        for k in range(max(len(log_a), len(log_b))):
            a = log_a.records[k] if k < len(log_a) else None
            b = log_b.records[k] if k < len(log_b) else None
            w.writerow([str(k),
                        fmt(a.one_minus_r2) if a else "", fmt(b.one_minus_r2) if b else "",
                        fmt(a.loss_total) if a else "", fmt(b.loss_total) if b else ""])


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------

def run_config(config: RunConfig, out_dir=None) -> tuple[TrainResult, float]:
    """Train one configuration and write solution.csv, convergence.csv and checkpoint.txt."""
    config = config.resolved()
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = config.problem_spec()
    result = train(problem, config.seed)
    write_convergence(out / "convergence.csv", result.log)
    final = write_solution(out / "solution.csv", problem, result.models, problem.grid)
    lam_f = result.sapinn.lambda_f if result.sapinn is not None else np.zeros(0)
    lam_b = result.sapinn.lambda_b if result.sapinn is not None else np.zeros(0)
    ckpt = Checkpoint(config, [m.theta for m in result.models], [m.output_shift for m in result.models], lam_f, lam_b)
    ckpt_io.save(ckpt, out / "checkpoint.txt")
    return result, final


def models_from_checkpoint(ckpt: Checkpoint) -> tuple[ProblemSpec, list[CircuitModel]]:
    problem = ckpt.config.problem_spec()
    models = build_models(problem, ckpt.config.seed)
    if len(ckpt.thetas) != len(models):
        raise ConfigurationError(f"checkpoint holds {len(ckpt.thetas)} models, problem needs {len(models)}")
    for model, theta, shift in zip(models, ckpt.thetas, ckpt.output_shifts):
        if theta.shape != model.theta.shape:
            raise ConfigurationError(f"checkpoint has {theta.size} parameters, model needs {model.theta.size}")
        model.theta = theta.copy()
        model.output_shift = shift
    return problem, models


def query_points(problem: ProblemSpec, n: int, line: str | None) -> tuple[np.ndarray, str]:
    """Query grid and output file name for an interpolation request."""
    if n < 2:
        raise ConfigurationError(f"--points must be at least 2, got {n}")
    if not problem.is_2d:
        if line is not None:
            raise ConfigurationError("--line only applies to two-variable problems")
        return np.linspace(problem.domain[0], problem.domain[1], n), f"interpolation_n{n}.csv"
    if line is None:
        return poisson_grid(n, problem.domain[1])[0], f"interpolation_n{n}.csv"
    axis, sep, text = line.partition("=")
    axis = axis.strip()
    if not sep or axis not in ("x", "y"):
        raise ConfigurationError(f"--line must look like x=0.25 or y=0.75, got {line!r}")
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"--line value is not a number: {text!r}") from None
    free = np.linspace(problem.domain[0], problem.domain[1], n)
    fixed = np.full(n, value)
    pts = np.column_stack([fixed, free] if axis == "x" else [free, fixed])
    return pts, f"interpolation_{axis}{text.strip()}_n{n}.csv"


def interpolate(checkpoint_path, n: int, line: str | None = None, problem_id: str | None = None,
                out_dir=None) -> tuple[Path, float]:
    ckpt = ckpt_io.load(checkpoint_path)
    if problem_id is not None and problem_id != ckpt.config.problem:
        raise ConfigurationError(
            f"checkpoint was trained on {ckpt.config.problem!r}, not {problem_id!r}")
    problem, models = models_from_checkpoint(ckpt)
    points, name = query_points(problem, n, line)
    out = Path(out_dir if out_dir is not None else Path(checkpoint_path).parent)
    out.mkdir(parents=True, exist_ok=True)
    score = write_solution(out / name, problem, models, points)
    return out / name, score


def compare(config_a: RunConfig, config_b: RunConfig, out_dir) -> Path:
    if config_a.problem != config_b.problem:
        raise ConfigurationError(
            f"cannot compare runs of different problems ({config_a.problem!r} vs {config_b.problem!r})")
    out = Path(out_dir)
    res_a, _ = run_config(config_a, out / "a")
    res_b, _ = run_config(config_b, out / "b")
    write_comparison(out / "compare.csv", res_a.log, res_b.log)
    return out / "compare.csv"


def list_problems() -> str:
    lines = []
    for pid in PROBLEM_IDS:
        p = make_problem(pid)
        grid = f"{int(round(len(p.grid) ** 0.5))}x{int(round(len(p.grid) ** 0.5))}" if p.is_2d else str(len(p.grid))
        lines.append(
            f"{pid}: grid {grid}, {p.n_qubits} qubits{' per axis' if p.is_2d else ''}, depth {p.depth}, "
            f"{p.layout}, {p.observable} observable, {p.weighting} weights "
            f"(alpha_f={p.alpha_f:g}, alpha_b={p.alpha_b:g}), lr {p.learning_rate:g}, {p.iterations} iterations"
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------

def _overrides(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"--override expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _load(path, args) -> RunConfig:
    config = read_config(path, _overrides(args.override))
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "out", None) is not None:
        config = replace(config, output_dir=args.out)
    return config


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpinn", description="Variational quantum differential-equation solver.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--seed", type=_seed, default=None, help="override the configured seed")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("run", help="train one configuration")
    p.add_argument("--config", required=True)
    common(p)

    p = sub.add_parser("compare", help="train two configurations and align their convergence")
    p.add_argument("--config", action="append", required=True, help="give exactly twice")
    common(p)

    p = sub.add_parser("interpolate", help="evaluate a checkpoint on a new grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--points", type=int, required=True, help="number of query points (per axis for meshes)")
    p.add_argument("--line", default=None, help="two-variable problems: fix one coordinate, e.g. x=0.25")
    p.add_argument("--problem", choices=PROBLEM_IDS, default=None, help="expected problem id")
    p.add_argument("--out", default=None, help="output directory (default: next to the checkpoint)")

    sub.add_parser("list-problems", help="show the benchmark problems and their defaults")
    return parser


def _thread_limit():
    text = os.environ.get("QPINN_THREADS")
    if not text:
        return nullcontext()
    try:
        n = int(text)
    except ValueError:
        raise ConfigurationError(f"QPINN_THREADS must be a positive integer, got {text!r}") from None
    if n < 1:
        raise ConfigurationError(f"QPINN_THREADS must be a positive integer, got {text!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            if args.verb == "list-problems":
                print(list_problems())
            elif args.verb == "run":
                config = _load(args.config, args)
                _, final = run_config(config)
                print(f"final 1-R2: {fmt(final)}")
            elif args.verb == "compare":
                if len(args.config) != 2:
                    raise ConfigurationError("compare needs exactly two --config files")
                a, b = (_load(path, args) for path in args.config)
                out = Path(args.out) if args.out is not None else Path(a.output_dir)
                path = compare(replace(a, output_dir=str(out / "a")), replace(b, output_dir=str(out / "b")), out)
                print(f"comparison written to {path}")
            else:
                path, score = interpolate(args.checkpoint, args.points, args.line, args.problem, args.out)
                print(f"{path}: 1-R2 {fmt(score)}")
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except QPINNError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
