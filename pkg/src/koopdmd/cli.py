"""Command-line entry point: ``koopdmd {simulate,fit,reconstruct,eigen,repro}``.

Exit codes: 0 success, 1 computational failure, 2 usage or validation error.
Errors are printed to stderr as a single ``error: ...`` line.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import edmd, fileio
from .dynamics import DivergenceError, Trajectory
from .experiments import RunSpec, fit, reconstruct, run_sweep
from .metrics import compare


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


_VECTOR_FLAGS = ("--x0", "--q", "--r", "--xref")


def _glue_vectors(argv: list) -> list:
    """Rewrite ``--x0 -1,0`` as ``--x0=-1,0`` so argparse does not read the value as a flag."""
    out = []
    for tok in argv:
        if out and out[-1] in _VECTOR_FLAGS and tok[:1] == "-" and tok[1:2] in set("0123456789."):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, text.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value pairs, got {item!r}")
        out[key.strip()] = float(value)
    return out


def _spec_from_args(args) -> RunSpec:
    base = {}
    if args.spec:
        base = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    for key in ("system", "params", "x0", "dt", "steps", "control", "q", "r", "x_ref", "method", "basis", "rank"):
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    unknown = set(base) - set(RunSpec.__dataclass_fields__)
    if unknown:
        raise UsageError(f"unknown RunSpec keys: {', '.join(sorted(unknown))}")
    try:
        return RunSpec(**base)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    traj = spec.simulate()
    fileio.save_trajectory(traj, args.out)
    final = ", ".join(f"{v:.6g}" for v in traj.states[-1])
    print(f"wrote {args.out}: m={traj.m} dt={traj.dt:g} final=[{final}]")
    return 0


def _load_traj(path) -> Trajectory:
    try:
        return fileio.load_trajectory(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def eigen_table(model) -> str:
    inner = model.inner if isinstance(model, edmd.EdmdModel) else model
    lines = [f"{'k':>3} {'|lambda|':>12} {'arg lambda':>12} {'Re omega':>12} {'Im omega':>12}"]
    for k, (lam, om) in enumerate(zip(inner.Lambda, inner.Omega)):
        re, im = ("undef", "undef") if not np.isfinite(om) else (f"{om.real:.6g}", f"{om.imag:.6g}")
        lines.append(f"{k:>3} {abs(lam):>12.8g} {np.angle(lam):>12.6g} {re:>12} {im:>12}")
    return "\n".join(lines)


def cmd_fit(args) -> int:
    traj = _load_traj(args.input)
    if args.method == "edmd" and not args.basis:
        raise UsageError("--method edmd requires --basis (e.g. poly:2, fourier:1)")
    try:
        if args.method == "edmd":
            edmd.Dictionary.parse(args.basis, traj.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = fit(traj, args.method, args.basis, args.rank)
    fileio.save_model(model, args.out)
    inner = model.inner if isinstance(model, edmd.EdmdModel) else model
    print(f"wrote {args.out}: method={args.method} rank={inner.r}")
    print(eigen_table(model))
    for note in inner.notes + getattr(model, "notes", []):
        print(f"note: {note}")
    return 0


def cmd_reconstruct(args) -> int:
    traj = _load_traj(args.input)
    try:
        model = fileio.load_model(args.model)
    except OSError as exc:
        raise UsageError(f"cannot read {args.model}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{args.model}: {exc}") from None
    if model.n != traj.n:
        raise UsageError(f"dimension mismatch: model has n={model.n}, trajectory has n={traj.n}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rec = reconstruct(model, traj.times)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    report = compare(traj, rec)
    fileio.save_trajectory(Trajectory(dt=traj.dt, states=rec.T, state_names=traj.state_names), args.out)
    Path(args.metrics).write_text(json.dumps(report.to_json()) + "\n", encoding="utf-8")
    for name, rmse, rel in zip(traj.state_names, report.per_state_rmse, report.relative_rmse):
        print(f"{name:>10}: rmse={rmse:.6g} relative_rmse={rel:.6g}")
    return 0


def cmd_eigen(args) -> int:
    if args.top < 1:
        raise UsageError(f"--top must be >= 1, got {args.top}")
    traj = _load_traj(args.input)
    try:
        dictionary = edmd.Dictionary.parse(args.basis, traj.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pairs, deficient = edmd.koopman_eigenfunctions(traj, dictionary)
    rows = []
    print(f"{'k':>3} {'lambda':>28} {'|lambda|':>12} {'linearity residual':>20}")
    for k, pair in enumerate(pairs[: args.top]):
        res = edmd.linearity_residual(pair, dictionary, traj)
        rows.append({"lambda": [float(pair.lam.real), float(pair.lam.imag)], "abs": float(abs(pair.lam)), "residual": res,
                     "xi": [[float(z.real), float(z.imag)] for z in pair.xi]})
        print(f"{k:>3} {pair.lam:>28.10g} {abs(pair.lam):>12.8g} {res:>20.6g}")
    if deficient:
        print("note: lifted data rank deficient; minimum-norm pseudoinverse used")
    if args.json:
        payload = {"basis": dictionary.to_json(), "in_sample": True, "rank_deficient": bool(deficient), "eigenpairs": rows}
        Path(args.json).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    return 0


def cmd_repro(args) -> int:
    rows = run_sweep(args.out_dir, jobs=args.jobs)
    print(Path(args.out_dir, "summary.md").read_text(encoding="utf-8"), end="")
    failed = [r["cell"] for r in rows if not r["ok"]]
    if failed:
        print(f"note: {len(failed)} cell(s) failed: {', '.join(failed)}")
    return 0


def _add_run_flags(p):
    p.add_argument("--spec", help="RunSpec JSON file; explicit flags override its values")
    p.add_argument("--system", choices=("pendulum", "cartpole"))
    p.add_argument("--params", type=_params, help="parameter overrides, e.g. m=1,L=2")
    p.add_argument("--x0", type=_floats)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--control", choices=("none", "lqr"))
    p.add_argument("--q", type=_floats, help="diagonal state weights")
    p.add_argument("--r", type=_floats, help="diagonal input weights")
    p.add_argument("--xref", dest="x_ref", type=_floats, help="LQR set-point")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="koopdmd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a benchmark system to CSV")
    _add_run_flags(p)
    p.add_argument("--out", default="trajectory.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a DMD/EDMD model to a trajectory CSV")
    p.add_argument("--method", choices=("dmd", "edmd"), default="dmd")
    p.add_argument("--basis", help="poly:<d>, fourier:<q> or states")
    p.add_argument("--rank", default="auto", help="auto, full or an integer")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reconstruct", help="reconstruct a trajectory from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True, help="reference trajectory CSV")
    p.add_argument("--out", default="reconstruction.csv")
    p.add_argument("--metrics", default="metrics.json")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eigen", help="Koopman eigenfunctions and their linearity residuals")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--basis", default="poly:2")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--json")
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("repro", help="run the full benchmark sweep")
    p.add_argument("--out-dir", default="repro")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(_glue_vectors(list(sys.argv[1:] if argv is None else argv)))
        if args.command == "fit" and args.rank not in ("auto", "full"):
            try:
                if int(args.rank) < 1:
                    raise ValueError
            except ValueError:
                raise UsageError(f"--rank must be auto, full or a positive integer, got {args.rank!r}") from None
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
