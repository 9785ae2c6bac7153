"""Reconstruction error and one-step residual against explicit truncation rank.

    python3 scripts/rank_sweep.py --system cartpole --control lqr --basis poly:2
"""

import argparse
import warnings

import numpy as np

from koopdmd import dmd, edmd
from koopdmd.experiments import RunSpec, reconstruct
from koopdmd.metrics import compare
from koopdmd.snapshots import build_snapshots


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--system", default="pendulum", choices=("pendulum", "cartpole"))
    ap.add_argument("--control", default="lqr", choices=("none", "lqr"))
    ap.add_argument("--basis", default="poly:2", help="EDMD basis, or 'dmd' for plain DMD")
    args = ap.parse_args()

    traj = RunSpec(system=args.system, control=args.control).simulate()
    snap = build_snapshots(traj)
    dictionary = None
    if args.basis != "dmd":
        dictionary = edmd.Dictionary.parse(args.basis, traj.n)
        snap = edmd.lift_snapshots(dictionary, snap)
    r_max = dmd.truncated_svd(snap.X).r

    print(f"{'rank':>4} {'one-step residual':>18} {'max relative RMSE':>18}")
    for r in range(1, r_max + 1):
        inner = dmd.fit_dmd(snap, r)
        model = inner if dictionary is None else edmd.EdmdModel(dictionary, inner)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rec = reconstruct(model, traj.times)
        err = np.max(compare(traj, rec).relative_rmse) if np.all(np.isfinite(rec)) else np.inf
        print(f"{r:>4} {dmd.one_step_residual(inner, snap):>18.6g} {err:>18.6g}")


if __name__ == "__main__":
    main()
