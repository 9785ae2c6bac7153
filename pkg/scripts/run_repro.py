"""Run the 20-cell benchmark sweep and print the directional checks.

    python3 scripts/run_repro.py --out-dir repro --jobs 4
"""

import argparse
import time

import numpy as np

from koopdmd.experiments import find_cell, run_sweep


def rel(rows, system, control, method):
    return np.array(find_cell(rows, system, control, method)["relative_rmse"])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="repro")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    start = time.perf_counter()
    rows = run_sweep(args.out_dir, jobs=args.jobs)
    elapsed = time.perf_counter() - start
    with open(f"{args.out_dir}/summary.md", encoding="utf-8") as fh:
        print(fh.read())

    pend_none, pend_lqr = rel(rows, "pendulum", "none", "dmd"), rel(rows, "pendulum", "lqr", "dmd")
    poly2 = rel(rows, "pendulum", "lqr", "poly:2")
    cart_none = rel(rows, "cartpole", "none", "dmd")
    checks = [
        ("pendulum DMD relative RMSE < 1 (both cells)", bool(np.all(pend_none < 1) and np.all(pend_lqr < 1))),
        ("controlled pendulum poly:2 <= 1.05 x DMD", bool(np.all(poly2 <= 1.05 * pend_lqr))),
        ("uncontrolled cart-pole DMD worse than pendulum", bool(cart_none.max() > pend_none.max())),
        (f"sweep runtime {elapsed:.1f} s < 60 s", elapsed < 60),
    ]
    for label, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {label}")


if __name__ == "__main__":
    main()
