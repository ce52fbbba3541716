"""Compare the coordinate-descent solver with a conic solve plus exact coordinate polishing.

Needs cvxpy. Reports relative objective gap, optimality certificate and solver time per C.
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from adobing.adasvm import AdaSvmConfig, TrainingSet, fit_detailed, objective, optimality_violation  # noqa: E402
from adobing.bing import LinearModel  # noqa: E402
from oracles import random_instance, reference_solution  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=30)
    ap.add_argument("--C", type=float, nargs="+", default=[0.001, 0.01, 0.1, 1.0])
    ap.add_argument("--n-max", type=int, default=50)
    ap.add_argument("--w-scale", type=float, default=1.0, help="std of the random source model")
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--max-iters", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print("C        worst_rel_gap  worst_cert  max_sweeps  unconverged  solver_s")
    for C in args.C:
        gaps, certs, sweeps, misses, spent = [], [], [], 0, 0.0
        for _ in range(args.instances):
            X, y, w_hat = random_instance(rng, args.n_max, w_scale=args.w_scale)
            ts = TrainingSet(X, y)
            t0 = time.perf_counter()
            res = fit_detailed(ts, LinearModel(w_hat),
                               AdaSvmConfig(C=C, tol=args.tol, max_outer_iters=args.max_iters))
            spent += time.perf_counter() - t0
            ref = objective(reference_solution(X, y, w_hat, C), w_hat, ts, C)
            gaps.append(abs(res.objective - ref) / abs(ref))
            certs.append(optimality_violation(res.model.w, w_hat, ts, C).max())
            sweeps.append(res.n_iter)
            misses += not res.converged
        print(f"{C:<8g} {max(gaps):13.2e}  {max(certs):10.2e}  {max(sweeps):10d}  {misses:11d}  {spent:8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
