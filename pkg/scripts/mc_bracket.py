"""Repeat Monte Carlo suites and count how often the Wilson interval misses
the exact policy value.

    python3 scripts/mc_bracket.py --suites 20 --runs 100000 --horizon 5
"""

import argparse
import time

from disorder.evaluate import evaluate
from disorder.model import tiny_model
from disorder.solver import solve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--suites", type=int, default=20)
    ap.add_argument("--runs", type=int, default=100_000)
    ap.add_argument("--horizon", type=int, default=5)
    ap.add_argument("--finite", action="store_true", help="use the horizon-aware policy")
    args = ap.parse_args()

    spec = tiny_model()
    policy = solve(spec, horizon=args.horizon if args.finite else None)
    misses = 0
    t0 = time.perf_counter()
    for seed in range(1, args.suites + 1):
        rep = evaluate(spec, policy, args.runs, seed, horizon=args.horizon)
        lo, hi = rep.wilson_ci_95
        miss = not lo <= rep.policy_value_exact <= hi
        misses += miss
        print(f"seed {seed:3d}  est {rep.detection_prob_estimate:.5f}  ci [{lo:.5f}, {hi:.5f}]"
              f"  exact {rep.policy_value_exact:.5f}{'  MISS' if miss else ''}")
    print(f"{misses}/{args.suites} misses, optimum {rep.oracle_value:.6f}, {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
