"""Exact values at a small horizon: optimum, stationary and finite-horizon
solver policies, and the best data-blind guess, over random 2-letter models.

    python3 scripts/desk_gap.py --models 10 --horizon 5 --seed 0
"""

import argparse

import numpy as np

from disorder.detect import decision_table
from disorder.model import random_model, tiny_model
from disorder.oracle import best_blind_value, brute_force_policy, evaluate_policy_exact
from disorder.solver import solve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--models", type=int, default=10)
    ap.add_argument("--horizon", type=int, default=5)
    ap.add_argument("--regimes", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    N = args.horizon
    specs = [("tiny", tiny_model())] + [
        (f"rand{i}", random_model(rng, 2, args.regimes)) for i in range(args.models)
    ]
    print(f"{'model':>8} {'optimum':>9} {'finite':>9} {'stationary':>10} {'blind':>9} {'gap':>7}")
    for name, spec in specs:
        opt = brute_force_policy(spec, N).value
        fin = evaluate_policy_exact(spec, decision_table(spec, solve(spec, horizon=N), N), N)
        sta = evaluate_policy_exact(spec, decision_table(spec, solve(spec), N), N)
        blind = best_blind_value(spec, N)[0]
        print(f"{name:>8} {opt:9.6f} {fin:9.6f} {sta:10.6f} {blind:9.6f} {opt - sta:7.4f}")


if __name__ == "__main__":
    main()
