"""Monte Carlo estimate of the detection probability P(tau = theta1, sigma = theta2)."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binomtest

from .detect import decision_table, run_detector_batch
from .model import ModelSpec, prior_theta2_mean
from .oracle import MAX_POLICY_HORIZON, GuardError, brute_force_policy, evaluate_policy_exact
from .simulate import make_rng, sample_batch
from .solver import StoppingPolicy

MIN_RUNS = 100
CHUNK = 50_000


@dataclass
class EvaluationReport:
    n_runs: int
    horizon: int
    hits: int
    detection_prob_estimate: float
    wilson_ci_95: tuple[float, float]
    mean_tau_error: float | None
    mean_sigma_error: float | None
    oracle_value: float | None
    policy_value_exact: float | None
    config_digest: str
    seeds: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["wilson_ci_95"] = list(self.wilson_ci_95)
        return d


def default_horizon(spec: ModelSpec) -> int:
    m = prior_theta2_mean(spec)
    if not math.isfinite(m):
        raise ValueError("prior mean of theta2 is infinite; pass a horizon")
    return max(1, math.ceil(10 * m))


def wilson_interval(hits: int, n: int) -> tuple[float, float]:
    ci = binomtest(hits, n).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def config_digest(spec: ModelSpec, policy: StoppingPolicy, **flags) -> str:
    blob = json.dumps({"model": spec.digest(), "policy": policy.to_dict(), "flags": flags},
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def evaluate(
    spec: ModelSpec,
    policy: StoppingPolicy,
    n_runs: int,
    seed: int,
    horizon: int | None = None,
    exact: bool | None = None,
) -> EvaluationReport:
    if n_runs < MIN_RUNS:
        raise ValueError(f"n_runs={n_runs} below {MIN_RUNS}; the interval would be meaningless")
    N = default_horizon(spec) if horizon is None else horizon
    rng = make_rng(seed)
    hits = 0
    tau_err, sigma_err = [], []
    done = 0
    while done < n_runs:
        size = min(CHUNK, n_runs - done)
        obs, t1, t2, _ = sample_batch(spec, N, rng, size)
        tau, sigma = run_detector_batch(spec, policy, obs, N)
        hits += int(np.sum((tau == t1) & (sigma == t2)))
        ft, fs = tau >= 0, sigma >= 0
        tau_err.append((tau[ft] - np.minimum(t1[ft], 10 ** 12)).astype(float))
        sigma_err.append((sigma[fs] - np.minimum(t2[fs], 10 ** 12)).astype(float))
        done += size
    te, se = np.concatenate(tau_err), np.concatenate(sigma_err)

    if exact is None:
        exact = N <= MAX_POLICY_HORIZON and spec.alphabet_size ** N <= 4096
    oracle_value = policy_value = None
    if exact:
        try:
            oracle_value = brute_force_policy(spec, N).value
            policy_value = evaluate_policy_exact(spec, decision_table(spec, policy, N), N)
        except GuardError:
            pass
    return EvaluationReport(
        n_runs=n_runs,
        horizon=N,
        hits=hits,
        detection_prob_estimate=hits / n_runs,
        wilson_ci_95=wilson_interval(hits, n_runs),
        mean_tau_error=float(te.mean()) if te.size else None,
        mean_sigma_error=float(se.mean()) if se.size else None,
        oracle_value=oracle_value,
        policy_value_exact=policy_value,
        config_digest=config_digest(spec, policy, n_runs=n_runs, seed=seed, horizon=N),
        seeds={"seed": int(seed), "generator": "philox", "runs": [0, n_runs]},
    )
