"""Online application of a solved stopping policy."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .filter import init_filter, step_filter, FilterState
from .model import ModelSpec
from .oracle import DecisionTable, prefixes
from .simplex import normalize_rows
from .solver import StoppingPolicy, _ratio, immediate_stop_test

log = logging.getLogger(__name__)

TRACE_HEADER = ["n", "statistic_1", "in_B_star", "statistic_2", "threshold_2", "action"]


@dataclass
class DetectionResult:
    tau: int | None  # None = never within the horizon
    sigma: int | None
    hit1: bool | None = None
    hit2: bool | None = None
    trace: list[dict] = field(default_factory=list)

    @property
    def hit(self) -> bool | None:
        if self.hit1 is None:
            return None
        return bool(self.hit1 and self.hit2)


def second_stop_rule(policy: StoppingPolicy, state: FilterState, m: int, remaining: int | None = None):
    """``(stop, statistic, threshold)`` for the pair posterior spawned at ``m < n``."""
    v = state.pair_beliefs.get(m)
    if v is None or not v.sum() > 0:
        log.debug("pair posterior for m=%d has no mass at n=%d; continuing", m, state.time)
        return False, float("nan"), float("nan")
    d = v / v.sum()
    stat = policy.second_statistic(state.prev_obs, state.cur_obs, d)
    thr = policy.second_threshold(state.cur_obs, d, remaining)
    return stat >= thr, stat, thr


def _start(spec: ModelSpec, policy: StoppingPolicy, horizon: int):
    """Time-0 decisions: ``(tau, sigma)`` with None for not yet."""
    if immediate_stop_test(spec, policy, remaining=horizon):
        return 0, 0
    iv = policy.initial_values(horizon)
    if iv["first_now"] >= iv["continue"]:
        return 0, (0 if iv["both_now"] >= iv["second_later"] else None)
    return None, None


def run_detector(
    spec: ModelSpec,
    policy: StoppingPolicy,
    observations,
    max_horizon: int | None = None,
    theta1: int | None = None,
    theta2: int | None = None,
) -> DetectionResult:
    obs = [int(v) for v in observations]
    if obs[0] != spec.initial_state:
        raise ValueError("observations must start at the model's initial state")
    N = len(obs) - 1 if max_horizon is None else min(max_horizon, len(obs) - 1)
    state = init_filter(spec)
    tau, sigma = _start(spec, policy, N)
    trace = [{"n": 0, "statistic_1": None, "in_B_star": tau == 0, "statistic_2": None,
              "threshold_2": None, "action": _action(tau == 0, sigma == 0)}]
    n = 0
    while sigma is None and n < N:
        n += 1
        keep = () if tau is None else (tau,)
        state = step_filter(spec, state, obs[n], keep=keep)
        t, u = state.prev_obs, state.cur_obs
        row = {"n": n, "statistic_1": None, "in_B_star": None, "statistic_2": None, "threshold_2": None}
        stop1 = stop2 = False
        if tau is None:
            pre = float(state.belief.pre_mass.sum())
            row["statistic_1"] = pre * policy.first_statistic(t, u, N - n)
            stop1 = policy.in_stopping_set(t, u, N - n)
            row["in_B_star"] = stop1
            if stop1:
                tau = n
                d = policy.first_direction(t, u)
                stop2 = policy.stop_second_at_first(t, u, d, N - n)
        else:
            stop2, stat, thr = second_stop_rule(policy, state, tau, N - n)
            row["statistic_2"], row["threshold_2"] = stat, thr
        if stop2:
            sigma = n
        row["action"] = _action(stop1, stop2)
        trace.append(row)
    res = DetectionResult(tau, sigma, trace=trace)
    if theta1 is not None:
        res.hit1 = tau is not None and tau == theta1
        res.hit2 = sigma is not None and sigma == theta2
    return res


def _action(stop1: bool, stop2: bool) -> str:
    if stop1 and stop2:
        return "stop_both"
    if stop1:
        return "stop_first"
    if stop2:
        return "stop_second"
    return "continue"


def write_trace(result: DetectionResult, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for row in result.trace:
        w.writerow(["" if row[k] is None else (repr(row[k]) if isinstance(row[k], float) else row[k])
                    for k in TRACE_HEADER])


# -- exhaustive and batched views of the same rule --------------------------

def _walk(spec: ModelSpec, policy: StoppingPolicy, prefix, horizon: int):
    """Replay the rule along ``prefix``; yields ``(n, tau, sigma)`` after each time."""
    tau, sigma = _start(spec, policy, horizon)
    yield 0, tau, sigma
    d = spec.regime_prior.copy()
    for n in range(1, len(prefix)):
        t, u = prefix[n - 1], prefix[n]
        if sigma is None:
            if tau is None:
                if policy.in_stopping_set(t, u, horizon - n):
                    tau = n
                    d = policy.first_direction(t, u)
                    if policy.stop_second_at_first(t, u, d, horizon - n):
                        sigma = n
            else:
                d, _ = normalize_rows(d * spec.kernel_mid[:, t, u])
                if policy.stop_second_now(t, u, d, horizon - n):
                    sigma = n
        yield n, tau, sigma


def decision_table(spec: ModelSpec, policy: StoppingPolicy, horizon: int) -> DecisionTable:
    """Tabulate the detector on every prefix, for exact evaluation.

    Prefixes the rule can never reach in a given phase are filled with
    ``False``; they carry no probability under the rule.
    """
    table = DecisionTable(horizon)
    for p in prefixes(spec, horizon):
        n = len(p) - 1
        for m in range(n + 1):
            table.second[(m, p)] = False
        steps = list(_walk(spec, policy, p, horizon))
        _, tau, sigma = steps[-1]
        table.first[p] = tau == n
        if tau is not None:
            table.second[(tau, p)] = sigma == n
    return table


def _continuation_batch(policy: StoppingPolicy, u: np.ndarray, d: np.ndarray, remaining: int | None) -> np.ndarray:
    prev = policy._prev(policy.stage(remaining))
    if prev is None:
        return np.zeros(len(u))
    spec = policy.spec
    grid = policy._grid
    out = np.zeros(len(u))
    for s in range(spec.alphabet_size):
        dirs, mass = normalize_rows(d * spec.kernel_mid[:, u, s].T)
        idx, w = grid.locate(dirs)
        vals = policy.r_star[prev, u, s]  # (B, G)
        out += mass * (np.take_along_axis(vals, idx, axis=1) * w).sum(axis=1)
    return out


def run_detector_batch(spec: ModelSpec, policy: StoppingPolicy, obs: np.ndarray,
                       max_horizon: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised detector over rows of ``obs``; returns ``(tau, sigma)`` with -1 = never."""
    obs = np.asarray(obs, dtype=np.int64)
    B = obs.shape[0]
    N = obs.shape[1] - 1 if max_horizon is None else min(max_horizon, obs.shape[1] - 1)
    t0, s0 = _start(spec, policy, N)
    tau = np.full(B, -1 if t0 is None else t0, dtype=np.int64)
    sigma = np.full(B, -1 if s0 is None else s0, dtype=np.int64)
    E, K = spec.alphabet_size, spec.regime_count
    ratio = _ratio(spec)
    d = np.tile(spec.regime_prior, (B, 1))
    first_dir = np.array([[policy.first_direction(t, u) for u in range(E)] for t in range(E)])
    for n in range(1, N + 1):
        k = N - n
        t, u = obs[:, n - 1], obs[:, n]
        pending2 = (tau >= 0) & (sigma < 0)
        if pending2.any():
            i = np.flatnonzero(pending2)
            d[i], _ = normalize_rows(d[i] * spec.kernel_mid[:, t[i], u[i]].T)
            stat = np.einsum("bk,bk->b", d[i], ratio[t[i], u[i]])
            thr = spec.p2 * _continuation_batch(policy, u[i], d[i], k)
            if policy.kind == "never":
                thr[:] = np.inf
            sigma[i[stat >= thr]] = n
        pending1 = tau < 0
        if pending1.any():
            stop1 = np.array([[policy.in_stopping_set(a, b, k) for b in range(E)] for a in range(E)])
            same = np.array([[policy.stop_second_at_first(a, b, first_dir[a, b], k) for b in range(E)]
                             for a in range(E)])
            i = np.flatnonzero(pending1 & stop1[t, u])
            tau[i] = n
            d[i] = first_dir[t[i], u[i]]
            j = i[same[t[i], u[i]]]
            sigma[j] = n
    return tau, sigma
