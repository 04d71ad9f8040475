"""Brute-force ground truth on small instances.

Everything here works directly from the prior and per-configuration path
products.  None of it goes through the filter or the belief-state solver, so
it can serve as an independent reference for both.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .likelihood import BeliefVector
from .model import ModelSpec

MAX_ENUM_LENGTH = 20
MAX_POLICY_HORIZON = 8

TAIL = -1  # marks "beyond n" in enumeration keys


class GuardError(ValueError):
    """Instance too large for exhaustive treatment."""


def _path_prob(spec: ModelSpec, path, j: int, k: int, u: int) -> float:
    """Probability of the transitions in ``path`` given theta1=j, theta2=k, eps=u (0-based)."""
    prob = 1.0
    for i in range(1, len(path)):
        if i < j:
            kern = spec.kernel_pre
        elif i < k:
            kern = spec.kernel_mid[u]
        else:
            kern = spec.kernel_post
        prob *= kern[path[i - 1], path[i]]
    return prob


def _p_theta1(spec: ModelSpec, j: int) -> float:
    return spec.pi if j == 0 else (1 - spec.pi) * spec.p1 ** (j - 1) * spec.q1


def _p_theta2(spec: ModelSpec, j: int, k: int) -> float:
    return spec.rho if k == j else (1 - spec.rho) * spec.p2 ** (k - j - 1) * spec.q2


@dataclass
class EnumerationTable:
    path: tuple[int, ...]
    # (j, k, u) -> joint weight; j or k == TAIL aggregates everything beyond n
    weights: dict[tuple[int, int, int], float]
    normalizer: float
    belief: BeliefVector = None
    pair_beliefs: dict[int, np.ndarray] = field(default_factory=dict)


def enumerate_posteriors(spec: ModelSpec, path) -> EnumerationTable:
    path = tuple(int(v) for v in path)
    n = len(path) - 1
    if n > MAX_ENUM_LENGTH:
        raise GuardError(f"path length {n} exceeds enumeration guard {MAX_ENUM_LENGTH}")
    K = spec.regime_count
    r = spec.regime_prior
    weights: dict[tuple[int, int, int], float] = {}
    for u in range(K):
        for j in range(n + 1):
            for k in range(j, n + 1):
                weights[(j, k, u)] = _p_theta1(spec, j) * _p_theta2(spec, j, k) * r[u] * _path_prob(spec, path, j, k, u)
            # theta2 beyond n: every later k gives the same path product
            beyond = (1 - spec.rho) * spec.p2 ** (n - j)
            weights[(j, TAIL, u)] = _p_theta1(spec, j) * beyond * r[u] * _path_prob(spec, path, j, n + 1, u)
        # theta1 beyond n: the whole path is pre-change
        beyond1 = (1 - spec.pi) * spec.p1 ** n
        pre_only = _path_prob(spec, path, n + 1, n + 1, u)
        weights[(TAIL, TAIL, u)] = beyond1 * (1 - spec.rho) * r[u] * pre_only
        weights[(TAIL, 0, u)] = beyond1 * spec.rho * r[u] * pre_only  # theta1 = theta2 > n

    S = sum(weights.values())
    pi1 = np.zeros(K)
    pi2 = np.zeros(K)
    pi12 = np.zeros(K)
    ups = np.zeros(K)
    pairs: dict[int, np.ndarray] = {}
    for (j, k, u), w in weights.items():
        ups[u] += w
        if j != TAIL:
            pi1[u] += w
            if k != TAIL:
                pi2[u] += w
            else:
                pairs.setdefault(j, np.zeros(K))[u] += w
        elif k == 0:
            pi12[u] += w
    belief = BeliefVector(pi1 / S, pi2 / S, pi12 / S, ups / S)
    return EnumerationTable(path, weights, S, belief, {m: v / S for m, v in pairs.items()})


def joint_hit_prob(spec: ModelSpec, path, m: int, n: int) -> float:
    """P(theta1 = m, theta2 = n, X_{1..n} = path[1..n]) for ``n = len(path) - 1``."""
    return sum(
        _p_theta1(spec, m) * _p_theta2(spec, m, n) * spec.regime_prior[u] * _path_prob(spec, path, m, n, u)
        for u in range(spec.regime_count)
    )


@dataclass
class DecisionTable:
    """Stopping decisions keyed by observation prefix.

    ``first[prefix]``: stop the first time at ``len(prefix) - 1``.
    ``second[(m, prefix)]``: having stopped first at ``m``, stop again now.
    """

    horizon: int
    first: dict[tuple[int, ...], bool] = field(default_factory=dict)
    second: dict[tuple[int, tuple[int, ...]], bool] = field(default_factory=dict)


def prefixes(spec: ModelSpec, horizon: int):
    """All observation prefixes of length ``0..horizon`` starting at ``X_0``."""
    x0 = spec.initial_state
    for n in range(horizon + 1):
        for tail in itertools.product(range(spec.alphabet_size), repeat=n):
            yield (x0,) + tail


def _check_horizon(spec: ModelSpec, horizon: int) -> None:
    if horizon > MAX_POLICY_HORIZON or spec.alphabet_size ** horizon > 4 ** MAX_POLICY_HORIZON:
        raise GuardError(f"horizon {horizon} too large for exhaustive policy search")


@dataclass
class BruteForceResult:
    value: float
    table: DecisionTable


def brute_force_policy(spec: ModelSpec, horizon: int) -> BruteForceResult:
    """Exact optimum of P(tau = theta1, sigma = theta2) over tau <= sigma <= horizon.

    Backward induction on the prefix tree with joint (unnormalised) values,
    so the state is the full prefix and no belief sufficiency is assumed.
    """
    _check_horizon(spec, horizon)
    E = spec.alphabet_size
    table = DecisionTable(horizon)
    inner_cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def inner(m: int, prefix: tuple[int, ...]) -> float:
        key = (m, prefix)
        if key in inner_cache:
            return inner_cache[key]
        n = len(prefix) - 1
        payoff = joint_hit_prob(spec, prefix, m, n)
        if n == horizon:
            cont = -np.inf
        else:
            cont = sum(inner(m, prefix + (y,)) for y in range(E))
        table.second[key] = bool(payoff >= cont)
        inner_cache[key] = max(payoff, cont)
        return inner_cache[key]

    def outer(prefix: tuple[int, ...]) -> float:
        n = len(prefix) - 1
        now = inner(n, prefix)
        cont = -np.inf if n == horizon else sum(outer(prefix + (y,)) for y in range(E))
        table.first[prefix] = bool(now >= cont)
        return max(now, cont)

    value = outer((spec.initial_state,))
    return BruteForceResult(float(value), table)


def evaluate_policy_exact(spec: ModelSpec, table: DecisionTable, horizon: int | None = None) -> float:
    """Exact P(tau = theta1, sigma = theta2) of a tabulated policy; unstopped = miss."""
    horizon = table.horizon if horizon is None else horizon
    _check_horizon(spec, horizon)
    E = spec.alphabet_size

    def lookup(d, key):
        try:
            return d[key]
        except KeyError:
            raise KeyError(f"policy undefined at prefix {key}") from None

    def phase2(m: int, prefix: tuple[int, ...]) -> float:
        if lookup(table.second, (m, prefix)):
            return joint_hit_prob(spec, prefix, m, len(prefix) - 1)
        if len(prefix) - 1 == horizon:
            return 0.0
        return sum(phase2(m, prefix + (y,)) for y in range(E))

    def phase1(prefix: tuple[int, ...]) -> float:
        if lookup(table.first, prefix):
            return phase2(len(prefix) - 1, prefix)
        if len(prefix) - 1 == horizon:
            return 0.0
        return sum(phase1(prefix + (y,)) for y in range(E))

    return float(phase1((spec.initial_state,)))


def constant_policy(spec: ModelSpec, j: int, k: int, horizon: int) -> DecisionTable:
    """Data-blind policy stopping at times ``j`` and ``k``."""
    table = DecisionTable(horizon)
    for p in prefixes(spec, horizon):
        n = len(p) - 1
        table.first[p] = n == j
        for m in range(n + 1):
            table.second[(m, p)] = n >= k if m <= k else True
    return table


def best_blind_value(spec: ModelSpec, horizon: int) -> tuple[float, tuple[int, int]]:
    best = (-1.0, (0, 0))
    for j in range(horizon + 1):
        for k in range(j, horizon + 1):
            v = _p_theta1(spec, j) * _p_theta2(spec, j, k)
            if v > best[0]:
                best = (v, (j, k))
    return best


def never_policy(spec: ModelSpec, horizon: int) -> DecisionTable:
    table = DecisionTable(horizon)
    for p in prefixes(spec, horizon):
        table.first[p] = False
        for m in range(len(p)):
            table.second[(m, p)] = False
    return table


def random_policy(spec: ModelSpec, horizon: int, rng: np.random.Generator) -> DecisionTable:
    table = DecisionTable(horizon)
    for p in prefixes(spec, horizon):
        table.first[p] = bool(rng.random() < 0.3)
        for m in range(len(p)):
            table.second[(m, p)] = bool(rng.random() < 0.4)
    return table


def _prefix_key(prefix) -> str:
    return "".join(str(v) for v in prefix) if max(prefix, default=0) < 10 else ",".join(map(str, prefix))


def oracle_report(spec: ModelSpec, horizon: int) -> dict:
    """JSON-ready snapshot: optimal value, decisions and exact posteriors."""
    result = brute_force_policy(spec, horizon)
    posteriors = {}
    for p in prefixes(spec, horizon):
        tab = enumerate_posteriors(spec, p)
        b = tab.belief
        posteriors[_prefix_key(p)] = {
            "pi1": b.pi1.tolist(),
            "pi2": b.pi2.tolist(),
            "pi12": b.pi12.tolist(),
            "upsilon": b.upsilon.tolist(),
            "pairs": {str(m): v.tolist() for m, v in sorted(tab.pair_beliefs.items())},
            "normalizer": tab.normalizer,
        }
    blind, jk = best_blind_value(spec, horizon)
    return {
        "horizon": horizon,
        "optimal_value": result.value,
        "best_blind_value": blind,
        "best_blind_times": list(jk),
        "first_stop": {_prefix_key(p): v for p, v in result.table.first.items()},
        "second_stop": {f"{m}:{_prefix_key(p)}": v for (m, p), v in result.table.second.items()},
        "posteriors": posteriors,
        "model_digest": spec.digest(),
    }
