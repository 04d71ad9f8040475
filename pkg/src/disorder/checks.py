"""Exhaustive consistency checks between the filter, ``H`` and the oracle."""

from __future__ import annotations

import numpy as np

from .filter import FilterState, init_filter, step_filter
from .likelihood import ZeroLikelihoodError, log_path_density, transition_weight_per_regime
from .model import ModelSpec
from .oracle import MAX_ENUM_LENGTH, GuardError, enumerate_posteriors

IDENTITIES = ("pre_apart", "between", "second", "together", "predictive")


def expectation_identities(spec: ModelSpec, state: FilterState) -> dict[str, float]:
    """Max residual of each one-step conditional-expectation identity over all
    indicator test functions and regimes.

    For ``g = 1{y = a}`` and each regime, the left side
    ``E[g(X_{n+1}) Q_{n+1} | F_n]`` is summed over the next observation with
    weight ``H``; the right side is the closed form in the time-``n`` belief.
    """
    b = state.belief
    x = state.cur_obs
    E = spec.alphabet_size
    p1, q1, p2, q2 = spec.p1, spec.q1, spec.p2, spec.q2
    hu = transition_weight_per_regime(spec, x, np.arange(E), b)  # (K, E)
    h = hu.sum(axis=0)

    lhs = {k: np.zeros((spec.regime_count, E)) for k in IDENTITIES}
    for y in range(E):
        if h[y] <= 0:
            continue
        nb = step_filter(spec, state, y).belief
        lhs["pre_apart"][:, y] = h[y] * (nb.upsilon - nb.pi1 - nb.pi12)
        lhs["between"][:, y] = h[y] * (nb.pi1 - nb.pi2)
        lhs["second"][:, y] = h[y] * nb.pi2
        lhs["together"][:, y] = h[y] * nb.pi12
        lhs["predictive"][:, y] = hu[:, y]

    f0 = spec.kernel_pre[x][None, :]
    f1 = spec.kernel_mid[:, x, :]
    f2 = spec.kernel_post[x][None, :]
    col = lambda v: v[:, None]
    rhs = {
        "pre_apart": col((b.upsilon - b.pi1 - b.pi12) * p1) * f0,
        "between": col(q1 * (b.upsilon - b.pi1 - b.pi12) + p2 * (b.pi1 - b.pi2)) * f1,
        "second": col(q2 * b.pi1 + p2 * b.pi2 + q1 * b.pi12) * f2,
        "together": col(p1 * b.pi12) * f0,
        "predictive": hu,
    }
    out = {k: float(np.abs(lhs[k] - rhs[k]).max()) for k in IDENTITIES}
    out["predictive_total"] = float(abs(lhs["predictive"].sum() - h.sum()))
    return out


def _pair_diff(a: dict, b: dict) -> float:
    worst = 0.0
    for m in set(a) | set(b):
        va = a.get(m, 0.0)
        vb = b.get(m, 0.0)
        worst = max(worst, float(np.max(np.abs(np.asarray(va) - np.asarray(vb)))))
    return worst


def verify_model(spec: ModelSpec, depth: int) -> dict:
    """Walk every observation path up to ``depth`` and record worst residuals."""
    if depth > MAX_ENUM_LENGTH:
        raise GuardError(f"depth {depth} exceeds enumeration guard {MAX_ENUM_LENGTH}")
    worst = {
        "filter_vs_oracle": 0.0,
        "density_recursion": 0.0,
        "normalization": 0.0,
        "pair_decomposition": 0.0,
        "belief_order": 0.0,
        **{k: 0.0 for k in IDENTITIES},
    }
    counts = {"paths": 0}

    def visit(path: tuple[int, ...], state: FilterState, log_s: float) -> None:
        counts["paths"] += 1
        tab = enumerate_posteriors(spec, path)
        b = state.belief
        diff = float(np.abs(b.as_array() - tab.belief.as_array()).max())
        diff = max(diff, _pair_diff(state.pair_beliefs, tab.pair_beliefs))
        worst["filter_vs_oracle"] = max(worst["filter_vs_oracle"], diff)
        pair_total = sum(v.sum() for v in state.pair_beliefs.values())
        worst["pair_decomposition"] = max(worst["pair_decomposition"],
                                          abs(pair_total - (b.pi1.sum() - b.pi2.sum())))
        order = max(np.max(b.pi2 - b.pi1), np.max(b.pi1 - b.upsilon), np.max(b.pi12 - (b.upsilon - b.pi1)), 0.0)
        worst["belief_order"] = max(worst["belief_order"], float(order))
        hu = transition_weight_per_regime(spec, state.cur_obs, np.arange(spec.alphabet_size), b)
        h = hu.sum(axis=0)
        worst["normalization"] = max(worst["normalization"], abs(h.sum() - 1.0))
        for k, v in expectation_identities(spec, state).items():
            if k in worst:
                worst[k] = max(worst[k], v)
        if len(path) - 1 >= depth:
            return
        for y in range(spec.alphabet_size):
            if h[y] <= 0:
                continue
            child = path + (y,)
            log_child = log_path_density(spec, child)
            # S_{n+1} / (H * S_n) - 1
            rel = abs(np.expm1(log_child - log_s - np.log(h[y])))
            worst["density_recursion"] = max(worst["density_recursion"], float(rel))
            try:
                nxt = step_filter(spec, state, y, prune_below=0.0)
            except ZeroLikelihoodError:
                continue
            visit(child, nxt, log_child)

    x0 = spec.initial_state
    visit((x0,), init_filter(spec), 0.0)
    tolerances = {k: 1e-10 for k in worst}
    tolerances["normalization"] = 1e-12
    checks = {
        k: {"max_error": v, "tolerance": tolerances[k], "passed": bool(v <= tolerances[k])}
        for k, v in worst.items()
    }
    return {
        "depth": depth,
        "paths": counts["paths"],
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
        "model_digest": spec.digest(),
    }
