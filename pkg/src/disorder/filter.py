"""Recursive a-posteriori filter for the two-disorder model."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .likelihood import BeliefVector, ZeroLikelihoodError, transition_weight_per_regime
from .model import ModelSpec

PRUNE_BELOW = 1e-15


@dataclass(frozen=True)
class FilterState:
    time: int
    prev_obs: int
    cur_obs: int
    belief: BeliefVector
    # spawn time m -> P(theta1 = m, theta2 > n, eps = u | F_n) per regime
    pair_beliefs: dict[int, np.ndarray] = field(default_factory=dict)

    def pair_mass(self) -> float:
        return float(sum(v.sum() for v in self.pair_beliefs.values()))


def init_filter(spec: ModelSpec) -> FilterState:
    r = spec.regime_prior
    belief = BeliefVector(
        pi1=spec.pi * r,
        pi2=spec.pi * spec.rho * r,
        pi12=(1 - spec.pi) * spec.rho * r,
        upsilon=r.copy(),
    )
    pairs = {}
    if spec.pi * (1 - spec.rho) > 0:
        pairs[0] = spec.pi * (1 - spec.rho) * r
    x0 = spec.initial_state
    return FilterState(0, x0, x0, belief, pairs)


def _spawn_pair(spec: ModelSpec, x: int, y: int, pre_mass_new: np.ndarray,
                old: BeliefVector, h: float, variant: str) -> np.ndarray:
    f1 = spec.kernel_mid[:, x, y]
    if variant == "posterior":
        # scaled from P(theta1 > m, eps = u | F_m) through the pre/mid kernel ratio
        f0 = spec.kernel_pre[x, y]
        return (1 - spec.rho) * spec.q1 * f1 / (spec.p1 * f0) * pre_mass_new
    if variant == "prior":
        # entering mass from the previous step's {n < theta1 < theta2}
        return spec.q1 * (old.upsilon - old.pi1 - old.pi12) * f1 / h
    raise ValueError(f"unknown spawn variant {variant!r}")


def printed_upsilon_update(spec: ModelSpec, state: FilterState, y: int, h: float) -> np.ndarray:
    """Regime update in the literal form found in the source derivation.

    Kept for comparison only; it does not preserve normalisation.
    """
    b = state.belief
    x = state.cur_obs
    f0 = spec.kernel_pre[x, y]
    f1 = spec.kernel_mid[:, x, y]
    f2 = spec.kernel_post[x, y]
    num = (
        f0 * (b.upsilon - spec.q1 * b.pi12)
        + f1 * spec.p2 * (b.pi1 - b.pi2)
        + f2 * (spec.q2 * (b.pi1 + b.pi2) + b.pi2 + spec.q1 * b.pi12)
    )
    return num / h


def step_filter(
    spec: ModelSpec,
    state: FilterState,
    y: int,
    *,
    keep: Iterable[int] = (),
    prune_below: float = PRUNE_BELOW,
    spawn_variant: str = "posterior",
) -> FilterState:
    """Condition on ``X_{n+1} = y``; ``keep`` lists pair spawn times exempt from pruning."""
    x = state.cur_obs
    b = state.belief
    hu = transition_weight_per_regime(spec, x, y, b)
    h = float(hu.sum())
    if not h > 0:
        raise ZeroLikelihoodError(x, y)

    f0 = spec.kernel_pre[x, y]
    f1 = spec.kernel_mid[:, x, y]
    f2 = spec.kernel_post[x, y]
    upsilon = hu / h
    pre_mass = b.pre_mass * spec.p1 * f0 / h
    new = BeliefVector(
        pi1=upsilon - pre_mass,
        pi2=(spec.q2 * b.pi1 + spec.p2 * b.pi2 + spec.q1 * b.pi12) * f2 / h,
        pi12=spec.p1 * b.pi12 * f0 / h,
        upsilon=upsilon,
    )
    keep = set(keep)
    pairs = {}
    for m, v in state.pair_beliefs.items():
        nv = spec.p2 * v * f1 / h
        if m in keep or nv.sum() >= prune_below:
            pairs[m] = nv
    m = state.time + 1
    spawned = _spawn_pair(spec, x, y, pre_mass, b, h, spawn_variant)
    if m in keep or spawned.sum() >= prune_below:
        pairs[m] = spawned
    return FilterState(m, x, y, new, pairs)


def run_filter(spec: ModelSpec, observations, **kwargs) -> list[FilterState]:
    """States at times ``0..n`` for a path starting at the model's initial state."""
    obs = list(observations)
    if obs and obs[0] != spec.initial_state:
        raise ValueError("path must start at the model's initial state")
    states = [init_filter(spec)]
    for y in obs[1:]:
        states.append(step_filter(spec, states[-1], int(y), **kwargs))
    return states


def predicted_event_probs(spec: ModelSpec, state: FilterState) -> dict[str, np.ndarray]:
    """One-step-ahead per-regime probabilities given ``F_n``.

    together_later:  P(theta1 = theta2 > n+1)
    apart_later:     P(n+1 < theta1 < theta2)
    first_by_next:   P(theta1 <= n+1)
    between_next:    P(theta1 <= n+1 < theta2)
    second_by_next:  P(theta2 <= n+1)
    """
    b = state.belief
    p1, q1, p2, q2 = spec.p1, spec.q1, spec.p2, spec.q2
    second = q2 * b.pi1 + p2 * b.pi2 + q1 * b.pi12
    between = q1 * (b.upsilon - b.pi1 - b.pi12) + p2 * (b.pi1 - b.pi2)
    return {
        "together_later": p1 * b.pi12,
        "apart_later": p1 * (b.upsilon - b.pi1 - b.pi12),
        "first_by_next": between + second,
        "between_next": between,
        "second_by_next": second,
    }


TRACE_HEADER = ["n", "x_n", "pi1", "pi2", "pi12", "upsilon", "pair_mass"]


def _fmt(v: np.ndarray) -> str:
    return " ".join(repr(float(a)) for a in np.atleast_1d(v))


def trace_rows(states: list[FilterState]):
    for s in states:
        b = s.belief
        yield [s.time, s.cur_obs, _fmt(b.pi1), _fmt(b.pi2), _fmt(b.pi12), _fmt(b.upsilon),
               repr(s.pair_mass())]


def write_trace(states: list[FilterState], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    w.writerows(trace_rows(states))
