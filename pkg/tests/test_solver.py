import json

import numpy as np
import pytest

from disorder.filter import init_filter, run_filter
from disorder.model import make_model, random_model
from disorder.oracle import enumerate_posteriors, joint_hit_prob
from disorder.solver import (
    ConvergenceError,
    GridConfig,
    StoppingPolicy,
    _continuation_operator,
    _ratio,
    immediate_stop_test,
    never_stop_policy,
    payoff_xi,
    solve,
    solve_first_stop,
    solve_second_stop,
)

from conftest import certain_model, model_zoo


def _residual(spec, second):
    cont = _continuation_operator(spec, second.grid)
    r = second.r_star[0]
    return float(np.abs(r - np.maximum(second.payoff, spec.p2 * cont(r)[None])).max())


def _decay_ratios(log, floor=1e-13):
    d = np.array([v for v in log if v > floor])
    return d[1:] / d[:-1]


def test_equal_post_and_mid_gives_unit_fixed_point():
    f = [[0.3, 0.7], [0.6, 0.4]]
    spec = make_model([[0.9, 0.1], [0.2, 0.8]], f, f, pi=0.1, rho=0.1, p1=0.8, p2=0.7)
    second = solve_second_stop(spec)
    np.testing.assert_allclose(second.r_star, 1.0, atol=1e-12)


@pytest.mark.parametrize("spec", [None] + model_zoo(41, 5, regimes=(1, 2)),
                         ids=lambda s: "tiny" if s is None else f"K{s.regime_count}")
def test_second_stop_fixed_point_and_contraction(spec, tiny):
    spec = spec or tiny
    second = solve_second_stop(spec)
    assert _residual(spec, second) <= 1e-9
    assert np.all(second.r_star[0] >= second.payoff - 1e-15)
    assert np.all(_decay_ratios(second.log) <= spec.p2 + 1e-9)


def test_first_stop_contraction(tiny):
    policy = solve(tiny)
    assert np.all(_decay_ratios(policy.iteration_log["first_stop"]) <= tiny.p1 + 1e-9)
    assert policy.iteration_log["first_stop"][-1] < 1e-9


def test_tiny_against_long_iteration(tiny):
    """Single regime: the grid is one point, so a plain loop is an exact reference."""
    E = 2
    ratio = tiny.kernel_post / tiny.kernel_mid[0]
    f1 = tiny.kernel_mid[0]
    r = np.zeros((E, E))
    for _ in range(10_000):
        r = np.maximum(ratio, tiny.p2 * (f1 * r).sum(axis=1)[None, :])
    second = solve_second_stop(tiny, tol=1e-13)
    np.testing.assert_allclose(second.r_star[0, :, :, 0], r, atol=1e-12)


def test_finite_horizon_monotone(tiny):
    policy = solve(tiny, horizon=12)
    assert np.all(np.diff(policy.v_star, axis=0) >= -1e-15)
    assert np.all(np.diff(policy.r_star, axis=0) >= -1e-15)
    stationary = solve(tiny)
    assert np.all(policy.v_star[-1] <= stationary.v_star[0] + 1e-9)


def test_first_stop_monotone_from_floor():
    spec = random_model(np.random.default_rng(5), 2, 2)
    second = solve_second_stop(spec, horizon=15)
    g, w, _ = solve_first_stop(spec, second, horizon=15)
    assert np.all(np.diff(w, axis=0) >= -1e-15)
    assert np.all(w >= g - 1e-15)


def test_p2_one_does_not_converge(tiny):
    with pytest.raises(ConvergenceError):
        solve(tiny.replace(p2=1.0, q2=0.0))


def test_payoff_xi_time_zero():
    spec = certain_model().replace(rho=0.4)
    assert payoff_xi(spec, 0, 0, init_filter(spec)) == pytest.approx(0.4)


def test_payoff_xi_zero_pair(tiny):
    s = init_filter(tiny)
    s = type(s)(2, 0, 1, s.belief, {1: np.zeros(1)})
    assert payoff_xi(tiny, 1, 2, s) == 0.0
    with pytest.raises(KeyError):
        payoff_xi(tiny, 0, 2, s)


@pytest.mark.parametrize("spec", [None] + model_zoo(43, 3, regimes=(2,)),
                         ids=lambda s: "tiny" if s is None else f"K{s.regime_count}")
def test_payoff_xi_matches_oracle(spec, tiny):
    spec = spec or tiny
    x0 = spec.initial_state
    path = (x0, 1, 1)
    states = run_filter(spec, path, prune_below=0.0)
    S = enumerate_posteriors(spec, path).normalizer
    assert payoff_xi(spec, 1, 2, states[2]) == pytest.approx(joint_hit_prob(spec, path, 1, 2) / S, abs=1e-10)
    assert payoff_xi(spec, 2, 2, states[2]) == pytest.approx(joint_hit_prob(spec, path, 2, 2) / S, abs=1e-10)


def test_immediate_stop_examples(tiny):
    spec = certain_model()
    assert immediate_stop_test(spec, solve(spec))
    assert immediate_stop_test(spec, solve(spec), printed_form=True)
    assert not immediate_stop_test(tiny, solve(tiny))
    assert not immediate_stop_test(tiny, solve(tiny), printed_form=True)


def test_never_policy_never_fires(tiny):
    pol = never_stop_policy(tiny)
    assert not pol.in_stopping_set(0, 1)
    assert not immediate_stop_test(tiny, pol)


def test_policy_json_roundtrip(rng):
    spec = random_model(rng, 3, 2)
    pol = solve(spec, GridConfig(resolution=6))
    text = json.dumps(pol.to_dict(), sort_keys=True)
    again = StoppingPolicy.from_dict(json.loads(text), spec)
    assert json.dumps(again.to_dict(), sort_keys=True) == text
    d = np.array([0.3, 0.7])
    assert again.continuation(1, d) == pol.continuation(1, d)


def test_policy_bound_to_model(tiny):
    data = solve(tiny).to_dict()
    with pytest.raises(ValueError, match="different model"):
        StoppingPolicy.from_dict(data, tiny.replace(pi=0.1))


def test_ratio_shape(rng):
    spec = random_model(rng, 3, 2)
    assert _ratio(spec).shape == (3, 3, 2)
