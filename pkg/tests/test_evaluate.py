import pytest

from disorder.evaluate import default_horizon, evaluate, wilson_interval
from disorder.solver import never_stop_policy, solve

from conftest import certain_model


def test_certain_model_estimate_one():
    spec = certain_model()
    rep = evaluate(spec, solve(spec), 1000, seed=1)
    assert rep.detection_prob_estimate == 1.0
    lo, hi = rep.wilson_ci_95
    assert hi == pytest.approx(1.0) and lo > 0.99


def test_never_policy_estimate_zero(tiny):
    rep = evaluate(tiny, never_stop_policy(tiny), 1000, seed=1, horizon=5)
    assert rep.detection_prob_estimate == 0.0 and rep.hits == 0
    assert rep.policy_value_exact == 0.0


def test_too_few_runs(tiny):
    with pytest.raises(ValueError, match="below 100"):
        evaluate(tiny, solve(tiny), 99, seed=0)


def test_tiny_bracket_and_determinism(tiny):
    pol = solve(tiny)
    rep = evaluate(tiny, pol, 10**5, seed=2024, horizon=5)
    lo, hi = rep.wilson_ci_95
    assert lo <= rep.policy_value_exact <= hi
    assert rep.policy_value_exact <= rep.oracle_value + 1e-12
    assert evaluate(tiny, pol, 10**5, seed=2024, horizon=5).to_dict() == rep.to_dict()


def test_report_invariants(tiny):
    rep = evaluate(tiny, solve(tiny), 500, seed=3)
    lo, hi = rep.wilson_ci_95
    assert 0 <= lo <= rep.detection_prob_estimate <= hi <= 1
    assert rep.horizon == default_horizon(tiny) == 84
    assert rep.oracle_value is None


@pytest.mark.parametrize("hits,n", [(0, 100), (100, 100), (37, 1000)])
def test_wilson_bounds(hits, n):
    lo, hi = wilson_interval(hits, n)
    assert 0 <= lo <= hits / n <= hi <= 1
