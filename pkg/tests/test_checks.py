import numpy as np
import pytest

from disorder.checks import IDENTITIES, expectation_identities, verify_model
from disorder.filter import run_filter, step_filter
from disorder.likelihood import transition_weight
from disorder.model import random_model
from disorder.oracle import GuardError


def test_tiny_depth_five(tiny):
    rep = verify_model(tiny, 5)
    assert rep["passed"], rep["checks"]
    assert rep["paths"] == 2 ** 6 - 1


def test_three_letters_three_regimes():
    spec = random_model(np.random.default_rng(12), 3, 3, pi=0.2, rho=0.3)
    assert verify_model(spec, 3)["passed"]


def test_depth_guard(tiny):
    with pytest.raises(GuardError):
        verify_model(tiny, 25)


@pytest.mark.parametrize("seed", range(4))
def test_identities_at_random_states(seed):
    rng = np.random.default_rng(seed)
    spec = random_model(rng, 3, 1 + seed % 3)
    obs = [spec.initial_state] + list(rng.integers(0, 3, 12))
    for state in run_filter(spec, obs):
        res = expectation_identities(spec, state)
        for k in IDENTITIES:
            assert res[k] <= 1e-10, k


def _printed_first_identity_gap(spec, state):
    """Residual of the identity in its literal form: pre mass incl. the
    together-event on the left, ``1 - pi1 - pi12`` on the right."""
    b = state.belief
    x = state.cur_obs
    worst = 0.0
    for y in range(spec.alphabet_size):
        h = transition_weight(spec, x, y, b)
        nb = step_filter(spec, state, y).belief
        lhs = h * (nb.upsilon - nb.pi1)
        rhs = (1 - b.pi1 - b.pi12) * spec.p1 * spec.kernel_pre[x, y]
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def test_printed_first_identity_needs_rho_zero_single_regime():
    rng = np.random.default_rng(1)
    simple = random_model(rng, 2, 1, rho=0.0)
    state = run_filter(simple, (simple.initial_state, 1, 0))[-1]
    assert _printed_first_identity_gap(simple, state) < 1e-12
    general = random_model(rng, 2, 2, rho=0.3)
    state = run_filter(general, (general.initial_state, 1, 0))[-1]
    assert _printed_first_identity_gap(general, state) > 1e-3
