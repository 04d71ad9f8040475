import numpy as np
import pytest

from disorder.model import make_model, random_model, tiny_model


@pytest.fixture
def tiny():
    return tiny_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def flat_model(pi=0.3, rho=0.2, p1=0.7, p2=0.6, regimes=1):
    f = [[0.6, 0.4], [0.25, 0.75]]
    return make_model(f, np.stack([f] * regimes), f, pi=pi, rho=rho, p1=p1, p2=p2)


def certain_model():
    """Both change points at time 0 surely."""
    return make_model(
        [[0.9, 0.1], [0.1, 0.9]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.1, 0.9], [0.9, 0.1]],
        pi=1.0, rho=1.0, p1=0.8, p2=0.7,
    )


def model_zoo(seed=7, count=5, regimes=(1, 2)):
    rng = np.random.default_rng(seed)
    return [random_model(rng, 2, regimes[i % len(regimes)]) for i in range(count)]
