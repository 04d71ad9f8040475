"""Sampling change points, regimes and switched trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec

# Stand-in for a change point that never occurs (geometric with q = 0).
NEVER = np.iinfo(np.int64).max // 4


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed only by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def child_seeds(seed: int, count: int) -> list[int]:
    """Independent 64-bit seeds for ``count`` trajectories derived from ``seed``."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


@dataclass(frozen=True)
class Trajectory:
    observations: tuple[int, ...]
    theta1: int
    theta2: int
    regime: int  # 1-based
    seed: int = 0

    @property
    def horizon(self) -> int:
        return len(self.observations) - 1


# uniforms consumed per trajectory before the observation steps
_HEAD = 5


def _geometric(u: np.ndarray, q: float) -> np.ndarray:
    """Inverse-CDF geometric on {1, 2, ...} with success probability ``q``."""
    if q <= 0.0:
        return np.full(u.shape, NEVER, dtype=np.int64)
    if q >= 1.0:
        return np.ones(u.shape, dtype=np.int64)
    g = np.floor(np.log1p(-u) / np.log1p(-q)) + 1
    return np.minimum(g, NEVER).astype(np.int64)


def _change_points(spec: ModelSpec, u: np.ndarray):
    theta1 = np.where(u[:, 0] < spec.pi, 0, _geometric(u[:, 1], spec.q1))
    gap = np.where(u[:, 2] < spec.rho, 0, _geometric(u[:, 3], spec.q2))
    return theta1, np.minimum(theta1 + gap, NEVER)


def _from_uniforms(spec: ModelSpec, horizon: int, u: np.ndarray):
    """Deterministic map from a ``(size, horizon + 5)`` uniform block to samples."""
    size = u.shape[0]
    theta1, theta2 = _change_points(spec, u)
    cum_r = np.cumsum(spec.regime_prior)
    cum_r[-1] = 1.0
    regime = np.minimum(np.searchsorted(cum_r, u[:, 4], side="right"), spec.regime_count - 1) + 1
    cum = np.cumsum(spec.kernels, axis=2)
    cum[..., -1] = 1.0
    obs = np.empty((size, horizon + 1), dtype=np.int64)
    obs[:, 0] = spec.initial_state
    post = spec.regime_count + 1
    for n in range(1, horizon + 1):
        # transition into X_n: pre while n < theta1, mid while n < theta2, post after
        kidx = np.where(n < theta1, 0, np.where(n < theta2, regime, post))
        rows = cum[kidx, obs[:, n - 1]]
        obs[:, n] = (u[:, _HEAD + n - 1, None] >= rows).sum(axis=1)
    return obs, theta1, theta2, regime


def sample_change_points_batch(spec: ModelSpec, rng: np.random.Generator, size: int):
    """Arrays ``(theta1, theta2)`` of length ``size``."""
    return _change_points(spec, rng.random((size, 4)))


def sample_change_points(spec: ModelSpec, rng: np.random.Generator) -> tuple[int, int]:
    t1, t2 = sample_change_points_batch(spec, rng, 1)
    return int(t1[0]), int(t2[0])


def sample_batch(spec: ModelSpec, horizon: int, rng: np.random.Generator, size: int):
    """Vectorised sampler.

    Returns ``(obs, theta1, theta2, regime)`` with ``obs`` of shape
    ``(size, horizon + 1)`` and ``regime`` 1-based.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    return _from_uniforms(spec, horizon, rng.random((size, horizon + _HEAD)))


def _trajectories(obs, t1, t2, reg, seeds) -> list[Trajectory]:
    return [
        Trajectory(tuple(int(v) for v in obs[i]), int(t1[i]), int(t2[i]), int(reg[i]), int(seeds[i]))
        for i in range(len(seeds))
    ]


def sample_trajectory(spec: ModelSpec, horizon: int, rng: np.random.Generator, seed: int = 0) -> Trajectory:
    return _trajectories(*sample_batch(spec, horizon, rng, 1), [seed])[0]


def simulate_many(spec: ModelSpec, horizon: int, count: int, seed: int) -> list[Trajectory]:
    """One independent stream per trajectory, so each row replays from its own seed."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    seeds = child_seeds(seed, count)
    u = np.empty((count, horizon + _HEAD))
    for i, s in enumerate(seeds):
        u[i] = make_rng(s).random(horizon + _HEAD)
    return _trajectories(*_from_uniforms(spec, horizon, u), seeds)


def transition_log_prob(spec: ModelSpec, traj: Trajectory) -> float:
    """Log-probability of the realised path given its own ground truth."""
    kernels = spec.kernels
    post = spec.regime_count + 1
    total = 0.0
    x = traj.observations
    for n in range(1, len(x)):
        if n < traj.theta1:
            k = 0
        elif n < traj.theta2:
            k = traj.regime
        else:
            k = post
        total += np.log(kernels[k, x[n - 1], x[n]])
    return float(total)
