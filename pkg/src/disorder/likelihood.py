"""Path likelihoods and the one-step predictive weight ``H``.

Path-level quantities are accumulated in log space.  ``H`` is a mixture of
three kernels with O(1) belief coefficients and is computed directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import ModelSpec


class ZeroLikelihoodError(ArithmeticError):
    """An observation has zero predictive probability under the model."""

    def __init__(self, x: int, y: int):
        super().__init__(f"zero-likelihood transition {x} -> {y}")
        self.x = x
        self.y = y


@dataclass(frozen=True)
class BeliefVector:
    """Per-regime posteriors at time n.

    pi1[u]     = P(theta1 <= n, eps = u | F_n)
    pi2[u]     = P(theta2 <= n, eps = u | F_n)
    pi12[u]    = P(theta1 = theta2 > n, eps = u | F_n)
    upsilon[u] = P(eps = u | F_n)
    """

    pi1: np.ndarray
    pi2: np.ndarray
    pi12: np.ndarray
    upsilon: np.ndarray

    @property
    def pre_mass(self) -> np.ndarray:
        """P(theta1 > n, eps = u | F_n)."""
        return self.upsilon - self.pi1

    def as_array(self) -> np.ndarray:
        return np.stack([self.pi1, self.pi2, self.pi12, self.upsilon])

    def check(self, atol: float = 1e-10) -> None:
        a, b, g, v = self.pi1, self.pi2, self.pi12, self.upsilon
        ok = (
            np.all(b >= -atol)
            and np.all(b <= a + atol)
            and np.all(a <= v + atol)
            and np.all(g >= -atol)
            and np.all(g <= v - a + atol)
            and abs(v.sum() - 1.0) <= atol
        )
        if not ok:
            raise ValueError(f"invalid belief {self.as_array()!r}")


def _log(a) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a)


def _cumulative_logs(spec: ModelSpec, path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Prefix sums ``c[i] = sum_{r<=i} log f(x_{r-1}, x_r)`` per kernel family."""
    x = np.asarray(path, dtype=np.int64)
    prev, nxt = x[:-1], x[1:]
    pad = lambda v: np.concatenate([[0.0], np.cumsum(v, axis=-1)]) if v.ndim == 1 else (
        np.concatenate([np.zeros((v.shape[0], 1)), np.cumsum(v, axis=-1)], axis=1)
    )
    cpre = pad(_log(spec.kernel_pre[prev, nxt]))
    cmid = pad(_log(spec.kernel_mid[:, prev, nxt]))
    cpost = pad(_log(spec.kernel_post[prev, nxt]))
    return cpre, cmid, cpost


def segment_log_likelihood(spec: ModelSpec, path, split1: int, split2: int, u: int) -> float:
    """Log of the path probability when transitions into ``X_i`` use the pre
    kernel for ``i < split1``, mid regime ``u`` (1-based) for
    ``split1 <= i < split2`` and the post kernel for ``i >= split2``.
    """
    if not 0 <= split1 <= split2:
        raise ValueError("need 0 <= split1 <= split2")
    n = len(path) - 1
    cpre, cmid, cpost = _cumulative_logs(spec, path)
    a = min(max(split1 - 1, 0), n)
    b = min(max(split2 - 1, 0), n)
    with np.errstate(invalid="ignore"):
        val = cpre[a] + (cmid[u - 1, b] - cmid[u - 1, a]) + (cpost[n] - cpost[b])
    return float(_fix_nan(val))


def _fix_nan(v):
    # -inf - -inf inside a difference of prefix sums means a zero factor
    return np.where(np.isnan(v), -np.inf, v)


def segment_product_log(spec: ModelSpec, path, mid_len: int, post_len: int) -> np.ndarray:
    """Per-regime ``log L_{s,t}``: the last ``post_len`` transitions use the post
    kernel, the ``mid_len`` before them the mid kernel, the rest the pre kernel."""
    n = len(path) - 1
    cpre, cmid, cpost = _cumulative_logs(spec, path)
    a = n - mid_len - post_len
    b = n - post_len
    if a < 0:
        raise ValueError("segment lengths exceed the path")
    with np.errstate(invalid="ignore"):
        return _fix_nan(cpre[a] + (cmid[:, b] - cmid[:, a]) + (cpost[n] - cpost[b]))


CONFIGURATIONS = ("t1<=t2<=n", "t1<=n<t2", "t1=t2>n", "n<t1<t2")


def log_configuration_densities(spec: ModelSpec, path) -> np.ndarray:
    """Log joint densities of the path with each disorder configuration."""
    n = len(path) - 1
    cpre, cmid, cpost = _cumulative_logs(spec, path)
    logr = _log(spec.regime_prior)
    pi, rho, p1, q1, p2, q2 = spec.pi, spec.rho, spec.p1, spec.q1, spec.p2, spec.q2
    lg = lambda v: -np.inf if v <= 0 else np.log(v)

    def L(s: int, t: int) -> np.ndarray:
        a, b = n - s - t, n - t
        with np.errstate(invalid="ignore"):
            return _fix_nan(cpre[a] + (cmid[:, b] - cmid[:, a]) + (cpost[n] - cpost[b]))

    def mix(terms):
        if not terms:
            return -np.inf
        stacked = np.stack([w + logr + ll for w, ll in terms])
        if np.all(np.isneginf(stacked)):
            return -np.inf
        return float(logsumexp(stacked))

    both = [(lg(pi * rho), L(0, n))]
    for k in range(1, n + 1):  # theta1 = 0 < theta2 = k
        both.append((lg(pi * (1 - rho) * p2 ** (k - 1) * q2), L(k - 1, n - k + 1)))
    for j in range(1, n + 1):
        head = (1 - pi) * p1 ** (j - 1) * q1
        both.append((lg(head * rho), L(0, n - j + 1)))
        for k in range(j + 1, n + 1):
            both.append((lg(head * (1 - rho) * p2 ** (k - j - 1) * q2), L(k - j, n - k + 1)))

    first_only = [(lg(pi * (1 - rho) * p2 ** n), L(n, 0))]
    for j in range(1, n + 1):
        first_only.append(
            (lg((1 - pi) * p1 ** (j - 1) * q1 * (1 - rho) * p2 ** (n - j)), L(n - j + 1, 0))
        )

    tail = (1 - pi) * p1 ** n
    together = [(lg(tail * rho), L(0, 0))]
    neither = [(lg(tail * (1 - rho)), L(0, 0))]
    return np.array([mix(both), mix(first_only), mix(together), mix(neither)])


def configuration_densities(spec: ModelSpec, path) -> np.ndarray:
    """The four joint densities; their sum is ``S_n(path)``."""
    return np.exp(log_configuration_densities(spec, path))


def log_path_density(spec: ModelSpec, path) -> float:
    logs = log_configuration_densities(spec, path)
    if np.all(np.isneginf(logs)):
        return -np.inf
    return float(logsumexp(logs))


def regime_weights(spec: ModelSpec, belief: BeliefVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-regime coefficients of the pre, mid and post kernels in ``H``."""
    a, b, g, v = belief.pi1, belief.pi2, belief.pi12, belief.upsilon
    w_pre = (v - a) * spec.p1
    w_mid = spec.p2 * (a - b) + spec.q1 * (v - a - g)
    w_post = spec.q2 * a + spec.p2 * b + spec.q1 * g
    return w_pre, w_mid, w_post


def transition_weight_per_regime(spec: ModelSpec, x: int, y, belief: BeliefVector) -> np.ndarray:
    """``H^u(x, y)`` for every regime; ``y`` may be an index array."""
    w_pre, w_mid, w_post = regime_weights(spec, belief)
    f0 = spec.kernel_pre[x, y]
    f1 = spec.kernel_mid[:, x, y]
    f2 = spec.kernel_post[x, y]
    if np.ndim(y):
        return w_pre[:, None] * f0 + w_mid[:, None] * f1 + w_post[:, None] * f2
    return w_pre * f0 + w_mid * f1 + w_post * f2


def transition_weight(spec: ModelSpec, x: int, y: int, belief: BeliefVector) -> float:
    """One-step predictive probability of ``y`` after ``x``; 0 flags an impossible step."""
    return float(transition_weight_per_regime(spec, x, y, belief).sum())


def transition_weight_aggregate(spec: ModelSpec, x: int, y: int, belief: BeliefVector) -> float:
    """Same quantity in the form with regime-summed pre/post coefficients."""
    a, b, g = belief.pi1.sum(), belief.pi2.sum(), belief.pi12.sum()
    mid = spec.p2 * (belief.pi1 - belief.pi2) + spec.q1 * (belief.upsilon - belief.pi1 - belief.pi12)
    return float(
        (1 - a) * spec.p1 * spec.kernel_pre[x, y]
        + (spec.q2 * a + spec.p2 * b + spec.q1 * g) * spec.kernel_post[x, y]
        + mid @ spec.kernel_mid[:, x, y]
    )


def random_belief(spec: ModelSpec, rng: np.random.Generator) -> BeliefVector:
    """A valid (not necessarily reachable) belief: each regime's mass split
    over the four disorder configurations."""
    v = rng.dirichlet(np.ones(spec.regime_count))
    parts = rng.dirichlet(np.ones(4), size=spec.regime_count) * v[:, None]
    post, mid, together, neither = parts.T
    return BeliefVector(pi1=post + mid, pi2=post, pi12=together, upsilon=v)
