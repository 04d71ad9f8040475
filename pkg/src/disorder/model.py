"""Probabilistic model of a Markov sequence with two ordered change points.

The observed chain lives on a finite alphabet ``{0, ..., E-1}``.  Transitions
into ``X_n`` follow ``kernel_pre`` while ``n < theta1``, ``kernel_mid[eps]``
while ``theta1 <= n < theta2`` and ``kernel_post`` once ``theta2 <= n``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

PROB_TOL = 1e-12


class ModelError(ValueError):
    """A model violates one of its structural assumptions."""


class ModelFormatError(ModelError):
    """A model document is missing fields or has malformed values."""


@dataclass(frozen=True, eq=False)
class ModelSpec:
    alphabet_size: int
    regime_count: int
    kernel_pre: np.ndarray
    kernel_mid: np.ndarray  # shape (K, E, E)
    kernel_post: np.ndarray
    pi: float
    rho: float
    p1: float
    q1: float
    p2: float
    q2: float
    regime_prior: np.ndarray
    initial_state: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for attr in ("kernel_pre", "kernel_mid", "kernel_post", "regime_prior"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        for attr in ("pi", "rho", "p1", "q1", "p2", "q2"):
            object.__setattr__(self, attr, float(getattr(self, attr)))
        object.__setattr__(self, "alphabet_size", int(self.alphabet_size))
        object.__setattr__(self, "regime_count", int(self.regime_count))
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def kernels(self) -> np.ndarray:
        """All kernels stacked as ``(pre, mid_1, ..., mid_K, post)``."""
        return np.concatenate(
            [self.kernel_pre[None], self.kernel_mid, self.kernel_post[None]]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "alphabet_size": self.alphabet_size,
            "regime_count": self.regime_count,
            "kernel_pre": self.kernel_pre.tolist(),
            "kernel_mid": self.kernel_mid.tolist(),
            "kernel_post": self.kernel_post.tolist(),
            "pi": self.pi,
            "rho": self.rho,
            "p1": self.p1,
            "q1": self.q1,
            "p2": self.p2,
            "q2": self.q2,
            "regime_prior": self.regime_prior.tolist(),
            "initial_state": self.initial_state,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def __eq__(self, other) -> bool:
        return isinstance(other, ModelSpec) and self.digest() == other.digest()

    def __hash__(self) -> int:
        return hash(self.digest())

    def replace(self, **changes) -> "ModelSpec":
        data = self.to_dict()
        data.update(changes)
        return ModelSpec(**data)


def make_model(
    kernel_pre,
    kernel_mid,
    kernel_post,
    *,
    pi: float,
    rho: float,
    p1: float,
    p2: float,
    regime_prior=None,
    initial_state: int = 0,
) -> ModelSpec:
    """Convenience constructor; ``kernel_mid`` may be one matrix or a stack."""
    mid = np.asarray(kernel_mid, dtype=float)
    if mid.ndim == 2:
        mid = mid[None]
    k = mid.shape[0]
    if regime_prior is None:
        regime_prior = np.full(k, 1.0 / k)
    pre = np.asarray(kernel_pre, dtype=float)
    return ModelSpec(
        alphabet_size=pre.shape[0],
        regime_count=k,
        kernel_pre=pre,
        kernel_mid=mid,
        kernel_post=np.asarray(kernel_post, dtype=float),
        pi=pi,
        rho=rho,
        p1=p1,
        q1=1.0 - p1,
        p2=p2,
        q2=1.0 - p2,
        regime_prior=regime_prior,
        initial_state=initial_state,
    )


def tiny_model() -> ModelSpec:
    """Two-letter, single-regime reference model used across the test suite."""
    return make_model(
        [[0.9, 0.1], [0.1, 0.9]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.1, 0.9], [0.9, 0.1]],
        pi=0.0,
        rho=0.0,
        p1=0.8,
        p2=0.7,
    )


def random_model(
    rng: np.random.Generator,
    alphabet_size: int = 2,
    regime_count: int = 1,
    *,
    pi: float | None = None,
    rho: float | None = None,
) -> ModelSpec:
    """Draw a model with strictly positive kernels (density ratios finite)."""
    e, k = alphabet_size, regime_count

    def kernel():
        return rng.dirichlet(np.full(e, 1.5), size=e) * 0.96 + 0.04 / e

    return make_model(
        kernel(),
        np.stack([kernel() for _ in range(k)]),
        kernel(),
        pi=float(rng.uniform(0.0, 0.4)) if pi is None else pi,
        rho=float(rng.uniform(0.0, 0.4)) if rho is None else rho,
        p1=float(rng.uniform(0.5, 0.9)),
        p2=float(rng.uniform(0.4, 0.85)),
        regime_prior=rng.dirichlet(np.full(k, 2.0)),
        initial_state=int(rng.integers(e)),
    )


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or not np.isfinite(value):
        raise ModelError(f"{name}={value} is not a probability")


def _check_kernel(name: str, kernel: np.ndarray, e: int) -> None:
    if kernel.shape != (e, e):
        raise ModelError(f"{name} has shape {kernel.shape}, expected {(e, e)}")
    if not np.all(np.isfinite(kernel)) or np.any(kernel < 0):
        i, j = np.argwhere(~(kernel >= 0))[0]
        raise ModelError(f"{name}[{i}][{j}] is negative or not finite")
    sums = kernel.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
    if bad.size:
        raise ModelError(f"{name} row {bad[0]} not stochastic (sums to {sums[bad[0]]!r})")


def validate_model(spec: ModelSpec) -> ModelSpec:
    """Return ``spec`` unchanged, or raise :class:`ModelError` at the first violation."""
    e, k = spec.alphabet_size, spec.regime_count
    if e < 1:
        raise ModelError("alphabet_size must be positive")
    if k < 1:
        raise ModelError("regime_count must be positive")
    _check_kernel("kernel_pre", spec.kernel_pre, e)
    if spec.kernel_mid.shape != (k, e, e):
        raise ModelError(
            f"kernel_mid has shape {spec.kernel_mid.shape}, expected {(k, e, e)}"
        )
    for u in range(k):
        _check_kernel(f"kernel_mid[{u}]", spec.kernel_mid[u], e)
    _check_kernel("kernel_post", spec.kernel_post, e)

    for name in ("pi", "rho", "p1", "q1", "p2", "q2"):
        _check_prob(name, getattr(spec, name))
    if abs(spec.p1 + spec.q1 - 1.0) > PROB_TOL:
        raise ModelError("p1 + q1 must equal 1")
    if abs(spec.p2 + spec.q2 - 1.0) > PROB_TOL:
        raise ModelError("p2 + q2 must equal 1")

    r = spec.regime_prior
    if r.shape != (k,):
        raise ModelError(f"regime_prior has shape {r.shape}, expected {(k,)}")
    if np.any(r < 0) or abs(r.sum() - 1.0) > PROB_TOL:
        raise ModelError("regime_prior is not a probability vector")
    if not 0 <= spec.initial_state < e:
        raise ModelError(f"initial_state {spec.initial_state} outside alphabet")

    positive = spec.kernels > 0
    any_pos = positive.any(axis=0)
    broken = any_pos & ~positive.all(axis=0)
    if broken.any():
        x, y = np.argwhere(broken)[0]
        raise ModelError(f"density-ratio assumption broken at transition ({x}, {y})")
    return spec


def prior_theta1_pmf(spec: ModelSpec, j: int) -> float:
    if j < 0:
        raise ValueError("theta1 is nonnegative")
    if j == 0:
        return spec.pi
    return (1.0 - spec.pi) * spec.p1 ** (j - 1) * spec.q1


def prior_theta2_given_theta1_pmf(spec: ModelSpec, j: int, k: int) -> float:
    if k < j:
        raise ValueError(f"theta2={k} precedes theta1={j}")
    if k == j:
        return spec.rho
    return (1.0 - spec.rho) * spec.p2 ** (k - j - 1) * spec.q2


def regime_prior_pmf(spec: ModelSpec, u: int) -> float:
    """Prior mass of mid-segment regime ``u`` (1-based)."""
    if not 1 <= u <= spec.regime_count:
        raise IndexError(f"regime {u} outside 1..{spec.regime_count}")
    return float(spec.regime_prior[u - 1])


def prior_theta2_mean(spec: ModelSpec) -> float:
    """Prior mean of ``theta2`` (infinite when a geometric never fires)."""
    m1 = (1.0 - spec.pi) / spec.q1 if spec.q1 > 0 else (0.0 if spec.pi == 1 else np.inf)
    m2 = (1.0 - spec.rho) / spec.q2 if spec.q2 > 0 else (0.0 if spec.rho == 1 else np.inf)
    return m1 + m2


def model_from_dict(data: dict[str, Any]) -> ModelSpec:
    """Build a spec from its JSON form; fields must match :class:`ModelSpec`."""
    known = set(ModelSpec.__dataclass_fields__) - {"name"}
    missing = {"kernel_pre", "kernel_mid", "kernel_post", "pi", "rho", "p1", "p2"} - set(data)
    if missing:
        raise ModelFormatError(f"missing field(s): {', '.join(sorted(missing))}")
    extra = set(data) - known
    if extra:
        raise ModelFormatError(f"unknown field(s): {', '.join(sorted(extra))}")
    for name in ("kernel_pre", "kernel_mid", "kernel_post"):
        try:
            np.array(data[name], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(f"field {name}: ragged or non-numeric kernel ({exc})") from None
    mid = np.array(data["kernel_mid"], dtype=float)
    if mid.ndim == 2:
        mid = mid[None]
    pre = np.array(data["kernel_pre"], dtype=float)
    if pre.ndim != 2:
        raise ModelFormatError("field kernel_pre: expected a square matrix")
    k = mid.shape[0]
    p1, p2 = float(data["p1"]), float(data["p2"])
    spec = ModelSpec(
        alphabet_size=int(data.get("alphabet_size", pre.shape[0])),
        regime_count=int(data.get("regime_count", k)),
        kernel_pre=pre,
        kernel_mid=mid,
        kernel_post=np.array(data["kernel_post"], dtype=float),
        pi=float(data["pi"]),
        rho=float(data["rho"]),
        p1=p1,
        q1=float(data.get("q1", 1.0 - p1)),
        p2=p2,
        q2=float(data.get("q2", 1.0 - p2)),
        regime_prior=np.array(data.get("regime_prior", np.full(k, 1.0 / k)), dtype=float),
        initial_state=int(data.get("initial_state", 0)),
    )
    return validate_model(spec)
