"""Double optimal stopping solution for P(tau = theta1, sigma = theta2).

Second stop.  After committing ``tau = m`` the pair posterior
``P(theta1 = m, theta2 > n, eps | F_n)`` evolves multiplicatively, so the
inner value is homogeneous of degree one in it and depends on the previous
and current observations ``(t, u)`` and the direction ``d`` of the pair
posterior on the regime simplex.  ``r(t, u, d)`` solves

    r(t, u, d) = max{ <d, f2_t(u) / f1_t(u)>, p2 * Rt(u, d) },
    Rt(u, d)   = sum_s <d, f1_u(s)> r(u, s, d o f1_u(s) / <d, f1_u(s)>).

First stop.  ``P(theta1 > m, eps | F_m)`` always points along the regime
prior, so the first-stop value is ``P(theta1 > m | F_m) * w(t, u)`` with

    w(t, u) = max{ g(t, u), p1 * sum_s f0_u(s) w(u, s) },
    g(t, u) = (q1 / p1) <r, f1_t(u)> / f0_t(u) * Rrho(t, u, d0(t, u)),
    Rrho(t, u, d) = max{ rho <d, f2_t(u)/f1_t(u)>, q2 (1 - rho) Rt(u, d) }.

With a finite ``horizon`` every table carries a leading stage axis indexed by
the number of steps remaining, giving the exact finite-horizon rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filter import FilterState
from .model import ModelError, ModelSpec
from .simplex import SimplexGrid, normalize_rows

POLICY_FORMAT_VERSION = 1
DEFAULT_TOL = 1e-9
DEFAULT_RESOLUTION = 20


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, iteration_log=None):
        super().__init__(msg)
        self.iteration_log = iteration_log or []


@dataclass(frozen=True)
class GridConfig:
    resolution: int = DEFAULT_RESOLUTION  # points per regime axis minus one
    interpolation: str = "freudenthal"


def _ratio(spec: ModelSpec) -> np.ndarray:
    """``f2_t(u) / f1^k_t(u)`` as an (E, E, K) array; 0 where the step is impossible."""
    f1 = np.moveaxis(spec.kernel_mid, 0, -1)
    f2 = spec.kernel_post[..., None]
    return np.divide(f2, f1, out=np.zeros_like(f1), where=f1 > 0)


def payoff_xi(spec: ModelSpec, m: int, n: int, state: FilterState) -> float:
    """P(theta1 = m, theta2 = n | F_n) from the filter state at time ``n``."""
    if state.time != n or m > n:
        raise ValueError("state must be at time n and m <= n")
    t, u = state.prev_obs, state.cur_obs
    if m == n:
        if n == 0:
            return spec.pi * spec.rho
        f0 = spec.kernel_pre[t, u]
        if f0 == 0:
            return 0.0
        pre = 1.0 - state.belief.pi1.sum()
        return spec.rho * spec.q1 / spec.p1 * spec.kernel_post[t, u] / f0 * pre
    if m not in state.pair_beliefs:
        raise KeyError(f"no pair posterior for spawn time {m}")
    if spec.p2 == 0:
        raise ValueError("p2 = 0 leaves no pair posterior beyond the spawn time")
    return spec.q2 / spec.p2 * float(state.pair_beliefs[m] @ _ratio(spec)[t, u])


@dataclass
class StoppingPolicy:
    """Solved tables.  Leading axis of every table is the stage (steps
    remaining); a stationary policy has a single stage."""

    spec_digest: str
    alphabet_size: int
    regime_count: int
    grid_meta: dict
    horizon: int | None
    r_star: np.ndarray  # (S, E, E, G)
    R_tilde: np.ndarray  # (S, E, G) continuation sums without the p2 factor
    R_rho_star: np.ndarray  # (S, E, E, G)
    first_payoff: np.ndarray  # (S, E, E)  g
    v_star: np.ndarray  # (S, E, E)  w, first-stop value per unit of P(theta1 > n)
    iteration_log: dict = field(default_factory=dict)
    kind: str = "threshold"
    _spec: ModelSpec | None = field(default=None, repr=False, compare=False)
    _grid: SimplexGrid | None = field(default=None, repr=False, compare=False)

    # -- plumbing ---------------------------------------------------------
    def bind(self, spec: ModelSpec) -> "StoppingPolicy":
        if spec.digest() != self.spec_digest:
            raise ValueError("policy was solved for a different model")
        self._spec = spec
        self._grid = SimplexGrid(spec.regime_count, self.grid_meta["resolution"])
        return self

    @property
    def spec(self) -> ModelSpec:
        if self._spec is None:
            raise RuntimeError("policy not bound to a model")
        return self._spec

    @property
    def R_star(self) -> np.ndarray:
        return self.spec.p2 * self.R_tilde

    def stage(self, remaining: int | None) -> int:
        if self.horizon is None or remaining is None:
            return 0
        return int(min(max(remaining, 0), self.horizon))

    def _prev(self, k: int) -> int | None:
        """Stage whose r-table feeds the continuation at stage ``k``."""
        if self.horizon is None:
            return 0
        return k - 1 if k > 0 else None

    # -- second stop ------------------------------------------------------
    def continuation(self, u: int, d, remaining: int | None = None) -> float:
        """``Rt(u, d)`` with ``remaining`` steps left (exact formula, interpolated r)."""
        prev = self._prev(self.stage(remaining))
        if prev is None:
            return 0.0
        spec = self.spec
        d = np.asarray(d, dtype=float)
        weighted = d[None, :] * spec.kernel_mid[:, u, :].T  # (E, K)
        dirs, mass = normalize_rows(weighted)
        vals = np.array([
            self._grid.interpolate(self.r_star[prev, u, s], dirs[s])[0] for s in range(spec.alphabet_size)
        ])
        return float(mass @ vals)

    def second_statistic(self, t: int, u: int, d) -> float:
        return float(np.asarray(d, dtype=float) @ _ratio(self.spec)[t, u])

    def second_threshold(self, u: int, d, remaining: int | None = None) -> float:
        if self.kind == "never":
            return math.inf
        return self.spec.p2 * self.continuation(u, d, remaining)

    def stop_second_now(self, t: int, u: int, d, remaining: int | None = None) -> bool:
        """Second stop at ``n > m``: statistic at or above threshold."""
        return self.second_statistic(t, u, d) >= self.second_threshold(u, d, remaining)

    def stop_second_at_first(self, t: int, u: int, d, remaining: int | None = None) -> bool:
        """Whether to stop twice at the same time ``m >= 1``."""
        if self.kind == "never":
            return False
        spec = self.spec
        return spec.rho * self.second_statistic(t, u, d) >= spec.q2 * (1 - spec.rho) * self.continuation(u, d, remaining)

    # -- first stop -------------------------------------------------------
    def first_direction(self, t: int, u: int) -> np.ndarray:
        d, _ = normalize_rows(self.spec.regime_prior * self.spec.kernel_mid[:, t, u])
        return d

    def first_statistic(self, t: int, u: int, remaining: int | None = None) -> float:
        return float(self.first_payoff[self.stage(remaining), t, u])

    def first_continuation(self, u: int, remaining: int | None = None) -> float:
        k = self.stage(remaining)
        prev = self._prev(k)
        if self.kind == "never":
            return math.inf
        if prev is None:
            return -math.inf
        spec = self.spec
        return spec.p1 * float(spec.kernel_pre[u] @ self.v_star[prev, u])

    def in_stopping_set(self, t: int, u: int, remaining: int | None = None) -> bool:
        return self.first_statistic(t, u, remaining) >= self.first_continuation(u, remaining)

    def first_stop_value(self, t: int, u: int, pre_mass: float, remaining: int | None = None) -> float:
        """Value of the first-stop problem at belief with ``P(theta1 > n | F_n) = pre_mass``."""
        return pre_mass * float(self.v_star[self.stage(remaining), t, u])

    # -- time zero --------------------------------------------------------
    def initial_values(self, remaining: int | None = None) -> dict:
        """Stop-now and continue values at time 0 (joint scale)."""
        spec = self.spec
        x0 = spec.initial_state
        both_now = spec.pi * spec.rho
        later = spec.q2 * spec.pi * (1 - spec.rho) * self.continuation(x0, spec.regime_prior, remaining)
        stop_first = max(both_now, later)
        cont = (1 - spec.pi) * self.first_continuation(x0, remaining) if spec.pi < 1 else 0.0
        if self.kind == "never":
            cont, stop_first = math.inf, -math.inf
        return {"both_now": both_now, "second_later": later, "first_now": stop_first, "continue": cont}

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format_version": POLICY_FORMAT_VERSION,
            "kind": self.kind,
            "spec_digest": self.spec_digest,
            "alphabet_size": self.alphabet_size,
            "regime_count": self.regime_count,
            "grid_meta": self.grid_meta,
            "horizon": self.horizon,
            "r_star": self.r_star.tolist(),
            "R_tilde": self.R_tilde.tolist(),
            "R_rho_star": self.R_rho_star.tolist(),
            "first_payoff": self.first_payoff.tolist(),
            "v_star": self.v_star.tolist(),
            "iteration_log": self.iteration_log,
        }

    @classmethod
    def from_dict(cls, data: dict, spec: ModelSpec | None = None) -> "StoppingPolicy":
        if data.get("format_version") != POLICY_FORMAT_VERSION:
            raise ValueError(f"unsupported policy format {data.get('format_version')!r}")
        pol = cls(
            spec_digest=data["spec_digest"],
            alphabet_size=int(data["alphabet_size"]),
            regime_count=int(data["regime_count"]),
            grid_meta=dict(data["grid_meta"]),
            horizon=data["horizon"],
            r_star=np.array(data["r_star"], dtype=float),
            R_tilde=np.array(data["R_tilde"], dtype=float),
            R_rho_star=np.array(data["R_rho_star"], dtype=float),
            first_payoff=np.array(data["first_payoff"], dtype=float),
            v_star=np.array(data["v_star"], dtype=float),
            iteration_log=data.get("iteration_log", {}),
            kind=data.get("kind", "threshold"),
        )
        return pol.bind(spec) if spec is not None else pol


def _max_sweeps(tol: float, factor: float, scale: float) -> int:
    return int(math.ceil(math.log(tol / max(scale, 1.0)) / math.log(factor))) + 100


@dataclass
class SecondStopTables:
    grid: SimplexGrid
    r_star: np.ndarray
    R_tilde: np.ndarray
    R_rho_star: np.ndarray
    payoff: np.ndarray
    log: list


def _continuation_operator(spec: ModelSpec, grid: SimplexGrid):
    """Returns ``Rt(r)`` as a function of an (E, E, G) r-table."""
    E = spec.alphabet_size
    pts = grid.points
    mats = {}
    masses = np.empty((E, E, len(grid)))
    for u in range(E):
        for s in range(E):
            dirs, mass = normalize_rows(pts * spec.kernel_mid[:, u, s][None, :])
            masses[u, s] = mass
            mats[u, s] = grid.matrix(dirs)

    def apply(r: np.ndarray) -> np.ndarray:
        out = np.zeros((E, len(grid)))
        for u in range(E):
            for s in range(E):
                out[u] += masses[u, s] * (mats[u, s] @ r[u, s])
        return out

    return apply


def solve_second_stop(
    spec: ModelSpec,
    grid: GridConfig = GridConfig(),
    tol: float = DEFAULT_TOL,
    horizon: int | None = None,
    max_sweeps: int | None = None,
) -> SecondStopTables:
    sg = SimplexGrid(spec.regime_count, grid.resolution)
    payoff = np.einsum("gk,tuk->tug", sg.points, _ratio(spec))
    cont_op = _continuation_operator(spec, sg)
    p2 = spec.p2

    def rho_table(Rt):
        return np.maximum(spec.rho * payoff, spec.q2 * (1 - spec.rho) * Rt[None, :, :])

    if horizon is not None:
        rs = [payoff]
        Rts = [np.zeros((spec.alphabet_size, len(sg)))]
        log = []
        for _ in range(horizon):
            Rt = cont_op(rs[-1])
            r_new = np.maximum(payoff, p2 * Rt[None, :, :])
            log.append(float(np.abs(r_new - rs[-1]).max()))
            rs.append(r_new)
            Rts.append(Rt)
        Rts = np.stack(Rts)
        return SecondStopTables(sg, np.stack(rs), Rts, np.stack([rho_table(R) for R in Rts]), payoff, log)

    if p2 >= 1.0:
        raise ConvergenceError("second-stop iteration does not contract (p2 = 1)")
    limit = max_sweeps or _max_sweeps(tol, p2, float(payoff.max()))
    r = payoff.copy()
    log = []
    for _ in range(limit):
        r_new = np.maximum(payoff, p2 * cont_op(r)[None, :, :])
        delta = float(np.abs(r_new - r).max())
        log.append(delta)
        r = r_new
        if delta < tol:
            break
    else:
        raise ConvergenceError(f"second-stop iteration not converged after {limit} sweeps", log)
    Rt = cont_op(r)
    return SecondStopTables(sg, r[None], Rt[None], rho_table(Rt)[None], payoff, log)


def _first_payoff_scale(spec: ModelSpec) -> np.ndarray:
    """``(q1/p1) <r, f1_t(u)> / f0_t(u)`` as an (E, E) array."""
    mix = np.einsum("k,ktu->tu", spec.regime_prior, spec.kernel_mid)
    f0 = spec.kernel_pre
    ratio = np.divide(mix, f0, out=np.zeros_like(mix), where=f0 > 0)
    return spec.q1 / spec.p1 * ratio


def solve_first_stop(
    spec: ModelSpec,
    second: SecondStopTables,
    tol: float = DEFAULT_TOL,
    horizon: int | None = None,
    max_sweeps: int | None = None,
) -> tuple[np.ndarray, np.ndarray, list]:
    """Returns ``(g, w, log)`` with a leading stage axis."""
    if spec.p1 <= 0.0:
        raise ModelError("first-stop solution needs p1 > 0")
    if second.r_star.shape[0] != (1 if horizon is None else horizon + 1):
        raise ValueError("second-stop tables were solved for a different horizon")
    E = spec.alphabet_size
    sg = second.grid
    scale = _first_payoff_scale(spec)
    ratio = _ratio(spec)
    f0 = spec.kernel_pre

    def g_at(stage: int) -> np.ndarray:
        g = np.empty((E, E))
        prev = stage - 1 if horizon is not None else 0
        r_prev = None if (horizon is not None and stage == 0) else second.r_star[prev]
        for t in range(E):
            for u in range(E):
                d, _ = normalize_rows(spec.regime_prior * spec.kernel_mid[:, t, u])
                stat = float(d @ ratio[t, u])
                if r_prev is None:
                    Rt = 0.0
                else:
                    w_d = d[None, :] * spec.kernel_mid[:, u, :].T
                    dirs, mass = normalize_rows(w_d)
                    Rt = float(sum(mass[s] * sg.interpolate(r_prev[u, s], dirs[s])[0] for s in range(E)))
                g[t, u] = scale[t, u] * max(spec.rho * stat, spec.q2 * (1 - spec.rho) * Rt)
        return g

    def cont(w: np.ndarray) -> np.ndarray:
        # p1 * sum_s f0_u(s) w(u, s), broadcast over t
        return np.broadcast_to(spec.p1 * np.einsum("us,us->u", f0, w)[None, :], (E, E))

    if horizon is not None:
        gs = [g_at(k) for k in range(horizon + 1)]
        ws = [gs[0]]
        log = []
        for k in range(1, horizon + 1):
            w_new = np.maximum(gs[k], cont(ws[-1]))
            log.append(float(np.abs(w_new - ws[-1]).max()))
            ws.append(w_new)
        return np.stack(gs), np.stack(ws), log

    if spec.p1 >= 1.0:
        raise ConvergenceError("first-stop iteration does not contract (p1 = 1)")
    g = g_at(0)
    limit = max_sweeps or _max_sweeps(tol, spec.p1, float(g.max()))
    w = g.copy()
    log = []
    for _ in range(limit):
        w_new = np.maximum(g, cont(w))
        delta = float(np.abs(w_new - w).max())
        log.append(delta)
        w = w_new
        if delta < tol:
            break
    else:
        raise ConvergenceError(f"first-stop iteration not converged after {limit} sweeps", log)
    return g[None], w[None], log


def solve(
    spec: ModelSpec,
    grid: GridConfig = GridConfig(),
    tol: float = DEFAULT_TOL,
    horizon: int | None = None,
) -> StoppingPolicy:
    """Solve both stopping problems; ``horizon=None`` gives the stationary rule."""
    second = solve_second_stop(spec, grid, tol, horizon)
    g, w, first_log = solve_first_stop(spec, second, tol, horizon)
    policy = StoppingPolicy(
        spec_digest=spec.digest(),
        alphabet_size=spec.alphabet_size,
        regime_count=spec.regime_count,
        grid_meta={
            "resolution": second.grid.resolution,
            "interpolation": grid.interpolation if spec.regime_count > 1 else "exact",
            "points": len(second.grid),
            "tol": tol,
        },
        horizon=horizon,
        r_star=second.r_star,
        R_tilde=second.R_tilde,
        R_rho_star=second.R_rho_star,
        first_payoff=g,
        v_star=w,
        iteration_log={"second_stop": second.log, "first_stop": first_log},
    )
    return policy.bind(spec)


def never_stop_policy(spec: ModelSpec) -> StoppingPolicy:
    """Stub whose first stop never fires."""
    E = spec.alphabet_size
    G = len(SimplexGrid(spec.regime_count, 1))
    policy = StoppingPolicy(
        spec_digest=spec.digest(),
        alphabet_size=E,
        regime_count=spec.regime_count,
        grid_meta={"resolution": 1, "interpolation": "none", "points": G, "tol": 0.0},
        horizon=None,
        r_star=np.zeros((1, E, E, G)),
        R_tilde=np.zeros((1, E, G)),
        R_rho_star=np.zeros((1, E, E, G)),
        first_payoff=np.zeros((1, E, E)),
        v_star=np.zeros((1, E, E)),
        kind="never",
    )
    return policy.bind(spec)


def immediate_stop_test(spec: ModelSpec, policy: StoppingPolicy, *, remaining: int | None = None,
                        printed_form: bool = False) -> bool:
    """Whether stopping both times at 0 is optimal.

    ``printed_form`` compares ``pi * rho`` only against the value of a first
    stop at time 1; the default compares against every alternative.
    """
    lhs = spec.pi * spec.rho
    if lhs <= 0:
        return False
    if printed_form:
        x = spec.initial_state
        rhs = 0.0
        k = policy.stage(None if remaining is None else remaining - 1)
        for y in range(spec.alphabet_size):
            mix = float(spec.regime_prior @ spec.kernel_mid[:, x, y])
            d = policy.first_direction(x, y)
            stat = policy.second_statistic(x, y, d)
            rrho = max(spec.rho * stat, spec.q2 * (1 - spec.rho) * policy.continuation(y, d, k))
            rhs += spec.q1 * (1 - spec.pi) * mix * rrho
        return lhs >= rhs
    vals = policy.initial_values(remaining)
    return lhs >= vals["second_later"] and lhs >= vals["continue"]
