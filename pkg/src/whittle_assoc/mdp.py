"""Average-cost and discounted solvers for the single-mBS admission MDP.

For a tax ``lam`` charged whenever the mBS rejects an arrival, the
per-slot cost in state ``x`` under action ``mu`` is ``C*x + (1-mu)*lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .chain import ThresholdPolicy, build_dtmc, passive_mass, stationary_distribution
from .errors import (InvalidArgumentError, NonConvergenceError,
                     NumericalFailureError, StructuralViolationError)
from .model import SystemConfig, transition_kernel

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ValueSolution:
    """Relative values ``V`` (``V[0] == 0``) and average cost ``rho``."""

    V: np.ndarray = field(repr=False)
    rho: float
    lam: float
    policy: ThresholdPolicy
    actions: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0


@dataclass(frozen=True)
class OracleConfig:
    beta: float = 0.9
    horizon_steps: int = 10
    tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise InvalidArgumentError(f"beta must lie in [0, 1), got {self.beta}")
        if self.horizon_steps < 0:
            raise InvalidArgumentError("horizon_steps must be >= 0")


def _holding(cfg: SystemConfig, mbs_index: int) -> np.ndarray:
    return cfg.mbs[mbs_index].holding_cost * np.arange(cfg.buffer + 1, dtype=float)


class RelativeValueSystem:
    """The threshold-policy linear system, factored once for all taxes.

    Unknowns are ``V(1..B)`` and ``rho``; ``V(0) = 0`` is substituted.  The
    right-hand side is affine in the tax, so ``V_lam = U + lam * W`` with
    ``U``, ``W`` the solutions for the holding-cost and tax-indicator
    right-hand sides.
    """

    def __init__(self, policy: ThresholdPolicy, cfg: SystemConfig, mbs_index: int):
        if cfg.buffer < 1:
            raise InvalidArgumentError("buffer >= 1 required")
        self.policy = policy
        self.P = build_dtmc(policy, cfg, mbs_index)
        n = self.P.shape[0]
        self.holding = _holding(cfg, mbs_index)
        self.taxed = (~policy.accepts(n)).astype(float)
        A = np.eye(n) - self.P
        A[:, 0] = 1.0  # column of V(0) == 0 now carries rho
        self._A = A
        try:
            self._lu = scipy.linalg.lu_factor(A, check_finite=True)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailureError(
                f"singular relative-value system for threshold {policy.threshold}",
                context={"threshold": policy.threshold}) from exc
        sol = scipy.linalg.lu_solve(self._lu, np.column_stack([self.holding, self.taxed]))
        if not np.all(np.isfinite(sol)):
            raise NumericalFailureError(
                f"singular relative-value system for threshold {policy.threshold}",
                context={"threshold": policy.threshold})
        self.U, self.W = self._unpack(sol[:, 0]), self._unpack(sol[:, 1])
        self.rho_U, self.rho_W = float(sol[0, 0]), float(sol[0, 1])

    @staticmethod
    def _unpack(z):
        V = z.copy()
        V[0] = 0.0
        return V

    def values(self, lam: float) -> tuple[np.ndarray, float]:
        rhs = self.holding + lam * self.taxed
        z = scipy.linalg.lu_solve(self._lu, rhs)
        return self._unpack(z), float(z[0])

    def residual(self, V, rho, lam) -> float:
        c = self.holding + lam * self.taxed
        return float(np.abs(V + rho - c - self.P @ V).max())


@lru_cache(maxsize=128)
def relative_value_system(policy: ThresholdPolicy, cfg: SystemConfig,
                          mbs_index: int) -> RelativeValueSystem:
    return RelativeValueSystem(policy, cfg, mbs_index)


def solve_relative_values(policy: ThresholdPolicy, lam: float, cfg: SystemConfig,
                          mbs_index: int) -> ValueSolution:
    """Relative values and average cost of a fixed threshold policy.

    Solves ``V(y) = C*y + lam*[y > t] - rho + sum_z P(z|y) V(z)`` with
    ``V(0) = 0``.

    Raises
    ------
    NumericalFailureError
        If the system is singular or the residual exceeds ``1e-9`` (scaled
        by the magnitude of the values).
    """
    system = relative_value_system(policy, cfg, mbs_index)
    V, rho = system.values(lam)
    res = system.residual(V, rho, lam)
    scale = max(1.0, float(np.abs(V).max()), abs(rho), abs(lam))
    if not np.isfinite(res) or res > RESIDUAL_TOL * scale:
        raise NumericalFailureError(
            f"relative-value residual {res:.3e} for threshold {policy.threshold}",
            residual=res, context={"threshold": policy.threshold, "lam": lam})
    return ValueSolution(V=V, rho=rho, lam=float(lam), policy=policy)


def average_cost(policy: ThresholdPolicy, lam: float, cfg: SystemConfig,
                 mbs_index: int) -> float:
    """Stationary cost ``C * E[X] + lam * P(reject)`` of a threshold policy."""
    pi = stationary_distribution(build_dtmc(policy, cfg, mbs_index))
    mean_cost = float(pi @ _holding(cfg, mbs_index))
    return mean_cost + lam * passive_mass(policy, pi)


def exhaustive_threshold(lam: float, cfg: SystemConfig, mbs_index: int,
                         rtol: float = 1e-12) -> tuple[int, float]:
    """Best threshold in ``{-1..B}`` by enumerating ``average_cost``.

    Among near-ties the largest threshold wins, matching the accept-on-tie
    rule of the value-iteration solver.
    """
    tied, costs = threshold_tie_class(lam, cfg, mbs_index, rtol)
    t = int(tied[-1])
    return t, float(costs[t + 1])


def threshold_tie_class(lam: float, cfg: SystemConfig, mbs_index: int,
                        rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Thresholds whose cost is within ``rtol`` of the best, and all costs.

    ``costs[t + 1]`` is the average cost of threshold ``t``.  When the states
    above the optimum carry negligible stationary mass the class holds many
    thresholds that double precision cannot order.
    """
    costs = np.array([average_cost(ThresholdPolicy(t), lam, cfg, mbs_index)
                      for t in range(-1, cfg.buffer + 1)])
    best = costs.min()
    tied = np.flatnonzero(costs <= best + rtol * max(1.0, abs(best))) - 1
    return tied, costs


def _q_values(h, lam, holding, kernel):
    return holding + kernel.accept @ h, holding + lam + kernel.reject @ h


def threshold_of(actions: np.ndarray, interior: int | None = None) -> int:
    """Threshold of an accept mask: one less than the first rejecting state.

    Only states ``0..interior`` must form a down-closed set; states above
    ``interior`` touch the truncation boundary and are not checked.

    Raises
    ------
    StructuralViolationError
        If some state in ``0..interior`` accepts above a rejecting state.
    """
    actions = np.asarray(actions, dtype=bool)
    n = len(actions)
    interior = n - 1 if interior is None else min(interior, n - 1)
    t = n - 1 if actions.all() else int(np.argmin(actions)) - 1
    tail = actions[t + 1:interior + 1]
    if tail.any():
        bad = np.flatnonzero(tail) + t + 1
        raise StructuralViolationError(
            f"optimal action set is not a threshold set: accepts at {bad.tolist()} "
            f"above the first rejecting state {t + 1}", actions=actions)
    return t


def optimal_policy_rvi(lam: float, cfg: SystemConfig, mbs_index: int,
                       tol: float = 1e-9, max_iter: int = 1_000_000,
                       check_structure: bool = True) -> ValueSolution:
    """Relative value iteration on the average-cost optimality equation.

    Iterates ``h <- T h - (T h)(0)`` until the span of ``T h - h`` drops
    below ``tol * max(1, |rho|)``.  Ties in the minimisation go to accept.
    The reported threshold is one less than the first rejecting state; the
    threshold shape is enforced on ``0..B-M`` only, since accept rows above
    that clamp at the buffer and the full per-state actions are returned in
    ``actions``.

    Raises
    ------
    StructuralViolationError
        If the resulting accept set is not of threshold form (and
        ``check_structure`` is set).
    NonConvergenceError
        If ``max_iter`` iterations do not reach the tolerance.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    kernel = transition_kernel(cfg, mbs_index)
    holding = _holding(cfg, mbs_index)
    h = np.zeros(kernel.n_states)
    rho = 0.0
    for it in range(1, max_iter + 1):
        qa, qr = _q_values(h, lam, holding, kernel)
        Th = np.minimum(qa, qr)
        diff = Th - h
        span = float(diff.max() - diff.min())
        rho = float(Th[0])
        h = Th - Th[0]
        if span < tol * max(1.0, abs(rho)):
            break
    else:
        raise NonConvergenceError(
            f"relative value iteration did not converge in {max_iter} steps",
            last_iterates=(rho,), context={"lam": lam})
    qa, qr = _q_values(h, lam, holding, kernel)
    if cfg.arrival_pmf[0] == 1.0:
        actions = np.ones(kernel.n_states, dtype=bool)
    else:
        actions = qa <= qr
    interior = cfg.buffer - cfg.M
    if check_structure:
        t = threshold_of(actions, interior)
    else:
        t = cfg.buffer if actions.all() else int(np.argmin(actions)) - 1
    # rho from the span midpoint is tighter than the last Th(0)
    rho = float(0.5 * (diff.max() + diff.min()))
    return ValueSolution(V=h, rho=rho, lam=float(lam), policy=ThresholdPolicy(t),
                         actions=actions, iterations=it)


def finite_horizon_discounted(steps: int, lam: float, oracle: OracleConfig,
                              cfg: SystemConfig, mbs_index: int) -> np.ndarray:
    """``s``-step discounted values from ``V_0(x) = C*x``.

    ``V_s(x) = min_mu [C*x + (1-mu)*lam + beta * E_mu V_{s-1}(next)]`` on
    the truncated kernels.
    """
    if steps < 0:
        raise InvalidArgumentError("steps must be >= 0")
    kernel = transition_kernel(cfg, mbs_index)
    holding = _holding(cfg, mbs_index)
    V = holding.copy()
    for _ in range(steps):
        V = np.minimum(holding + oracle.beta * (kernel.accept @ V),
                       holding + lam + oracle.beta * (kernel.reject @ V))
    return V


def discounted_values(lam: float, beta: float, cfg: SystemConfig,
                      mbs_index: int, max_iter: int = 10_000) -> np.ndarray:
    """Infinite-horizon discounted optimal values via policy iteration."""
    if not 0.0 < beta < 1.0:
        raise InvalidArgumentError(f"beta must lie in (0, 1), got {beta}")
    kernel = transition_kernel(cfg, mbs_index)
    holding = _holding(cfg, mbs_index)
    n = kernel.n_states
    accept = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        P = np.where(accept[:, None], kernel.accept, kernel.reject)
        c = holding + np.where(accept, 0.0, lam)
        V = np.linalg.solve(np.eye(n) - beta * P, c)
        qa = holding + beta * (kernel.accept @ V)
        qr = holding + lam + beta * (kernel.reject @ V)
        # keep the incumbent action unless the other is strictly better
        improved = np.where(accept, qa <= qr + 1e-12 * np.abs(qr),
                            qa < qr - 1e-12 * np.abs(qr))
        if np.array_equal(improved, accept):
            return V
        accept = improved
    raise NonConvergenceError("policy iteration did not stabilise")
