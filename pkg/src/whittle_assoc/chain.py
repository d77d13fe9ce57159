"""Markov chains induced by threshold admission policies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import InvalidArgumentError, NumericalFailureError
from .model import SystemConfig, transition_kernel

DIRECT_SOLVE_MAX_STATES = 2001
STATIONARY_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ThresholdPolicy:
    """Accept arrivals in states ``<= threshold``, reject above.

    ``threshold = -1`` rejects everywhere; ``threshold = B`` accepts
    everywhere.
    """

    threshold: int

    def __post_init__(self):
        if self.threshold < -1:
            raise InvalidArgumentError(
                f"threshold must be >= -1, got {self.threshold}")

    def accepts(self, n_states: int) -> np.ndarray:
        """Boolean accept mask over ``{0..n_states-1}``."""
        return np.arange(n_states) <= self.threshold


def _check_policy(policy: ThresholdPolicy, cfg: SystemConfig):
    if policy.threshold > cfg.buffer:
        raise InvalidArgumentError(
            f"threshold {policy.threshold} exceeds buffer {cfg.buffer}")


def build_dtmc(policy: ThresholdPolicy, cfg: SystemConfig,
               mbs_index: int) -> np.ndarray:
    """Row-stochastic matrix of the chain under ``policy``."""
    _check_policy(policy, cfg)
    kernel = transition_kernel(cfg, mbs_index)
    mask = policy.accepts(kernel.n_states)[:, None]
    return np.where(mask, kernel.accept, kernel.reject)


def _reachable_from_zero(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = np.array([0])
    while frontier.size:
        nxt = np.flatnonzero((P[frontier] > 0).any(axis=0) & ~seen)
        seen[nxt] = True
        frontier = nxt
    return seen


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary pmf of the recurrent class reachable from state 0.

    Solves ``pi (P - I) = 0`` with one balance equation replaced by the
    normalisation, restricted to the states reachable from 0 (so the
    reject-everywhere chain, absorbing at 0, gives the point mass there).
    Chains above ``DIRECT_SOLVE_MAX_STATES`` fall back to power iteration.

    Raises
    ------
    NumericalFailureError
        If the solve is singular or the balance residual exceeds 1e-10.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.ndim != 2 or P.shape[1] != n:
        raise InvalidArgumentError("transition matrix must be square")
    keep = _reachable_from_zero(P)
    sub = P[np.ix_(keep, keep)]
    m = sub.shape[0]
    if m <= DIRECT_SOLVE_MAX_STATES:
        A = sub.T - np.eye(m)
        A[-1, :] = 1.0
        b = np.zeros(m)
        b[-1] = 1.0
        try:
            pi_sub = scipy.linalg.solve(A, b)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailureError(f"stationary solve failed: {exc}") from exc
    else:
        # start at the empty state (index 0 of the reachable set); kernels
        # of this model are banded, so a sparse product keeps steps cheap
        pi_sub = np.zeros(m)
        pi_sub[0] = 1.0
        subT = scipy.sparse.csr_matrix(sub.T)
        for _ in range(1_000_000):
            nxt = subT @ pi_sub
            if np.abs(nxt - pi_sub).max() < STATIONARY_RESIDUAL_TOL / 10:
                pi_sub = nxt
                break
            pi_sub = nxt
    # transient states of the reachable set carry round-off mass only
    pi_sub = np.clip(pi_sub, 0.0, None)
    pi_sub /= pi_sub.sum()
    pi = np.zeros(n)
    pi[keep] = pi_sub
    residual = float(np.abs(pi @ P - pi).max())
    if not np.isfinite(residual) or residual >= STATIONARY_RESIDUAL_TOL:
        raise NumericalFailureError(
            f"stationary residual {residual:.3e} exceeds tolerance",
            residual=residual)
    return pi


def policy_stationary(policy: ThresholdPolicy, cfg: SystemConfig,
                      mbs_index: int) -> np.ndarray:
    return stationary_distribution(build_dtmc(policy, cfg, mbs_index))


def passive_mass(policy: ThresholdPolicy, pi: np.ndarray) -> float:
    """Long-run fraction of slots spent in rejecting states."""
    pi = np.asarray(pi)
    return float(pi[max(policy.threshold + 1, 0):].sum())
