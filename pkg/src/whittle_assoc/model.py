"""System parameters and the per-base-station transition kernels.

Every other module consumes the objects defined here.  States of a single
mBS are the total number of queued packets, truncated to ``{0..buffer}``;
probability mass that would overflow the buffer is clamped onto the top
state so that all rows stay stochastic.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .errors import InvalidArgumentError

ACCEPT = 1
REJECT = 0

PMF_TOL = 1e-12


@dataclass(frozen=True)
class MbsParams:
    """Serving probability per mini-slot and holding cost per packet per slot."""

    rate: float
    holding_cost: float

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise InvalidArgumentError(f"rate must lie in (0, 1), got {self.rate}")
        if not self.holding_cost > 0.0:
            raise InvalidArgumentError(
                f"holding_cost must be positive, got {self.holding_cost}")


@dataclass(frozen=True)
class SystemConfig:
    """Network-level parameters.

    Parameters
    ----------
    L : int
        Mini-slots per slot.
    M : int
        Maximum number of packets an arriving user carries.
    arrival_pmf : sequence of float
        ``p_0..p_M``; ``p_j`` is the probability that a user with ``j``
        packets arrives at the end of a slot (``p_0``: nobody arrives).
    mbs : sequence of MbsParams
        One entry per base station; ``K = len(mbs)``.
    buffer : int
        Truncation bound ``B`` of every per-mBS state space.
    horizon, warmup : int
        Slots per simulated episode, and leading slots excluded from the
        cost average.
    """

    L: int
    M: int
    arrival_pmf: tuple
    mbs: tuple
    buffer: int = 200
    horizon: int = 20_000
    warmup: int = 10_000

    def __post_init__(self):
        # normalise containers so the config is hashable and immutable
        object.__setattr__(self, "arrival_pmf",
                           tuple(float(p) for p in self.arrival_pmf))
        object.__setattr__(self, "mbs", tuple(
            m if isinstance(m, MbsParams) else MbsParams(**m) for m in self.mbs))
        self.validate()

    def validate(self):
        if len(self.mbs) < 1:
            raise InvalidArgumentError("K >= 1 required: at least one mBS")
        if int(self.L) != self.L or self.L < 1:
            raise InvalidArgumentError(f"L >= 1 required, got {self.L}")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidArgumentError(f"M >= 1 required, got {self.M}")
        if len(self.arrival_pmf) != self.M + 1:
            raise InvalidArgumentError(
                f"arrival_pmf must have M+1 = {self.M + 1} entries, "
                f"got {len(self.arrival_pmf)}")
        p = np.asarray(self.arrival_pmf)
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise InvalidArgumentError("arrival_pmf entries must lie in [0, 1]")
        if abs(p.sum() - 1.0) > PMF_TOL:
            raise InvalidArgumentError(
                f"arrival_pmf must sum to 1 within {PMF_TOL}, sums to {p.sum()!r}")
        if self.buffer < self.M:
            raise InvalidArgumentError(
                f"buffer >= M required (buffer={self.buffer}, M={self.M})")
        if not self.horizon > self.warmup >= 0:
            raise InvalidArgumentError(
                f"horizon > warmup >= 0 required (horizon={self.horizon}, "
                f"warmup={self.warmup})")

    @property
    def K(self) -> int:
        return len(self.mbs)

    @property
    def rates(self) -> np.ndarray:
        return np.array([m.rate for m in self.mbs])

    @property
    def holding_costs(self) -> np.ndarray:
        return np.array([m.holding_cost for m in self.mbs])

    @property
    def mean_arrival(self) -> float:
        return float(np.dot(np.arange(self.M + 1), self.arrival_pmf))

    def replace(self, **changes) -> "SystemConfig":
        from dataclasses import replace
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "M": self.M,
            "arrival_pmf": list(self.arrival_pmf),
            "mbs": [{"rate": m.rate, "holding_cost": m.holding_cost}
                    for m in self.mbs],
            "buffer": self.buffer,
            "horizon": self.horizon,
            "warmup": self.warmup,
        }


def uniform_arrival_pmf(p0: float, M: int) -> tuple:
    """Return ``(p_0, (1-p_0)/M, ..., (1-p_0)/M)``."""
    if not 0.0 <= p0 <= 1.0:
        raise InvalidArgumentError(f"p0 must lie in [0, 1], got {p0}")
    if M < 1:
        raise InvalidArgumentError(f"M >= 1 required, got {M}")
    return (float(p0),) + ((1.0 - p0) / M,) * M


def make_config(rates: Sequence[float], costs: Sequence[float], *, L: int,
                M: int, p0: float, buffer: int = 200, horizon: int = 20_000,
                warmup: int | None = None) -> SystemConfig:
    """Build a config with the uniform file-size distribution."""
    if len(rates) != len(costs):
        raise InvalidArgumentError("rates and costs must have equal length")
    if warmup is None:
        warmup = horizon // 2
    return SystemConfig(
        L=L, M=M, arrival_pmf=uniform_arrival_pmf(p0, M),
        mbs=tuple(MbsParams(float(r), float(c)) for r, c in zip(rates, costs)),
        buffer=buffer, horizon=horizon, warmup=warmup)


def normalize_rates(raw_rates: Sequence[float], zeta: float = 1e-3) -> list[float]:
    """Map raw rates in bits/s to per-mini-slot serving probabilities.

    ``r_i = R_i / (max_l R_l + zeta)``, which lies strictly inside (0, 1).
    """
    raw = np.asarray(raw_rates, dtype=float)
    if raw.size == 0 or np.any(raw <= 0.0):
        raise InvalidArgumentError("raw rates must be non-empty and positive")
    if not zeta > 0.0:
        raise InvalidArgumentError(f"zeta must be positive, got {zeta}")
    return list(raw / (raw.max() + zeta))


def departure_pmf(x: int, L: int, r: float) -> np.ndarray:
    """Distribution of packets served in one slot from state ``x``.

    Entry ``d`` is the probability that ``d`` packets depart, for
    ``d = 0..min(x, L)``.  Below the cap it is the Binomial(L, r) mass; at
    the cap it is the binomial upper tail.
    """
    if x < 0:
        raise InvalidArgumentError(f"state must be non-negative, got {x}")
    cap = min(int(x), int(L))
    if cap == 0:
        return np.ones(1)
    d = np.arange(cap + 1)
    pmf = binom.pmf(d, L, r)
    pmf[cap] = binom.sf(cap - 1, L, r)
    return pmf


@lru_cache(maxsize=256)
def _kernel(L: int, rate: float, arrival_pmf: tuple, B: int):
    p = np.asarray(arrival_pmf)
    accept = np.zeros((B + 1, B + 1))
    reject = np.zeros((B + 1, B + 1))
    for x in range(B + 1):
        dep = departure_pmf(x, L, rate)
        # after departures the queue sits at x - d, i.e. reversed dep placed at x-cap..x
        after = np.zeros(x + 1)
        after[x - len(dep) + 1:] = dep[::-1]
        reject[x, :x + 1] = after
        full = np.convolve(after, p)
        accept[x, :min(len(full), B + 1)] = full[:B + 1]
        if len(full) > B + 1:
            accept[x, B] += full[B + 1:].sum()
    accept.setflags(write=False)
    reject.setflags(write=False)
    return accept, reject


@dataclass(frozen=True)
class TransitionKernel:
    """Accept and reject transition matrices on ``{0..B}``.

    ``accept[x]`` / ``reject[x]`` is the next-state pmf from state ``x``.
    """

    accept: np.ndarray = field(repr=False)
    reject: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return self.accept.shape[0]

    def rows(self, action: int) -> np.ndarray:
        return self.accept if action == ACCEPT else self.reject


def transition_kernel(cfg: SystemConfig, mbs_index: int) -> TransitionKernel:
    """Both transition matrices for one mBS (cached per parameter set)."""
    m = _mbs(cfg, mbs_index)
    acc, rej = _kernel(int(cfg.L), float(m.rate), cfg.arrival_pmf, int(cfg.buffer))
    return TransitionKernel(acc, rej)


def transition_row(x: int, action: int | str, cfg: SystemConfig,
                   mbs_index: int) -> np.ndarray:
    """Next-state pmf over ``{0..B}`` from ``x`` under accept or reject.

    The next state is ``min((x - d)^+ + action * j, B)`` with ``d`` the
    departures and ``j`` the arriving file size.
    """
    if not 0 <= x <= cfg.buffer:
        raise InvalidArgumentError(
            f"state {x} outside {{0..{cfg.buffer}}}")
    action = _action(action)
    return transition_kernel(cfg, mbs_index).rows(action)[x].copy()


def check_stability(cfg: SystemConfig) -> tuple[bool, float]:
    """Sufficient positive-recurrence condition ``L * min(r) > E[arrivals]``.

    Returns ``(stable, margin)``.  Only advisory: the truncated chains are
    finite, so the simulator runs either way.
    """
    margin = float(cfg.L * cfg.rates.min() - cfg.mean_arrival)
    stable = margin > 0.0
    if not stable:
        warnings.warn(
            f"stability condition fails: L*r_min - E[A] = {margin:.4g} <= 0",
            RuntimeWarning, stacklevel=2)
    return stable, margin


def _mbs(cfg: SystemConfig, mbs_index: int) -> MbsParams:
    if not 0 <= mbs_index < cfg.K:
        raise InvalidArgumentError(
            f"mbs_index {mbs_index} outside 0..{cfg.K - 1}")
    return cfg.mbs[mbs_index]


def _action(action) -> int:
    if action in (ACCEPT, "accept", True):
        return ACCEPT
    if action in (REJECT, "reject", False):
        return REJECT
    raise InvalidArgumentError(f"unknown action {action!r}")
