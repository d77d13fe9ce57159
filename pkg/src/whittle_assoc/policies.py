"""User association rules.

Every rule except ``RANDOM`` maximises a per-mBS score over a snapshot of
the start-of-slot queue lengths; maximisers within a relative ``1e-12`` are
tied and one is chosen uniformly with a single uniform draw.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, MissingInputError
from .whittle import IndexTable

TIE_RTOL = 1e-12
MIXED_WEIGHT = 0.2


class PolicyKind(enum.IntEnum):
    RANDOM = 0
    LOAD = 1
    SNR = 2
    THROUGHPUT = 3
    MIXED = 4
    WHITTLE = 5

    @classmethod
    def parse(cls, name) -> "PolicyKind":
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).strip().upper()]
        except KeyError:
            raise InvalidArgumentError(
                f"unknown policy {name!r}; choose from "
                f"{', '.join(k.name.lower() for k in cls)}") from None

    @property
    def label(self) -> str:
        return "SNR" if self is PolicyKind.SNR else self.name.capitalize()


ALL_POLICIES = tuple(PolicyKind)


@dataclass(frozen=True)
class NetworkSnapshot:
    states: np.ndarray
    rates: np.ndarray
    index_tables: IndexTable | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=np.int64))
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=float))
        if self.states.shape != self.rates.shape or self.states.ndim != 1:
            raise InvalidArgumentError("states and rates must be equal-length vectors")
        if self.states.size < 1:
            raise InvalidArgumentError("at least one mBS required")
        if np.any(self.states < 0):
            raise InvalidArgumentError("states must be non-negative")
        if self.index_tables is not None:
            if len(self.index_tables.mbs_ids) != self.states.size:
                raise InvalidArgumentError("one index row per mBS required")
            if np.any(self.states >= self.index_tables.n_states):
                raise InvalidArgumentError("state beyond the index table")

    @property
    def K(self) -> int:
        return self.states.size


def scores(kind: PolicyKind, snapshot: NetworkSnapshot,
           mixed_weight: float = MIXED_WEIGHT) -> np.ndarray:
    """Preference score of every mBS; higher is preferred."""
    kind = PolicyKind.parse(kind)
    x, r = snapshot.states, snapshot.rates
    if kind is PolicyKind.RANDOM:
        return np.zeros(snapshot.K)
    if kind is PolicyKind.LOAD:
        return -x.astype(float)
    if kind is PolicyKind.SNR:
        return r.copy()
    if kind is PolicyKind.THROUGHPUT:
        return r / (x + 1)
    if kind is PolicyKind.MIXED:
        return mixed_weight * r + r / (x + 1)
    if snapshot.index_tables is None:
        raise MissingInputError("the Whittle policy needs index tables")
    return -snapshot.index_tables.values[np.arange(snapshot.K), x]


def score(kind: PolicyKind, snapshot: NetworkSnapshot, i: int,
          mixed_weight: float = MIXED_WEIGHT) -> float:
    return float(scores(kind, snapshot, mixed_weight)[i])


def pick_max(values: np.ndarray, u: float) -> int:
    """Index of a maximiser of ``values``, ties resolved by ``u`` in [0, 1)."""
    best = values.max()
    tied = np.flatnonzero(values >= best - TIE_RTOL * max(1.0, abs(best)))
    return int(tied[min(int(u * len(tied)), len(tied) - 1)])


def associate(kind: PolicyKind, snapshot: NetworkSnapshot,
              rng: np.random.Generator, mixed_weight: float = MIXED_WEIGHT) -> int:
    """mBS (0-based) that receives the arriving user.

    Consumes exactly one uniform from ``rng`` for every policy.
    """
    kind = PolicyKind.parse(kind)
    u = rng.random()
    if kind is PolicyKind.RANDOM:
        return min(int(u * snapshot.K), snapshot.K - 1)
    return pick_max(scores(kind, snapshot, mixed_weight), u)
