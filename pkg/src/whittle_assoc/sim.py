"""Slot / mini-slot simulator of the K-mBS network.

Per slot ``n``:

1. the holding cost ``sum_i C_i X_n^i`` of the start-of-slot states is
   recorded;
2. each mBS runs ``L`` mini-slots, each an independent success trial with
   probability ``r_i`` that serves one head-of-line packet (FIFO over users);
3. at the end of the slot a user with ``j ~ arrival_pmf`` packets may
   arrive and is associated using the start-of-slot snapshot; at most
   ``B - (X_n^i - D_n^i)`` of its packets are admitted, the rest dropped.

Random numbers come from one ``numpy`` PCG64 stream per episode, drawn as
``K*L + 2`` uniforms per slot: the service trials in mBS-major order, then
the file-size draw, then the tie-break draw.  The draw count does not
depend on the policy, so equal seeds give common random numbers across
policies.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidArgumentError, MissingInputError
from .model import SystemConfig
from .policies import MIXED_WEIGHT, TIE_RTOL, PolicyKind
from .whittle import IndexTable

logger = logging.getLogger(__name__)

CHUNK_SLOTS = 1000


@numba.njit(cache=True)
def _choose(kind, states, rates, index_vals, mixed_weight, u):
    K = states.shape[0]
    if kind == 0:
        k = int(u * K)
        return k if k < K else K - 1
    sc = np.empty(K)
    for i in range(K):
        if kind == 1:
            sc[i] = -states[i]
        elif kind == 2:
            sc[i] = rates[i]
        elif kind == 3:
            sc[i] = rates[i] / (states[i] + 1)
        elif kind == 4:
            sc[i] = mixed_weight * rates[i] + rates[i] / (states[i] + 1)
        else:
            sc[i] = -index_vals[i, states[i]]
    best = sc.max()
    cut = best - TIE_RTOL * max(1.0, abs(best))
    n_tied = 0
    for i in range(K):
        if sc[i] >= cut:
            n_tied += 1
    target = int(u * n_tied)
    if target >= n_tied:
        target = n_tied - 1
    for i in range(K):
        if sc[i] >= cut:
            if target == 0:
                return i
            target -= 1
    return K - 1


@numba.njit(cache=True)
def _run_chunk(n0, uniforms, kind, L, B, rates, costs, cum_pmf, index_vals,
               mixed_weight, X, queue, q_head, q_len, remaining,
               user_arrival, user_packets, user_requested, user_mbs,
               user_dep_slot, user_dep_mini, n_users,
               cost_series, state_trace, dep_trace, arrived, admitted, dropped,
               served):
    K = X.shape[0]
    cap = queue.shape[1]
    start = np.empty(K, dtype=np.int64)
    for s in range(uniforms.shape[0]):
        n = n0 + s
        u = uniforms[s]
        c = 0.0
        for i in range(K):
            start[i] = X[i]
            state_trace[n, i] = X[i]
            c += costs[i] * X[i]
        cost_series[n] = c
        for i in range(K):
            d = 0
            for m in range(L):
                if X[i] > 0 and u[i * L + m] < rates[i]:
                    uid = queue[i, q_head[i]]
                    remaining[uid] -= 1
                    X[i] -= 1
                    d += 1
                    if remaining[uid] == 0:
                        user_dep_slot[uid] = n
                        user_dep_mini[uid] = m + 1
                        q_head[i] = (q_head[i] + 1) % cap
                        q_len[i] -= 1
            dep_trace[n, i] = d
            served[i] += d
        j = 0
        ua = u[K * L]
        while j < cum_pmf.shape[0] - 1 and ua >= cum_pmf[j]:
            j += 1
        if j >= 1:
            choice = _choose(kind, start, rates, index_vals, mixed_weight,
                             u[K * L + 1])
            room = B - X[choice]
            q = j if j < room else room
            arrived[choice] += j
            admitted[choice] += q
            dropped[choice] += j - q
            if q > 0:
                uid = n_users
                n_users += 1
                user_arrival[uid] = n
                user_packets[uid] = q
                user_requested[uid] = j
                user_mbs[uid] = choice
                remaining[uid] = q
                queue[choice, (q_head[choice] + q_len[choice]) % cap] = uid
                q_len[choice] += 1
                X[choice] += q
    return n_users


@dataclass
class EpisodeRecord:
    """Everything one episode produces.

    User arrays are indexed by user id (admission order).  A user that has
    not finished by the horizon has ``departure_slot == -1``.
    """

    policy: PolicyKind
    seed: int
    L: int
    cost_series: np.ndarray = field(repr=False)
    state_trace: np.ndarray = field(repr=False)
    departure_trace: np.ndarray = field(repr=False)
    user_arrival_slot: np.ndarray = field(repr=False)
    user_packets: np.ndarray = field(repr=False)
    user_requested: np.ndarray = field(repr=False)
    user_mbs: np.ndarray = field(repr=False)
    departure_slot: np.ndarray = field(repr=False)
    departure_mini_slot: np.ndarray = field(repr=False)
    arrived_packets: np.ndarray = field(repr=False)
    admitted_packets: np.ndarray = field(repr=False)
    dropped_packets: np.ndarray = field(repr=False)
    served_packets: np.ndarray = field(repr=False)
    final_states: np.ndarray = field(repr=False)

    @property
    def horizon(self) -> int:
        return self.cost_series.shape[0]

    @property
    def n_users(self) -> int:
        return self.user_packets.shape[0]

    @property
    def departed(self) -> np.ndarray:
        return self.departure_slot >= 0

    @property
    def delays(self) -> np.ndarray:
        """Delay in mini-slots of every departed user.

        A user arriving at the end of slot ``n`` is present from slot
        ``n+1``; finishing at mini-slot ``m`` of slot ``n'`` gives
        ``(n' - n - 1) * L + m``.
        """
        done = self.departed
        return ((self.departure_slot[done] - self.user_arrival_slot[done] - 1)
                * self.L + self.departure_mini_slot[done])


def _uniform_stream(seed: int, per_slot: int, horizon: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    for n0 in range(0, horizon, CHUNK_SLOTS):
        rows = min(CHUNK_SLOTS, horizon - n0)
        yield n0, rng.random((rows, per_slot))


def run_episode(cfg: SystemConfig, kind, tables: IndexTable | None = None,
                seed: int = 0, mixed_weight: float = MIXED_WEIGHT) -> EpisodeRecord:
    """Simulate ``cfg.horizon`` slots from the empty network under ``kind``.

    Deterministic in ``(cfg, kind, tables, seed)``.

    Raises
    ------
    MissingInputError
        Whittle policy without index tables.
    InvalidArgumentError
        Tables that do not cover ``{0..B}`` for every mBS.
    """
    kind = PolicyKind.parse(kind)
    K, L, B, T = cfg.K, int(cfg.L), int(cfg.buffer), int(cfg.horizon)
    if kind is PolicyKind.WHITTLE:
        if tables is None:
            raise MissingInputError("the Whittle policy needs index tables")
        if tables.values.shape != (K, B + 1):
            raise InvalidArgumentError(
                f"index tables have shape {tables.values.shape}, need {(K, B + 1)}")
        index_vals = np.ascontiguousarray(tables.values)
    else:
        index_vals = np.zeros((K, 1))
    rates = np.ascontiguousarray(cfg.rates)
    costs = np.ascontiguousarray(cfg.holding_costs)
    cum_pmf = np.cumsum(cfg.arrival_pmf)

    X = np.zeros(K, dtype=np.int64)
    queue = np.zeros((K, B + 1), dtype=np.int64)
    q_head = np.zeros(K, dtype=np.int64)
    q_len = np.zeros(K, dtype=np.int64)
    remaining = np.zeros(T, dtype=np.int64)
    user_arrival = np.full(T, -1, dtype=np.int64)
    user_packets = np.zeros(T, dtype=np.int64)
    user_requested = np.zeros(T, dtype=np.int64)
    user_mbs = np.full(T, -1, dtype=np.int64)
    dep_slot = np.full(T, -1, dtype=np.int64)
    dep_mini = np.full(T, -1, dtype=np.int64)
    cost_series = np.zeros(T)
    state_trace = np.zeros((T, K), dtype=np.int32)
    dep_trace = np.zeros((T, K), dtype=np.int32)
    arrived = np.zeros(K, dtype=np.int64)
    admitted = np.zeros(K, dtype=np.int64)
    dropped = np.zeros(K, dtype=np.int64)
    served = np.zeros(K, dtype=np.int64)

    n_users = 0
    for n0, uniforms in _uniform_stream(int(seed), K * L + 2, T):
        n_users = _run_chunk(
            n0, uniforms, int(kind), L, B, rates, costs, cum_pmf, index_vals,
            float(mixed_weight), X, queue, q_head, q_len, remaining,
            user_arrival, user_packets, user_requested, user_mbs,
            dep_slot, dep_mini, n_users, cost_series, state_trace, dep_trace,
            arrived, admitted, dropped, served)

    return EpisodeRecord(
        policy=kind, seed=int(seed), L=L, cost_series=cost_series,
        state_trace=state_trace, departure_trace=dep_trace,
        user_arrival_slot=user_arrival[:n_users], user_packets=user_packets[:n_users],
        user_requested=user_requested[:n_users], user_mbs=user_mbs[:n_users],
        departure_slot=dep_slot[:n_users], departure_mini_slot=dep_mini[:n_users],
        arrived_packets=arrived, admitted_packets=admitted, dropped_packets=dropped,
        served_packets=served, final_states=X.copy())


def jfi(throughputs) -> float:
    """Jain's fairness index ``(sum T)^2 / (Y * sum T^2)``."""
    t = np.asarray(throughputs, dtype=float)
    if t.size == 0:
        raise InvalidArgumentError("JFI of an empty list")
    if np.any(t < 0) or not np.any(t > 0):
        raise InvalidArgumentError("JFI needs non-negative values, not all zero")
    return float(t.sum() ** 2 / (t.size * np.dot(t, t)))


@dataclass(frozen=True)
class Metrics:
    """Episode summary.  Per-user fields are ``None`` when nobody departed."""

    avg_cost: float
    avg_delay: float | None
    avg_throughput: float | None
    jfi: float | None
    n_departed: int

    @property
    def empty(self) -> bool:
        return self.n_departed == 0


def compute_metrics(record: EpisodeRecord, warmup: int) -> Metrics:
    """Cost averaged over slots ``[warmup, horizon)``; per-user metrics over
    every user that departed before the horizon."""
    if not 0 <= warmup < record.horizon:
        raise InvalidArgumentError(
            f"warmup {warmup} outside [0, {record.horizon})")
    avg_cost = float(record.cost_series[warmup:].mean())
    delays = record.delays
    if delays.size == 0:
        return Metrics(avg_cost, None, None, None, 0)
    thr = record.user_packets[record.departed] / delays
    return Metrics(avg_cost, float(delays.mean()), float(thr.mean()), jfi(thr),
                   int(delays.size))


METRIC_NAMES = ("avg_cost", "avg_delay", "avg_throughput", "jfi")


@dataclass(frozen=True)
class PolicySummary:
    """Across-seed mean and standard error of every metric for one policy."""

    policy: PolicyKind
    per_seed: tuple
    mean: dict
    stderr: dict


def summarize(kind: PolicyKind, per_seed) -> PolicySummary:
    mean, se = {}, {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(m, name) for _, m in per_seed
                         if getattr(m, name) is not None], dtype=float)
        if vals.size == 0:
            mean[name], se[name] = None, None
            continue
        mean[name] = float(vals.mean())
        se[name] = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return PolicySummary(PolicyKind.parse(kind), tuple(per_seed), mean, se)


def run_experiment(cfg: SystemConfig, kinds, seeds, tables: IndexTable | None = None,
                   n_jobs: int = 1, mixed_weight: float = MIXED_WEIGHT) -> dict:
    """Run every ``(policy, seed)`` episode and summarise per policy.

    Returns ``{PolicyKind: PolicySummary}``.  Episodes share nothing, so the
    result does not depend on ``n_jobs``.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise InvalidArgumentError("at least one seed required")
    kinds = [PolicyKind.parse(k) for k in kinds]
    if PolicyKind.WHITTLE in kinds and tables is None:
        raise MissingInputError("the Whittle policy needs index tables")
    jobs = [(k, s) for k in kinds for s in seeds]

    def one(job):
        k, s = job
        rec = run_episode(cfg, k, tables, s, mixed_weight)
        return compute_metrics(rec, cfg.warmup)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    out = {}
    for k in kinds:
        per_seed = [(s, m) for (kk, s), m in zip(jobs, results) if kk == k]
        out[k] = summarize(k, per_seed)
    return out
