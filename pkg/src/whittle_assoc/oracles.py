"""Slow reference computations used to cross-check the solvers.

None of these touch the cached kernels or linear systems: departures and
arrivals are enumerated from scratch.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np

from .model import SystemConfig
from .mdp import optimal_policy_rvi


def _departures(x: int, L: int, r: float):
    cap = min(x, L)
    out = []
    for d in range(cap + 1):
        if d < cap:
            p = comb(L, d) * r ** d * (1 - r) ** (L - d)
        else:
            p = sum(comb(L, l) * r ** l * (1 - r) ** (L - l) for l in range(d, L + 1))
        out.append((d, p))
    return out


def expectimax_values(steps: int, lam: float, beta: float, cfg: SystemConfig,
                      mbs_index: int) -> np.ndarray:
    """``steps``-horizon discounted values by recursive tree enumeration.

    Every ``(departures, file size)`` branch is expanded explicitly.
    """
    m = cfg.mbs[mbs_index]
    L, r, C, B = int(cfg.L), float(m.rate), float(m.holding_cost), int(cfg.buffer)
    arrivals = [(j, p) for j, p in enumerate(cfg.arrival_pmf) if p > 0]

    @lru_cache(maxsize=None)
    def value(s: int, x: int) -> float:
        if s == 0:
            return C * x
        best = np.inf
        for mu in (1, 0):
            total = C * x + (1 - mu) * lam
            for d, pd in _departures(x, L, r):
                for j, pj in arrivals:
                    nxt = min(x - d + mu * j, B)
                    total += beta * pd * pj * value(s - 1, nxt)
            best = min(best, total)
        return best

    return np.array([value(steps, x) for x in range(B + 1)])


def lambda_sweep_index(x: int, cfg: SystemConfig, mbs_index: int,
                       lams: np.ndarray) -> float:
    """Smallest tax on the sorted grid ``lams`` at which state ``x`` accepts.

    The result overestimates the index by at most one grid spacing.
    """
    for lam in lams:
        sol = optimal_policy_rvi(float(lam), cfg, mbs_index, check_structure=False)
        if sol.actions[x]:
            return float(lam)
    return float("inf")
