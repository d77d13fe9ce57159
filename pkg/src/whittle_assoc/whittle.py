"""Whittle index computation for the per-mBS admission problem.

The index of state ``x`` is the tax at which an mBS in state ``x`` is
indifferent between admitting and rejecting an arrival, evaluated under the
threshold policy with threshold ``x``.  Two solvers are provided: the
damped fixed-point iteration on the tax and an exact solve that exploits the
affine dependence of the relative values on the tax.  Indices are computed
on a grid of states and linearly interpolated in between.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .chain import ThresholdPolicy
from .errors import (DegenerateIndifferenceError, InvalidArgumentError,
                     NonConvergenceError, NumericalFailureError, WhittleAssocError)
from .mdp import relative_value_system
from .model import SystemConfig, transition_kernel

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12


@dataclass(frozen=True)
class WhittleSolverConfig:
    gamma: float = 0.05
    tol: float = 1e-8
    max_iter: int = 100_000
    grid_step: int = 5
    grid: tuple | None = None
    method: str = "direct"

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")
        if not self.tol > 0:
            raise InvalidArgumentError(f"tol must be positive, got {self.tol}")
        if self.grid_step < 1:
            raise InvalidArgumentError("grid_step must be >= 1")
        if self.method not in ("direct", "iterative"):
            raise InvalidArgumentError(
                f"method must be 'direct' or 'iterative', got {self.method!r}")
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))

    def grid_for(self, cfg: SystemConfig) -> np.ndarray:
        """Grid states, validated against ``{0..B-M}``."""
        top = cfg.buffer - cfg.M
        if self.grid is None:
            grid = np.arange(0, top + 1, self.grid_step)
            if grid[-1] != top:
                grid = np.append(grid, top)
            return grid
        grid = np.asarray(self.grid)
        if grid.size == 0 or grid[0] != 0:
            raise InvalidArgumentError("grid must start at state 0")
        if np.any(np.diff(grid) <= 0):
            raise InvalidArgumentError("grid must be strictly increasing")
        if grid[-1] > top:
            raise InvalidArgumentError(f"grid exceeds B-M = {top}")
        return grid


def _indifference_rows(x: int, cfg: SystemConfig, mbs_index: int) -> np.ndarray:
    if not 0 <= x <= cfg.buffer - cfg.M:
        raise InvalidArgumentError(
            f"index state {x} outside {{0..B-M}} = {{0..{cfg.buffer - cfg.M}}}")
    kernel = transition_kernel(cfg, mbs_index)
    return kernel.accept[x] - kernel.reject[x]


def indifference_gap(x: int, lam: float, cfg: SystemConfig, mbs_index: int) -> float:
    """``E_accept[V] - E_reject[V] - lam`` at ``x`` under threshold ``x``."""
    diff = _indifference_rows(x, cfg, mbs_index)
    V, _ = relative_value_system(ThresholdPolicy(x), cfg, mbs_index).values(lam)
    return float(diff @ V - lam)


def lambda_iteration(x: int, cfg: SystemConfig, mbs_index: int,
                     solver: WhittleSolverConfig | None = None,
                     lam0: float = 0.0) -> float:
    """Index of state ``x`` by the damped tax iteration.

    ``lam <- lam + gamma * (E_accept[V_lam] - E_reject[V_lam] - lam)``,
    re-solving the threshold-``x`` relative values at every step.  Stops
    once a step is below ``tol * min(1, gamma)`` and the contraction-rate
    estimate puts the fixed point within ``tol``.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` steps; carries the last two iterates.
    NumericalFailureError
        If the iterates blow up (``gamma`` too large for this state).
    """
    solver = solver or WhittleSolverConfig()
    diff = _indifference_rows(x, cfg, mbs_index)
    system = relative_value_system(ThresholdPolicy(x), cfg, mbs_index)
    lam, prev_step, q = float(lam0), None, 0.0
    for _ in range(solver.max_iter):
        V, _ = system.values(lam)
        new = lam + solver.gamma * (float(diff @ V) - lam)
        if not np.isfinite(new) or abs(new) > DIVERGENCE_BOUND:
            raise NumericalFailureError(
                f"tax iteration diverged at state {x} (last {lam:.6g}); "
                f"shrink gamma below {solver.gamma}",
                context={"state": x, "mbs": mbs_index})
        step = new - lam
        # contraction factor of the affine map, trusted only above round-off
        if prev_step and abs(prev_step) > 1e-9 * max(1.0, abs(lam)):
            q = abs(step / prev_step)
        if abs(step) < solver.tol * min(1.0, solver.gamma):
            # remaining distance to the fixed point is step * q / (1 - q)
            if q < 1.0 and abs(step) * q / (1.0 - q) < solver.tol:
                return new
        lam, prev_step = new, step
    raise NonConvergenceError(
        f"tax iteration at state {x} did not converge in {solver.max_iter} steps",
        last_iterates=(lam, new), context={"state": x, "mbs": mbs_index})


def direct_index(x: int, cfg: SystemConfig, mbs_index: int) -> float:
    """Exact index of state ``x``.

    With ``V_lam = U + lam * W`` the indifference condition
    ``lam = (a - b) . V_lam`` is scalar-linear in ``lam``.

    Raises
    ------
    DegenerateIndifferenceError
        If ``1 - (a - b) . W`` vanishes.
    """
    diff = _indifference_rows(x, cfg, mbs_index)
    system = relative_value_system(ThresholdPolicy(x), cfg, mbs_index)
    denom = 1.0 - float(diff @ system.W)
    if abs(denom) < 1e-12:
        raise DegenerateIndifferenceError(
            f"degenerate indifference at state {x}: 1 - (a-b).W = {denom:.3e}",
            context={"state": x, "mbs": mbs_index})
    return float(diff @ system.U) / denom


@dataclass
class IndexTable:
    """Whittle index per mBS and state.

    ``values[k, x]`` is the index of mBS ``mbs_ids[k]`` in state ``x``;
    ``exact[k, x]`` marks states that were solved rather than interpolated.
    """

    mbs_ids: tuple
    values: np.ndarray = field(repr=False)
    exact: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.mbs_ids = tuple(int(i) for i in self.mbs_ids)
        self.values = np.asarray(self.values, dtype=float)
        self.exact = np.asarray(self.exact, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.exact.shape:
            raise InvalidArgumentError("values and exact must be equal-shape 2-D arrays")
        if len(self.mbs_ids) != self.values.shape[0]:
            raise InvalidArgumentError("one row per mBS id required")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgumentError("index table has non-finite entries")

    @property
    def n_states(self) -> int:
        return self.values.shape[1]

    def row(self, mbs_id: int) -> np.ndarray:
        return self.values[self.mbs_ids.index(mbs_id)]

    def lookup(self, mbs_id: int, state: int) -> float:
        return float(self.values[self.mbs_ids.index(mbs_id), state])

    def is_monotone(self, atol: float = 1e-9) -> bool:
        """Non-decreasing in state on every row's exact grid points."""
        for vals, ex in zip(self.values, self.exact):
            if np.any(np.diff(vals[ex]) < -atol):
                return False
        return True

    @classmethod
    def stack(cls, tables: Sequence["IndexTable"]) -> "IndexTable":
        return cls(
            mbs_ids=tuple(i for t in tables for i in t.mbs_ids),
            values=np.vstack([t.values for t in tables]),
            exact=np.vstack([t.exact for t in tables]))

    def to_csv(self, path) -> None:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["mbs_id", "state", "index", "exact_flag"])
            for k, mbs_id in enumerate(self.mbs_ids):
                for x in range(self.n_states):
                    writer.writerow([mbs_id, x, repr(float(self.values[k, x])),
                                     int(self.exact[k, x])])
        tmp.replace(path)

    @classmethod
    def from_csv(cls, path) -> "IndexTable":
        rows: dict[int, list] = {}
        with Path(path).open(newline="") as fh:
            for rec in csv.DictReader(fh):
                rows.setdefault(int(rec["mbs_id"]), []).append(
                    (int(rec["state"]), float(rec["index"]), rec["exact_flag"] == "1"))
        ids = sorted(rows)
        values, exact = [], []
        for i in ids:
            recs = sorted(rows[i])
            if [r[0] for r in recs] != list(range(len(recs))):
                raise InvalidArgumentError(f"states of mBS {i} are not 0..B")
            values.append([r[1] for r in recs])
            exact.append([r[2] for r in recs])
        return cls(tuple(ids), np.array(values), np.array(exact))


def interpolate_grid(grid: np.ndarray, grid_values: np.ndarray,
                     n_states: int) -> np.ndarray:
    """Piecewise-linear fill on ``{0..n_states-1}``, constant above the grid."""
    return np.interp(np.arange(n_states), grid, grid_values)


def index_table(cfg: SystemConfig, mbs_index: int,
                solver: WhittleSolverConfig | None = None) -> IndexTable:
    """Index of one mBS over ``{0..B}`` from exact solves on the grid."""
    solver = solver or WhittleSolverConfig()
    grid = solver.grid_for(cfg)
    solve = direct_index if solver.method == "direct" else (
        lambda x, c, m: lambda_iteration(x, c, m, solver))
    exact_vals = np.empty(len(grid))
    for n, x in enumerate(grid):
        try:
            exact_vals[n] = solve(int(x), cfg, mbs_index)
        except WhittleAssocError as exc:
            raise type(exc)(f"mBS {mbs_index}, state {x}: {exc}") from exc
    values = interpolate_grid(grid, exact_vals, cfg.buffer + 1)
    values[grid] = exact_vals
    exact = np.zeros(cfg.buffer + 1, dtype=bool)
    exact[grid] = True
    table = IndexTable((mbs_index,), values[None, :], exact[None, :])
    if not table.is_monotone():
        logger.warning("index of mBS %d is not monotone in state on its grid", mbs_index)
    return table


def build_index_tables(cfg: SystemConfig,
                       solver: WhittleSolverConfig | None = None) -> IndexTable:
    """Index tables for every mBS of ``cfg``."""
    return IndexTable.stack([index_table(cfg, k, solver) for k in range(cfg.K)])
