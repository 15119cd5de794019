"""Receding-horizon control by exhaustive search over a discretized input grid.

Each channel takes ``grid_levels`` evenly spaced values across the actuation
band, and every sequence of ``horizon`` such input vectors is rolled out
through the current Koopman model. The cheapest plan wins; exact cost ties
go to the lexicographically smallest input sequence so the result does not
depend on enumeration order.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_BAND, ReferenceTrajectory, SoftKoopError
from .koopman import KoopmanModel, predict_rollout


class NoFeasiblePlanError(SoftKoopError):
    pass


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 3
    u_min: float = DEFAULT_BAND[0]
    u_max: float = DEFAULT_BAND[1]
    grid_levels: int = 4
    Q: float | tuple = 1.0
    R: float = 0.0

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.u_min < self.u_max:
            raise ValueError("need u_min < u_max")
        if self.grid_levels < 2:
            raise ValueError("grid_levels must be at least 2")
        if np.any(np.asarray(self.Q) < 0) or self.R < 0:
            raise ValueError("weights must be nonnegative")

    @property
    def band(self) -> tuple[float, float]:
        return (self.u_min, self.u_max)

    def levels(self) -> np.ndarray:
        return np.linspace(self.u_min, self.u_max, self.grid_levels)


@dataclass(frozen=True)
class MpcSolution:
    first_input: np.ndarray
    planned_inputs: np.ndarray
    predicted_states: np.ndarray
    cost: float
    evaluations: int
    solve_time: float = 0.0


def clamp_input(u, cfg: MpcConfig) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=float), cfg.u_min, cfg.u_max)


def enumerate_plans(cfg: MpcConfig, n_input: int) -> np.ndarray:
    """All grid plans, shape ``(levels**(n_input*H), H, n_input)``, in lexicographic order."""
    combos = itertools.product(cfg.levels(), repeat=n_input * cfg.horizon)
    flat = np.fromiter(itertools.chain.from_iterable(combos), dtype=float)
    return flat.reshape(-1, cfg.horizon, n_input)


def plan_costs(model: KoopmanModel, current, references, plans, cfg: MpcConfig):
    """Tracking cost of each plan and the predicted states it produces.

    ``references`` holds ``r_{t+1} .. r_{t+H}``. Non-finite predictions cost ``inf``.
    """
    pred = predict_rollout(model, current, plans)
    err = pred - references
    Q = np.broadcast_to(np.asarray(cfg.Q, dtype=float), (pred.shape[-1],))
    cost = np.einsum("chn,n->c", err**2, Q)
    if cfg.R:
        cost = cost + cfg.R * np.sum(plans**2, axis=(1, 2))
    cost = np.where(np.isfinite(cost), cost, np.inf)
    return cost, pred


def select_plan(costs, plans) -> int:
    """Index of the minimum-cost plan, ties broken by lexicographic plan order."""
    costs = np.asarray(costs)
    best = np.min(costs)
    if not np.isfinite(best):
        raise NoFeasiblePlanError("every candidate plan produced non-finite predictions")
    tied = np.flatnonzero(costs == best)
    if tied.size == 1:
        return int(tied[0])
    flat = plans[tied].reshape(tied.size, -1)
    order = np.lexsort(flat.T[::-1])
    return int(tied[order[0]])


def solve_step(model: KoopmanModel, current, reference: ReferenceTrajectory, t: int,
               cfg: MpcConfig, plans: np.ndarray | None = None) -> MpcSolution:
    """Pick the grid plan minimizing the tracking cost from ``current`` at time ``t``.

    ``plans`` may be passed to reuse a precomputed enumeration.
    """
    t0 = time.perf_counter()
    if plans is None:
        plans = enumerate_plans(cfg, model.dictionary.n_input)
    refs = reference.window(t, cfg.horizon)
    costs, pred = plan_costs(model, current, refs, plans, cfg)
    k = select_plan(costs, plans)
    return MpcSolution(plans[k, 0].copy(), plans[k].copy(), pred[k].copy(),
                       float(costs[k]), len(plans), time.perf_counter() - t0)
