"""Backward-induction equilibrium value iteration for robust Markov games."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import JointPolicy, PolicyKind, RobustMarkovGame, validate
from .equilibrium import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    EquilibriumKind,
    EquilibriumSolution,
    StageGame,
    solve_stage,
)
from .tv import dual_inf_rows


def robust_backup(game: RobustMarkovGame, i: int, h: int, v_next: np.ndarray) -> np.ndarray:
    """``r_i + worst-case expected continuation`` for every ``(s, a)`` at step ``h``."""
    return game.reward[i, h] + dual_inf_rows(game.kernel[h], v_next, float(game.sigma[i]))


@dataclass(frozen=True, eq=False)
class NVIResult:
    q: np.ndarray            # (n, H, S, A)
    v: np.ndarray            # (n, H + 1, S), last slice zero
    policy: JointPolicy
    stage_gaps: np.ndarray   # (H, S) certified stage-game gaps
    iterations: np.ndarray   # (H, S) learner rounds per stage solve

    @property
    def max_stage_gap(self) -> float:
        return float(self.stage_gaps.max())


def dr_nvi(game: RobustMarkovGame, kind="nash", sub_tol: float = DEFAULT_TOL,
           max_iters: int = DEFAULT_MAX_ITERS, workers: int = 1) -> NVIResult:
    """Solve ``game`` stage by stage from the last step back to the first.

    ``workers > 1`` solves the per-state stage games of one step in a thread
    pool; the result is identical to the serial run.
    """
    validate(game)
    kind = EquilibriumKind(kind)
    n, H, S = game.n_agents, game.horizon, game.state_count
    acts = game.actions
    A = acts.total
    q = np.zeros((n, H, S, A))
    v = np.zeros((n, H + 1, S))
    dist = np.zeros((H, S, A))
    factors = [np.zeros((H, S, k)) for k in acts.sizes]
    gaps = np.zeros((H, S))
    iters = np.zeros((H, S), dtype=np.int64)

    def solve(s: int, h: int) -> EquilibriumSolution:
        return solve_stage(StageGame(acts, q[:, h, s, :]), kind, sub_tol, max_iters)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for h in range(H - 1, -1, -1):
            for i in range(n):
                q[i, h] = robust_backup(game, i, h, v[i, h + 1])
            if pool is None:
                sols = [solve(s, h) for s in range(S)]
            else:
                sols = list(pool.map(solve, range(S), [h] * S))
            for s, sol in enumerate(sols):
                dist[h, s] = sol.dist
                gaps[h, s] = sol.certified_gap
                iters[h, s] = sol.iterations
                if kind is EquilibriumKind.NASH:
                    for f, x in zip(factors, sol.strategies):
                        f[h, s] = x
            v[:, h] = np.einsum("isa,sa->is", q[:, h], dist[h])
    finally:
        if pool is not None:
            pool.shutdown()

    if kind is EquilibriumKind.NASH:
        policy = JointPolicy.from_factors(acts, factors)
    else:
        policy = JointPolicy(acts, dist, PolicyKind.CORRELATED)
    return NVIResult(q, v, policy, gaps, iters)
