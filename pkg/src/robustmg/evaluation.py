"""Robust values of a fixed joint policy and the deviation gaps built on them.

Every function here works on a fully specified model (exact or empirical).
Value tensors follow the core convention: shape ``(..., H + 1, S)`` with
the last step identically zero.
"""

from __future__ import annotations

import numpy as np

from .core import JointPolicy, PolicyKind, RobustMarkovGame, others_marginals
from .errors import NotProductDistribution
from .nvi import robust_backup


def _split(game: RobustMarkovGame, i: int, x: np.ndarray) -> np.ndarray:
    """Reshape a trailing joint-profile axis into ``(A_i, |A_{-i}|)``."""
    sizes = game.actions.sizes
    lead = x.shape[:-1]
    t = x.reshape(*lead, *sizes)
    t = np.moveaxis(t, len(lead) + i, len(lead))
    return t.reshape(*lead, sizes[i], -1)


def robust_policy_eval(game: RobustMarkovGame, policy: JointPolicy) -> np.ndarray:
    """Worst-case value of ``policy`` for every agent: shape ``(n, H + 1, S)``."""
    n, H, S = game.n_agents, game.horizon, game.state_count
    V = np.zeros((n, H + 1, S))
    for h in range(H - 1, -1, -1):
        for i in range(n):
            Q = robust_backup(game, i, h, V[i, h + 1])
            V[i, h] = np.einsum("sa,sa->s", policy.dist[h], Q)
    return V


def robust_best_response(game: RobustMarkovGame, policy: JointPolicy, i: int):
    """Best independent deviation of agent ``i`` against the others' marginal play.

    Returns ``(actions[h, s], V[h, s])``; the deviation is deterministic with
    ties resolved to the smallest action.
    """
    H, S = game.horizon, game.state_count
    m = others_marginals(policy, i)
    V = np.zeros((H + 1, S))
    best = np.zeros((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        W = _split(game, i, robust_backup(game, i, h, V[h + 1]))
        B = np.einsum("sbr,sr->sb", W, m[h])
        best[h] = np.argmax(B, axis=1)
        V[h] = B[np.arange(S), best[h]]
    return best, V


def best_strategy_modification(game: RobustMarkovGame, policy: JointPolicy, i: int):
    """Best swap map ``recommended -> played`` for agent ``i`` at every ``(h, s)``.

    Returns ``(swap[h, s, a_i], V[h, s])``. Recommendations that are never made
    map to themselves; otherwise ties go to the smallest action.
    """
    H, S = game.horizon, game.state_count
    Ai = game.actions.sizes[i]
    V = np.zeros((H + 1, S))
    swap = np.tile(np.arange(Ai), (H, S, 1))
    rows = np.arange(S)[:, None]
    cols = np.arange(Ai)[None, :]
    for h in range(H - 1, -1, -1):
        W = _split(game, i, robust_backup(game, i, h, V[h + 1]))
        X = _split(game, i, policy.dist[h])
        # M[s, a, b]: value when recommendation a is replaced by b
        M = np.einsum("sar,sbr->sab", X, W)
        recommended = X.sum(axis=2) > 0.0
        choice = np.where(recommended, np.argmax(M, axis=2), cols)
        swap[h] = choice
        V[h] = M[rows, cols, choice].sum(axis=1)
    return swap, V


def _gap(game: RobustMarkovGame, policy: JointPolicy, deviate) -> float:
    base = robust_policy_eval(game, policy)
    gap = 0.0
    for i in range(game.n_agents):
        _, V = deviate(game, policy, i)
        gap = max(gap, float(np.max(V[0] - base[i, 0])))
    return max(gap, 0.0)


def gap_ne(game: RobustMarkovGame, policy: JointPolicy) -> float:
    if policy.kind is not PolicyKind.PRODUCT:
        raise NotProductDistribution("the Nash gap is defined for product policies only")
    return _gap(game, policy, robust_best_response)


def gap_cce(game: RobustMarkovGame, policy: JointPolicy) -> float:
    return _gap(game, policy, robust_best_response)


def gap_ce(game: RobustMarkovGame, policy: JointPolicy) -> float:
    return _gap(game, policy, best_strategy_modification)


def policy_gap(game: RobustMarkovGame, policy: JointPolicy, kind) -> float:
    """Dispatch on an equilibrium kind name (``nash``, ``ce`` or ``cce``)."""
    kind = str(getattr(kind, "value", kind))
    return {"nash": gap_ne, "ce": gap_ce, "cce": gap_cce}[kind](game, policy)
