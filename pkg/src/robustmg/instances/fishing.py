"""Two-player fishing-protection game.

Agent 0 is the fisher (0 = legal fishing, 1 = illegal fishing) and agent 1
the officer (0 = no patrol, 1 = patrol). The state counts punishments from
0 to 100. Illegal fishing below 100 advances the count with probability
``p``; everything else stays put. Stage payoffs already average over the
next state, so they depend on ``p`` but not on the state.

The robust variant lets each agent assume the worst ``p'`` in
``[p - sigma, p + sigma]``. That uncertainty acts on the parameter rather
than on individual kernel rows, so it is solved with its own recursion
instead of the TV operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import JointActionSpace, RobustMarkovGame
from ..equilibrium import StageGame, compute_pure_nash
from ..errors import NonUniqueEquilibrium

STATES = 101
LAST = STATES - 1
ACTIONS = JointActionSpace((2, 2))


def stage_payoffs(p: float) -> np.ndarray:
    """``u[i, a]`` over the four encoded profiles (0,0), (0,1), (1,0), (1,1)."""
    fisher = [-1.0, -1.0, -20.0 * p, -20.0 * p]
    officer = [1.0, 0.0, 1.0, 3.0 - 2.0 * p]
    return np.array([fisher, officer])


@dataclass(frozen=True)
class FishingGame:
    p: float
    horizon: int

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def payoffs(self, p: float | None = None) -> np.ndarray:
        return stage_payoffs(self.p if p is None else p)

    def kernel(self) -> np.ndarray:
        """Nominal kernel ``(H, S, A, S)``."""
        H, p = self.horizon, self.p
        P = np.zeros((H, STATES, ACTIONS.total, STATES))
        s = np.arange(STATES)
        P[:, s, :, s] = 1.0
        for a in range(ACTIONS.total):
            if ACTIONS.decode(a)[0] == 1:
                P[:, s[:-1], a, s[:-1]] = 1.0 - p
                P[:, s[:-1], a, s[1:]] = p
        return P

    def to_game(self, sigma: float = 0.0) -> RobustMarkovGame:
        """Export with ``p`` substituted; rewards span their actual range."""
        u = self.payoffs()
        reward = np.broadcast_to(u[:, None, None, :], (2, self.horizon, STATES, ACTIONS.total))
        return RobustMarkovGame(self.horizon, STATES, ACTIONS, reward, self.kernel(),
                                np.full(2, float(sigma)), (float(u.min()), float(u.max())))


def fishing_game(p: float, H: int) -> FishingGame:
    return FishingGame(float(p), int(H))


@dataclass(frozen=True, eq=False)
class FishingSolution:
    profiles: np.ndarray   # (H, S, 2) pure profile per step and state
    values: np.ndarray     # (2, H + 1, S)
    q: np.ndarray          # (2, H, S, 4)

    def constant_profile(self):
        """The single profile played everywhere, or ``None`` if it varies."""
        flat = self.profiles.reshape(-1, 2)
        first = flat[0]
        return tuple(int(a) for a in first) if np.all(flat == first) else None


def _unique_by_dominance(g: StageGame) -> bool:
    """True if iterated strict dominance leaves exactly one profile (so the NE is unique)."""
    u = [g.payoff[i].reshape(2, 2) for i in range(2)]
    alive = [[0, 1], [0, 1]]
    changed = True
    while changed:
        changed = False
        for i in range(2):
            j = 1 - i
            for a in list(alive[i]):
                for b in alive[i]:
                    if b == a:
                        continue
                    mine = (lambda x, y: u[i][x, y]) if i == 0 else (lambda x, y: u[i][y, x])
                    if all(mine(b, c) > mine(a, c) for c in alive[j]):
                        alive[i].remove(a)
                        changed = True
                        break
    return len(alive[0]) == 1 and len(alive[1]) == 1


def _endpoints(p: float, sigma: float) -> tuple[float, ...]:
    return (max(p - sigma, 0.0), min(p + sigma, 1.0))


_FISHING = np.array([ACTIONS.decode(a)[0] == 1 for a in range(ACTIONS.total)])
_ADVANCING = np.arange(STATES) < LAST


def _stage_q(params, nxt: np.ndarray) -> np.ndarray:
    """``Q[i, s, a]`` given next-step values ``nxt[i, s]``, worst parameter per agent and cell.

    The objective is linear in the parameter, so the interval endpoints suffice.
    """
    up = np.concatenate([nxt[:, 1:], nxt[:, -1:]], axis=1)
    cand = []
    for q in params:
        move = np.where(_FISHING[None, :] & _ADVANCING[:, None], q, 0.0)
        cont = nxt[:, :, None] + move[None] * (up - nxt)[:, :, None]
        cand.append(stage_payoffs(q)[:, None, :] + cont)
    return np.min(cand, axis=0)


def fishing_solve(p: float, H: int, robust: bool = False, sigma: float = 0.0) -> FishingSolution:
    """Pure Nash profile at every ``(h, s)`` by backward induction.

    Raises :class:`NonUniqueEquilibrium` if any stage game fails to have a
    unique equilibrium.
    """
    game = fishing_game(p, H)
    if robust and sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma!r}")
    params = _endpoints(game.p, sigma) if robust else (game.p,)
    V = np.zeros((2, H + 1, STATES))
    Q = np.zeros((2, H, STATES, 4))
    profiles = np.zeros((H, STATES, 2), dtype=np.int64)
    cache: dict[bytes, tuple[int, int]] = {}
    for h in range(H - 1, -1, -1):
        Q[:, h] = _stage_q(params, V[:, h + 1])
        for s in range(STATES):
            key = Q[:, h, s].tobytes()
            if key not in cache:
                g = StageGame(ACTIONS, Q[:, h, s])
                sol = compute_pure_nash(g)
                if sol is None or not _unique_by_dominance(g):
                    raise NonUniqueEquilibrium(f"stage game at h={h}, s={s} has no unique equilibrium")
                k = int(np.argmax(sol.dist))
                cache[key] = (k, ACTIONS.decode(k))
            k, prof = cache[key]
            profiles[h, s] = prof
            V[:, h, s] = Q[:, h, s, k]
    return FishingSolution(profiles, V, Q)


def fishing_gap_ne(p: float, H: int, profiles, robust: bool = False, sigma: float = 0.0) -> float:
    """Largest unilateral gain against a pure profile policy under the fishing model.

    ``profiles`` is ``(H, S, 2)`` (or one profile for every cell). With
    ``robust=True`` both the policy value and the deviation value use the
    worst parameter in ``[p - sigma, p + sigma]`` per agent and cell, as in
    :func:`fishing_solve`.
    """
    table = np.broadcast_to(np.asarray(profiles, dtype=np.int64), (H, STATES, 2))
    params = _endpoints(float(p), sigma) if robust else (float(p),)
    played = table[..., 0] * 2 + table[..., 1]
    s = np.arange(STATES)
    V = np.zeros((2, STATES))
    best = np.zeros((2, STATES))
    for h in range(H - 1, -1, -1):
        V = _stage_q(params, V)[:, s, played[h]]
        Qb = _stage_q(params, best)
        # agent 0 deviates over the first coordinate, agent 1 over the second
        dev0 = Qb[0][s[:, None], np.arange(2)[None, :] * 2 + table[h, :, 1:2]]
        dev1 = Qb[1][s[:, None], table[h, :, 0:1] * 2 + np.arange(2)[None, :]]
        best = np.stack([dev0.max(axis=1), dev1.max(axis=1)])
    return float(max(0.0, np.max(best - V)))


def fishing_rollout(p: float, H: int, policy, seed: int) -> int:
    """Terminal state after ``H`` steps from state 0.

    ``policy`` is either a fixed profile ``(a_0, a_1)`` or an ``(H, S, 2)``
    array of profiles such as :attr:`FishingSolution.profiles`.
    """
    gen = np.random.Generator(np.random.Philox(key=np.array([int(seed), 0], dtype=np.uint64)))
    u = gen.random(int(H))
    table = np.asarray(policy)
    s = 0
    for h in range(int(H)):
        a0 = int(table[0]) if table.ndim == 1 else int(table[h, s, 0])
        if a0 == 1 and s < LAST and u[h] < p:
            s += 1
    return s
