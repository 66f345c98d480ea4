"""Lower-bound family of single-agent robust MDPs.

An instance has ``2*S*A`` states: "pending" states ``x_0 .. x_{SA-1}`` at
indices ``0 .. SA-1`` and absorbing rewarding states ``y_i`` at ``SA + i``.
Each pending state ``x_i`` can only move to its partner ``y_i`` or stay.
One pending state ``x_w`` is special: at step ``h`` the action ``theta[h]``
moves with probability ``p`` and the other with ``q = p - delta``. Every
other pending state favours the all-zeros base code with ``p + delta``
against ``p``. Only absorbing states pay reward 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import JointActionSpace, RobustMarkovGame
from ..errors import ConstructionFailed, ParameterRegimeViolation

_CHUNK = 1 << 16
# boundary cases such as q == sigma at eps = 1 must survive rounding
_SLACK = 1e-12


def build_theta_set(H: int) -> np.ndarray:
    """Greedy lexicographic binary code of length ``H``.

    Words are scanned in increasing order (first coordinate most significant)
    and kept when they are at Hamming distance at least ``ceil(H/8)`` from all
    kept words; scanning stops at ``ceil(exp(H/8))`` words. Row 0 is the
    all-zeros base word.
    """
    H = int(H)
    if H < 1 or H > 62:
        raise ValueError(f"H must be between 1 and 62, got {H}")
    dmin = math.ceil(H / 8)
    target = math.ceil(math.exp(H / 8))
    kept = np.zeros(0, dtype=np.uint64)
    start = 0
    end = 1 << H
    while start < end and kept.size < target:
        block = np.arange(start, min(start + _CHUNK, end), dtype=np.uint64)
        if kept.size:
            dist = np.bitwise_count(block[:, None] ^ kept[None, :]).min(axis=1)
            block = block[dist >= dmin]
        # survivors of the block may still clash with each other
        for w in block:
            if kept.size >= target:
                break
            if kept.size and np.bitwise_count(kept ^ w).min() < dmin:
                continue
            kept = np.append(kept, w)
        start += _CHUNK
    if kept.size < target:
        raise ConstructionFailed(f"greedy code for H={H} has {kept.size} words, needs {target}")
    shifts = np.arange(H - 1, -1, -1, dtype=np.uint64)
    return ((kept[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.int8)


@dataclass(frozen=True)
class HardInstanceSpec:
    S: int
    A: int
    H: int
    sigma: float
    eps: float
    w: int = 0
    theta: tuple[int, ...] | None = None
    c0: float = 0.25
    c1: float | None = None
    c2: float = 0.25
    c5: float = 0.125
    p: float = field(init=False)
    delta: float = field(init=False)

    def __post_init__(self):
        c1 = self.c0 / 2 if self.c1 is None else float(self.c1)
        object.__setattr__(self, "c1", c1)
        H, sigma, eps = int(self.H), float(self.sigma), float(self.eps)
        bad = ParameterRegimeViolation
        if self.S < 1 or self.A < 1:
            raise bad(f"S and A must be positive, got S={self.S}, A={self.A}")
        if H < 2:
            raise bad(f"H must be at least 2, got {H}")
        if not 0.0 < self.c0 < 1.0:
            raise bad(f"c0 must lie in (0, 1), got {self.c0}")
        if abs(c1 - self.c0 / 2) > 1e-15:
            raise bad(f"c1 must equal c0/2 = {self.c0 / 2}, got {c1}")
        if not 0.0 < self.c2 <= 0.25:
            raise bad(f"c2 must lie in (0, 1/4], got {self.c2}")
        if not 0.0 < sigma <= 1.0 - self.c0:
            raise bad(f"sigma must lie in (0, 1 - c0] = (0, {1 - self.c0}], got {sigma}")
        if not 0 <= self.w < self.S * self.A:
            raise bad(f"w must index one of the {self.S * self.A} pending states, got {self.w}")
        small = sigma <= self.c2 / (2 * H)
        eps_cap = self.c2 / H if small else 1.0
        if not 0.0 < eps <= eps_cap:
            raise bad(f"eps must lie in (0, {eps_cap}] for sigma={sigma}, H={H}, got {eps}")
        if small:
            p = self.c2 / H
            delta = self.c5 * eps / H**2
            delta_cap = self.c2 / (2 * H)
        else:
            p = (1 + c1 / H) * sigma
            delta = self.c5 * sigma * eps / H
            delta_cap = c1 * sigma / H
        if not 0.0 < delta <= delta_cap + _SLACK:
            raise bad(f"delta={delta} exceeds its cap {delta_cap}; lower c5 or eps")
        q = p - delta
        if not (0.0 <= q and p + delta <= 1.0 and q >= max(self.c2 / (2 * H), sigma) - _SLACK):
            raise bad(f"p={p}, delta={delta} violate 0 <= q, p + delta <= 1 or q >= max(c2/(2H), sigma)")
        theta = self.theta
        if theta is None:
            theta = tuple(int(b) for b in build_theta_set(H)[1])
        theta = tuple(int(b) for b in theta)
        if len(theta) != H or any(b not in (0, 1) for b in theta):
            raise bad(f"theta must be a 0/1 vector of length {H}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "delta", delta)

    @property
    def q(self) -> float:
        return self.p - self.delta

    @property
    def pending(self) -> int:
        return self.S * self.A

    @property
    def state_count(self) -> int:
        return 2 * self.pending


def build_hard_rmdp(spec: HardInstanceSpec) -> RobustMarkovGame:
    H, m = spec.H, spec.pending
    S = 2 * m
    P = np.zeros((H, S, 2, S))
    x = np.arange(m)
    y = m + x
    P[:, y, :, y] = 1.0
    for h in range(H):
        for a in range(2):
            # base code is all zeros
            move = np.full(m, spec.p + spec.delta if a == 0 else spec.p)
            move[spec.w] = spec.p if a == spec.theta[h] else spec.q
            P[h, x, a, y] = move
            P[h, x, a, x] = 1.0 - move
    reward = np.zeros((1, H, S, 2))
    reward[0, :, m:, :] = 1.0
    return RobustMarkovGame(H, S, JointActionSpace((2,)), reward, P, np.array([spec.sigma]), (0.0, 1.0))


@dataclass(frozen=True, eq=False)
class HardClosedForm:
    pending_actions: np.ndarray  # (H, SA) optimal action at each pending state
    gap: np.ndarray              # (H,) V(y_w) - V(x_w)
    v_special: np.ndarray        # (H + 1,) optimal value at x_w
    v_absorbing: np.ndarray      # (H + 1,) optimal value at any absorbing state


def hard_rmdp_closed_form(spec: HardInstanceSpec) -> HardClosedForm:
    """Optimal actions and values from the instance's explicit recursions.

    At the final step every action is optimal (no continuation); the
    reported action there is the code bit, as at earlier steps.
    """
    H, m = spec.H, spec.pending
    actions = np.zeros((H, m), dtype=np.int64)
    actions[:, spec.w] = spec.theta
    j = np.arange(H)
    gap = np.array([np.sum((1 - spec.p) ** j[: H - h]) for h in range(H)])
    vx = np.zeros(H + 1)
    vy = np.zeros(H + 1)
    lo = spec.p - spec.sigma
    for h in range(H - 1, -1, -1):
        vx[h] = lo * vy[h + 1] + (1 - lo) * vx[h + 1]
        vy[h] = 1 + (1 - spec.sigma) * vy[h + 1] + spec.sigma * vx[h + 1]
    return HardClosedForm(actions, gap, vx, vy)
