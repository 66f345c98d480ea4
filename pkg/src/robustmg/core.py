"""Domain types for tabular finite-horizon robust Markov games.

Array conventions used throughout the package (all indices 0-based):

* joint action profiles are flattened in mixed-radix order with agent 0 as
  the most significant digit (C order), so ``a = encode((a_0, ..., a_{n-1}))``;
* ``reward[i, h, s, a]`` is agent ``i``'s deterministic reward;
* ``kernel[h, s, a, s']`` is the nominal transition probability;
* value tensors have shape ``(n, H + 1, S)`` with ``V[:, H, :] == 0``;
* Q tensors have shape ``(n, H, S, A)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    GameFormatError,
    NonStochasticRow,
    NotProductDistribution,
    RewardOutOfRange,
    ShapeMismatch,
    SigmaOutOfRange,
)

ROW_TOL = 1e-12
DERIVED_TOL = 1e-10


def _frozen(x, dtype=np.float64) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class JointActionSpace:
    """Per-agent action counts and the flattened joint profile index."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(k) for k in self.sizes)
        if not sizes or any(k < 1 for k in sizes):
            raise ShapeMismatch(f"action sizes must be positive, got {self.sizes!r}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def agent_count(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return math.prod(self.sizes)

    def encode(self, profile: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(a) for a in profile), self.sizes))

    def decode(self, index: int) -> tuple[int, ...]:
        return tuple(int(a) for a in np.unravel_index(int(index), self.sizes))

    def profiles(self) -> np.ndarray:
        """All profiles as an ``(total, n)`` integer array in encoding order."""
        grids = np.indices(self.sizes).reshape(self.agent_count, -1)
        return grids.T.copy()

    def others(self, i: int) -> tuple[int, ...]:
        return self.sizes[:i] + self.sizes[i + 1:]


@dataclass(frozen=True, eq=False)
class RobustMarkovGame:
    """Finite-horizon game with per-agent TV uncertainty radii.

    Construction only checks shapes; call :func:`validate` (or use the file
    loaders, which do) to check the probabilistic invariants.
    """

    horizon: int
    state_count: int
    actions: JointActionSpace
    reward: np.ndarray
    kernel: np.ndarray
    sigma: np.ndarray
    reward_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not isinstance(self.actions, JointActionSpace):
            object.__setattr__(self, "actions", JointActionSpace(tuple(self.actions)))
        H, S = int(self.horizon), int(self.state_count)
        if H < 1 or S < 1:
            raise ShapeMismatch(f"horizon and state_count must be positive (H={H}, S={S})")
        object.__setattr__(self, "horizon", H)
        object.__setattr__(self, "state_count", S)
        n, A = self.actions.agent_count, self.actions.total
        reward = _frozen(self.reward)
        kernel = _frozen(self.kernel)
        sigma = _frozen(np.atleast_1d(self.sigma))
        if reward.shape != (n, H, S, A):
            raise ShapeMismatch(f"reward shape {reward.shape} != {(n, H, S, A)}")
        if kernel.shape != (H, S, A, S):
            raise ShapeMismatch(f"kernel shape {kernel.shape} != {(H, S, A, S)}")
        if sigma.shape != (n,):
            raise ShapeMismatch(f"sigma shape {sigma.shape} != {(n,)}")
        lo, hi = (float(v) for v in self.reward_range)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "reward_range", (lo, hi))

    @property
    def n_agents(self) -> int:
        return self.actions.agent_count

    @property
    def normalized(self) -> bool:
        return self.reward_range == (0.0, 1.0)

    def with_kernel(self, kernel: np.ndarray) -> "RobustMarkovGame":
        return RobustMarkovGame(self.horizon, self.state_count, self.actions,
                                self.reward, kernel, self.sigma, self.reward_range)

    def with_sigma(self, sigma) -> "RobustMarkovGame":
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (self.n_agents,))
        return RobustMarkovGame(self.horizon, self.state_count, self.actions,
                                self.reward, self.kernel, sigma, self.reward_range)


def validate(game: RobustMarkovGame) -> None:
    """Raise if any kernel row, reward or radius violates its invariant."""
    sig = game.sigma
    bad = np.flatnonzero(~((sig >= 0.0) & (sig <= 1.0)))
    if bad.size:
        i = int(bad[0])
        raise SigmaOutOfRange(f"sigma[{i}] = {sig[i]!r} is outside [0, 1]")

    P = game.kernel
    if not np.all(np.isfinite(P)):
        h, s, a, _ = np.argwhere(~np.isfinite(P))[0]
        raise NonStochasticRow(int(h), int(s), int(a), float(P[h, s, a].sum()), "non-finite entry")
    if np.any(P < 0.0):
        h, s, a, _ = np.argwhere(P < 0.0)[0]
        raise NonStochasticRow(int(h), int(s), int(a), float(P[h, s, a].sum()), "negative entry")
    sums = P.sum(axis=-1)
    off = np.abs(sums - 1.0) > ROW_TOL
    if np.any(off):
        h, s, a = np.argwhere(off)[0]
        raise NonStochasticRow(int(h), int(s), int(a), float(sums[h, s, a]))

    lo, hi = game.reward_range
    if not (lo <= hi):
        raise RewardOutOfRange(f"reward_range {game.reward_range} is empty")
    r = game.reward
    outside = ~np.isfinite(r) | (r < lo) | (r > hi)
    if np.any(outside):
        idx = tuple(int(k) for k in np.argwhere(outside)[0])
        raise RewardOutOfRange(f"reward{list(idx)} = {r[idx]!r} outside [{lo}, {hi}]")


class PolicyKind(str, enum.Enum):
    PRODUCT = "product"
    CORRELATED = "correlated"


@dataclass(frozen=True, eq=False)
class JointPolicy:
    """Markov joint policy ``dist[h, s, a]`` over flattened joint profiles.

    Product policies also keep their per-agent factors, each of shape
    ``(H, S, A_i)``.
    """

    actions: JointActionSpace
    dist: np.ndarray
    kind: PolicyKind = PolicyKind.CORRELATED
    factors: tuple[np.ndarray, ...] | None = field(default=None)

    def __post_init__(self):
        kind = PolicyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        dist = _frozen(self.dist)
        if dist.ndim != 3 or dist.shape[-1] != self.actions.total:
            raise ShapeMismatch(f"policy shape {dist.shape} incompatible with {self.actions.total} profiles")
        if np.any(dist < 0.0) or np.any(np.abs(dist.sum(-1) - 1.0) > ROW_TOL):
            raise ShapeMismatch("policy rows must be distributions (sum 1 within 1e-12, entries >= 0)")
        object.__setattr__(self, "dist", dist)
        if kind is PolicyKind.PRODUCT:
            factors = self.factors
            if factors is None:
                factors = tuple(_marginal(dist, self.actions, i) for i in range(self.actions.agent_count))
            factors = tuple(_frozen(f) for f in factors)
            rebuilt = _outer(factors, self.actions)
            err = float(np.max(np.abs(rebuilt - dist))) if dist.size else 0.0
            if err > DERIVED_TOL:
                raise NotProductDistribution(f"policy is not a product of its marginals (max err {err:.3g})")
            object.__setattr__(self, "factors", factors)
        else:
            object.__setattr__(self, "factors", None)

    @property
    def horizon(self) -> int:
        return self.dist.shape[0]

    @property
    def state_count(self) -> int:
        return self.dist.shape[1]

    @classmethod
    def from_factors(cls, actions: JointActionSpace, factors: Sequence[np.ndarray]) -> "JointPolicy":
        factors = tuple(np.asarray(f, dtype=float) for f in factors)
        return cls(actions, _outer(factors, actions), PolicyKind.PRODUCT, factors)

    @classmethod
    def deterministic(cls, actions: JointActionSpace, profile_index: np.ndarray) -> "JointPolicy":
        """Product policy playing ``profile_index[h, s]`` with probability one."""
        idx = np.asarray(profile_index, dtype=np.int64)
        H, S = idx.shape
        per_agent = np.unravel_index(idx, actions.sizes)
        factors = []
        for i, k in enumerate(actions.sizes):
            f = np.zeros((H, S, k))
            np.put_along_axis(f, per_agent[i][..., None], 1.0, axis=-1)
            factors.append(f)
        return cls.from_factors(actions, factors)

    @classmethod
    def uniform(cls, actions: JointActionSpace, horizon: int, state_count: int) -> "JointPolicy":
        return cls.from_factors(actions, [np.full((horizon, state_count, k), 1.0 / k) for k in actions.sizes])


def _outer(factors: Sequence[np.ndarray], actions: JointActionSpace) -> np.ndarray:
    out = factors[0]
    for f in factors[1:]:
        out = (out[..., :, None] * f[..., None, :]).reshape(*out.shape[:-1], -1)
    if out.shape[-1] != actions.total:
        raise ShapeMismatch("factor sizes do not match the joint action space")
    return out


def _marginal(dist: np.ndarray, actions: JointActionSpace, i: int) -> np.ndarray:
    lead = dist.shape[:-1]
    t = dist.reshape(*lead, *actions.sizes)
    axes = tuple(len(lead) + j for j in range(actions.agent_count) if j != i)
    return t.sum(axis=axes)


def marginal_excluding(policy: JointPolicy, h: int, s: int, i: int) -> np.ndarray:
    """Distribution of the other agents' sub-profile at ``(h, s)``.

    The result is flattened in mixed-radix order over ``A_{-i}`` (agent order
    preserved, agent ``i`` removed).
    """
    sizes = policy.actions.sizes
    t = policy.dist[h, s].reshape(sizes)
    return t.sum(axis=i).reshape(-1)


def others_marginals(policy: JointPolicy, i: int) -> np.ndarray:
    """``marginal_excluding`` for every ``(h, s)`` at once: shape ``(H, S, |A_{-i}|)``."""
    H, S = policy.dist.shape[:2]
    t = policy.dist.reshape(H, S, *policy.actions.sizes)
    return t.sum(axis=2 + i).reshape(H, S, -1)


# ---------------------------------------------------------------------------
# JSON file format


def game_to_dict(game: RobustMarkovGame) -> dict:
    return {
        "horizon": game.horizon,
        "state_count": game.state_count,
        "action_sizes": list(game.actions.sizes),
        "sigma": game.sigma.tolist(),
        "reward_range": list(game.reward_range),
        "reward": game.reward.tolist(),
        "kernel": game.kernel.tolist(),
    }


def game_from_dict(d: dict) -> RobustMarkovGame:
    required = ("horizon", "state_count", "action_sizes", "sigma", "reward_range", "reward", "kernel")
    missing = [k for k in required if k not in d]
    if missing:
        raise GameFormatError(f"game file is missing fields: {', '.join(missing)}")
    try:
        game = RobustMarkovGame(
            horizon=int(d["horizon"]),
            state_count=int(d["state_count"]),
            actions=JointActionSpace(tuple(d["action_sizes"])),
            reward=np.asarray(d["reward"], dtype=float),
            kernel=np.asarray(d["kernel"], dtype=float),
            sigma=np.asarray(d["sigma"], dtype=float),
            reward_range=tuple(d["reward_range"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ShapeMismatch):
            raise
        raise GameFormatError(f"malformed game file: {exc}") from exc
    return game


def parse_json(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def save_game(game: RobustMarkovGame, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game)) + "\n")


def load_game(path) -> RobustMarkovGame:
    """Read and validate a game file."""
    path = Path(path)
    game = game_from_dict(parse_json(path.read_text(), str(path)))
    validate(game)
    return game


def policy_to_dict(policy: JointPolicy) -> dict:
    d = {
        "kind": policy.kind.value,
        "action_sizes": list(policy.actions.sizes),
        "dist": policy.dist.tolist(),
    }
    if policy.factors is not None:
        d["factors"] = [f.tolist() for f in policy.factors]
    return d


def policy_from_dict(d: dict) -> JointPolicy:
    try:
        actions = JointActionSpace(tuple(d["action_sizes"]))
        kind = PolicyKind(d["kind"])
        if kind is PolicyKind.PRODUCT and "factors" in d:
            return JointPolicy.from_factors(actions, [np.asarray(f, dtype=float) for f in d["factors"]])
        return JointPolicy(actions, np.asarray(d["dist"], dtype=float), kind)
    except KeyError as exc:
        raise GameFormatError(f"policy is missing field {exc}") from exc
