"""Equilibria of one-shot (stage) games and their incentive-gap certificates.

Payoffs are stored flattened over joint profiles, ``payoff[i, a]``, in the
same mixed-radix order as :class:`~robustmg.core.JointActionSpace`.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import DERIVED_TOL, JointActionSpace, _outer
from .errors import NashIntractable, NotProductDistribution, NumericalFailure, ShapeMismatch

PURE_TOL = 1e-12
NASH_2P_TOL = 1e-8
NASH_2P_MAX_ACTIONS = 6
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITERS = 100_000
_CHECK_EVERY = 16


class EquilibriumKind(str, enum.Enum):
    NASH = "nash"
    CE = "ce"
    CCE = "cce"


@dataclass(frozen=True, eq=False)
class StageGame:
    actions: JointActionSpace
    payoff: np.ndarray

    def __post_init__(self):
        if not isinstance(self.actions, JointActionSpace):
            object.__setattr__(self, "actions", JointActionSpace(tuple(self.actions)))
        u = np.array(self.payoff, dtype=float)
        expected = (self.actions.agent_count, self.actions.total)
        if u.shape != expected:
            # also accept the unflattened (n, A_1, ..., A_n) layout
            if u.shape == (expected[0], *self.actions.sizes):
                u = u.reshape(expected)
            else:
                raise ShapeMismatch(f"payoff shape {u.shape} != {expected}")
        if not np.all(np.isfinite(u)):
            raise ShapeMismatch("stage payoffs must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "payoff", u)

    @classmethod
    def from_tensors(cls, *tensors) -> "StageGame":
        """Build from per-agent payoff tensors of shape ``(A_1, ..., A_n)``."""
        sizes = np.shape(tensors[0])
        return cls(JointActionSpace(sizes), np.stack([np.asarray(t, float).reshape(-1) for t in tensors]))

    @property
    def n_agents(self) -> int:
        return self.actions.agent_count

    def _deviation_matrix(self, i: int) -> np.ndarray:
        """Agent ``i``'s payoff as ``(A_i, |A_{-i}|)``: own action by the others' sub-profile."""
        t = self.payoff[i].reshape(self.actions.sizes)
        return np.moveaxis(t, i, 0).reshape(self.actions.sizes[i], -1)


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    dist: np.ndarray
    certified_gap: float
    kind: EquilibriumKind
    iterations: int
    converged: bool = True
    strategies: tuple[np.ndarray, ...] | None = None


def _as_dist(g: StageGame, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != g.actions.total:
        raise ShapeMismatch(f"distribution has {x.shape[0]} entries, expected {g.actions.total}")
    return x


def _recommendation_matrix(g: StageGame, x: np.ndarray, i: int) -> np.ndarray:
    return np.moveaxis(x.reshape(g.actions.sizes), i, 0).reshape(g.actions.sizes[i], -1)


def stage_gap_cce(g: StageGame, x) -> float:
    """Largest gain any agent gets by committing to one action before play."""
    x = _as_dist(g, x)
    best = 0.0
    for i in range(g.n_agents):
        U = g._deviation_matrix(i)
        others = _recommendation_matrix(g, x, i).sum(axis=0)
        gain = float(np.max(U @ others) - x @ g.payoff[i])
        best = max(best, gain)
    return best


def stage_gap_ce(g: StageGame, x) -> float:
    """Largest gain from a swap map applied to the recommended action."""
    x = _as_dist(g, x)
    best = 0.0
    for i in range(g.n_agents):
        U = g._deviation_matrix(i)
        X = _recommendation_matrix(g, x, i)
        # swap[a, b]: value of playing b whenever a is recommended
        swap = X @ U.T
        gain = float(np.sum(swap.max(axis=1) - np.diag(swap)))
        best = max(best, gain)
    return best


def _product_factors(g: StageGame, x: np.ndarray) -> tuple[np.ndarray, ...]:
    t = x.reshape(g.actions.sizes)
    n = g.n_agents
    return tuple(t.sum(axis=tuple(j for j in range(n) if j != i)) for i in range(n))


def stage_gap_ne(g: StageGame, x) -> float:
    x = _as_dist(g, x)
    rebuilt = _outer(_product_factors(g, x), g.actions)
    err = float(np.max(np.abs(rebuilt - x)))
    if err > DERIVED_TOL:
        raise NotProductDistribution(f"distribution is not a product of its marginals (max err {err:.3g})")
    return stage_gap_cce(g, x)


def _point_mass(total: int, k: int) -> np.ndarray:
    x = np.zeros(total)
    x[k] = 1.0
    return x


def _pure_solution(g: StageGame, k: int, kind: EquilibriumKind) -> EquilibriumSolution:
    x = _point_mass(g.actions.total, k)
    factors = tuple(_point_mass(size, a) for size, a in zip(g.actions.sizes, g.actions.decode(k)))
    gap = stage_gap_ne(g, x) if kind is EquilibriumKind.NASH else _certify(g, x, kind)
    return EquilibriumSolution(x, gap, kind, 0, True, factors)


def pure_nash_profiles(g: StageGame) -> np.ndarray:
    """Flat indices of every pure profile with no strictly improving deviation."""
    sizes = g.actions.sizes
    ok = np.ones(sizes, dtype=bool)
    for i in range(g.n_agents):
        t = g.payoff[i].reshape(sizes)
        ok &= t >= t.max(axis=i, keepdims=True) - PURE_TOL
    return np.flatnonzero(ok.reshape(-1))


def compute_pure_nash(g: StageGame) -> EquilibriumSolution | None:
    """First pure Nash profile in encoding order, or ``None`` when there is none."""
    found = pure_nash_profiles(g)
    if found.size == 0:
        return None
    return _pure_solution(g, int(found[0]), EquilibriumKind.NASH)


def _support_pairs(m: int, k: int):
    """Support pairs, equal sizes first (smallest first), then unequal ones."""
    sizes = sorted(itertools.product(range(1, m + 1), range(1, k + 1)),
                   key=lambda ab: (ab[0] != ab[1], max(ab), ab))
    for a, b in sizes:
        for I in itertools.combinations(range(m), a):
            for J in itertools.combinations(range(k), b):
                yield I, J


def _indifference(M: np.ndarray) -> np.ndarray | None:
    """Mixed strategy over the columns of ``M`` equalizing all its rows.

    Solves ``M y = v 1`` and ``sum(y) = 1`` for ``(y, v)``.
    """
    r, c = M.shape
    system = np.zeros((r + 1, c + 1))
    system[:r, :c] = M
    system[:r, c] = -1.0
    system[r, :c] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    if r == c:
        try:
            sol = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            return None
    else:
        sol = np.linalg.lstsq(system, rhs, rcond=None)[0]
        if np.max(np.abs(system @ sol - rhs)) > 1e-9:
            return None
    y = sol[:c]
    if not np.all(np.isfinite(y)) or np.any(y < -1e-12):
        return None
    y = np.clip(y, 0.0, None)
    return y / y.sum()


def compute_nash_2p(g: StageGame) -> EquilibriumSolution:
    """Mixed Nash equilibrium of a bimatrix game by support enumeration."""
    if g.n_agents != 2 or max(g.actions.sizes) > NASH_2P_MAX_ACTIONS:
        raise NashIntractable(f"support enumeration needs 2 agents with at most "
                              f"{NASH_2P_MAX_ACTIONS} actions each, got sizes {g.actions.sizes}")
    m, k = g.actions.sizes
    A = g.payoff[0].reshape(m, k)
    B = g.payoff[1].reshape(m, k)
    tried = 0
    for I, J in _support_pairs(m, k):
        tried += 1
        y_sub = _indifference(A[np.ix_(I, J)])
        if y_sub is None:
            continue
        x_sub = _indifference(B[np.ix_(I, J)].T)
        if x_sub is None:
            continue
        x = np.zeros(m)
        y = np.zeros(k)
        x[list(I)] = x_sub
        y[list(J)] = y_sub
        dist = np.outer(x, y).reshape(-1)
        gap = stage_gap_ne(g, dist)
        if gap <= NASH_2P_TOL:
            return EquilibriumSolution(dist, gap, EquilibriumKind.NASH, tried, True, (x, y))
    raise NumericalFailure(f"no support pair certified a Nash equilibrium for sizes {(m, k)}")


def compute_nash(g: StageGame) -> EquilibriumSolution:
    sol = compute_pure_nash(g)
    if sol is not None:
        return sol
    if g.n_agents == 2 and max(g.actions.sizes) <= NASH_2P_MAX_ACTIONS:
        return compute_nash_2p(g)
    raise NashIntractable(f"stage game with sizes {g.actions.sizes} has no pure Nash equilibrium "
                          "and mixed Nash is only supported for two agents; use CE or CCE")


def _certify(g: StageGame, x: np.ndarray, kind: EquilibriumKind) -> float:
    if kind is EquilibriumKind.CE:
        return stage_gap_ce(g, x)
    if kind is EquilibriumKind.CCE:
        return stage_gap_cce(g, x)
    return stage_gap_ne(g, x)


def _kernel_inputs(g: StageGame):
    sizes = np.asarray(g.actions.sizes, dtype=np.int64)
    stride = np.ones_like(sizes)
    for j in range(len(sizes) - 2, -1, -1):
        stride[j] = stride[j + 1] * sizes[j + 1]
    prof = g.actions.profiles().astype(np.int64)
    U = np.ascontiguousarray(g.payoff)
    lo = U.min(axis=1, keepdims=True)
    span = U.max(axis=1, keepdims=True) - lo
    Un = np.divide(U - lo, span, out=np.zeros_like(U), where=span > 0)
    return U, Un, prof, sizes, stride


def _run_dynamics(g: StageGame, kind: EquilibriumKind, tol: float, max_iters: int) -> EquilibriumSolution:
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    max_iters = int(max_iters)
    if max_iters < 1:
        raise ValueError(f"max_iters must be at least 1, got {max_iters}")
    pure = compute_pure_nash(g)
    if pure is not None:
        return _pure_solution(g, int(np.argmax(pure.dist)), kind)
    loop = _kernels.internal_regret_matching if kind is EquilibriumKind.CE else _kernels.multiplicative_weights
    total, t = loop(*_kernel_inputs(g), float(tol), max_iters, _CHECK_EVERY)
    x = total / total.sum()
    gap = _certify(g, x, kind)
    return EquilibriumSolution(x, gap, kind, int(t), gap <= tol)


def compute_cce(g: StageGame, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> EquilibriumSolution:
    """Coarse correlated equilibrium from time-averaged exponential-weights play.

    A pure Nash profile, when one exists, is returned directly as a point mass.
    """
    return _run_dynamics(g, EquilibriumKind.CCE, tol, max_iters)


def compute_ce(g: StageGame, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> EquilibriumSolution:
    """Correlated equilibrium from time-averaged internal-regret matching."""
    return _run_dynamics(g, EquilibriumKind.CE, tol, max_iters)


def solve_stage(g: StageGame, kind, tol: float = DEFAULT_TOL,
                max_iters: int = DEFAULT_MAX_ITERS) -> EquilibriumSolution:
    kind = EquilibriumKind(kind)
    if kind is EquilibriumKind.NASH:
        return compute_nash(g)
    if kind is EquilibriumKind.CE:
        return compute_ce(g, tol, max_iters)
    return compute_cce(g, tol, max_iters)
