"""Worst-case expectation over a total-variation ball around a distribution.

For a nominal row ``p0`` and values ``v`` the quantity of interest is

    inf { q . v : q in simplex, 0.5 * |q - p0|_1 <= sigma }.

It is computed from the dual: maximize over a clip level ``alpha`` in
``[min v, max v]`` the concave piecewise-linear function
``p0 . min(v, alpha) - sigma * (alpha - min v)``. Its breakpoints are the
distinct entries of ``v``, so enumerating them is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SigmaOutOfRange


@dataclass(frozen=True)
class DualResult:
    value: float
    alpha_star: float
    worst_kernel: np.ndarray | None = None


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not (0.0 <= sigma <= 1.0):
        raise SigmaOutOfRange(f"sigma = {sigma!r} is outside [0, 1]")
    return sigma


def clip(V, alpha: float) -> np.ndarray:
    return np.minimum(np.asarray(V, dtype=float), alpha)


def dual_inf(P0, V, sigma: float, with_kernel: bool = False) -> DualResult:
    """Exact dual value and a maximizing clip level.

    With ``with_kernel=True`` the greedy primal minimizer is attached.
    """
    sigma = _check_sigma(sigma)
    P0 = np.asarray(P0, dtype=float)
    V = np.asarray(V, dtype=float)
    vmin = V.min()
    levels = np.unique(V)  # sorted; contains both interval endpoints
    objective = np.minimum(V[None, :], levels[:, None]) @ P0 - sigma * (levels - vmin)
    k = int(np.argmax(objective))
    kernel = worst_case_kernel(P0, V, sigma) if with_kernel else None
    return DualResult(float(objective[k]), float(levels[k]), kernel)


def dual_inf_rows(P, V, sigma: float) -> np.ndarray:
    """Vectorized ``dual_inf(...).value`` for every row of ``P[..., S]``.

    Uses sorted partial sums: at clip level ``v_(k)`` the clipped expectation is
    the mass-weighted sum below ``k`` plus ``v_(k)`` times the tail mass.
    """
    sigma = _check_sigma(sigma)
    P = np.asarray(P, dtype=float)
    V = np.asarray(V, dtype=float)
    order = np.argsort(V, kind="stable")
    v = V[order]
    Ps = P[..., order]
    weighted = Ps * v
    below = np.cumsum(weighted, axis=-1) - weighted
    tail = np.flip(np.cumsum(np.flip(Ps, axis=-1), axis=-1), axis=-1)
    objective = below + v * tail - sigma * (v - v[0])
    return objective.max(axis=-1)


def worst_case_kernel(P0, V, sigma: float) -> np.ndarray:
    """Greedy primal minimizer of ``q . V`` over the TV ball.

    Mass is taken from the highest-valued states first (largest index first
    among ties) and deposited on the smallest-index minimizer of ``V``.
    """
    sigma = _check_sigma(sigma)
    P0 = np.asarray(P0, dtype=float)
    V = np.asarray(V, dtype=float)
    q = P0.copy()
    if sigma == 0.0 or np.all(V == V[0]):
        return q
    sink = int(np.argmin(V))
    budget = min(sigma, 1.0 - P0[sink])
    if budget <= 0.0:
        return q
    S = V.shape[0]
    # descending value, then descending index
    donors = np.lexsort((-np.arange(S), -V))
    moved = 0.0
    for s in donors:
        if s == sink:
            continue
        take = min(q[s], budget - moved)
        if take <= 0.0:
            continue
        q[s] -= take
        moved += take
        if moved >= budget:
            break
    q[sink] += moved
    return q
