"""Compiled inner loops for the regret-based stage-game solvers.

Stage games are passed flattened: ``U[i, k]`` is agent ``i``'s payoff at
joint profile ``k``; ``prof[k, j]`` is agent ``j``'s action in profile ``k``
and ``stride[j]`` the flat-index stride of agent ``j``'s digit. Strategies
live in a padded ``(n, max A_i)`` array.

The gap computed here only decides when to stop; the returned distribution
is certified again by the numpy certifiers in :mod:`robustmg.equilibrium`.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _expected_payoffs(Un, x, prof, sizes, u):
    n, total = Un.shape
    for i in range(n):
        for b in range(sizes[i]):
            u[i, b] = 0.0
    for k in range(total):
        for i in range(n):
            w = 1.0
            for j in range(n):
                if j != i:
                    w *= x[j, prof[k, j]]
            u[i, prof[k, i]] += w * Un[i, k]


@njit(cache=True, nogil=True)
def _accumulate(avg, x, prof, weight=1.0):
    total, n = prof.shape
    for k in range(total):
        w = weight
        for j in range(n):
            w *= x[j, prof[k, j]]
        avg[k] += w


@njit(cache=True, nogil=True)
def cce_gap(U, dist, prof, sizes, stride):
    n, total = U.shape
    best = 0.0
    for i in range(n):
        cur = 0.0
        for k in range(total):
            cur += dist[k] * U[i, k]
        top = -np.inf
        for b in range(sizes[i]):
            dev = 0.0
            for k in range(total):
                kk = k + (b - prof[k, i]) * stride[i]
                dev += dist[k] * U[i, kk]
            if dev > top:
                top = dev
        if top - cur > best:
            best = top - cur
    return best


@njit(cache=True, nogil=True)
def ce_gap(U, dist, prof, sizes, stride):
    n, total = U.shape
    best = 0.0
    amax = 0
    for i in range(n):
        amax = max(amax, sizes[i])
    M = np.zeros((amax, amax))
    for i in range(n):
        A = sizes[i]
        for a in range(A):
            for b in range(A):
                M[a, b] = 0.0
        for k in range(total):
            a = prof[k, i]
            for b in range(A):
                kk = k + (b - a) * stride[i]
                M[a, b] += dist[k] * (U[i, kk] - U[i, k])
        g = 0.0
        for a in range(A):
            top = 0.0
            for b in range(A):
                if M[a, b] > top:
                    top = M[a, b]
            g += top
        if g > best:
            best = g
    return best


@njit(cache=True, nogil=True)
def multiplicative_weights(U, Un, prof, sizes, stride, tol, max_iters, check_every):
    """Simultaneous exponential weights with step sqrt(8 ln A_i / t).

    Returns the running sum of the product of current strategies and the
    number of rounds played.
    """
    n, total = U.shape
    amax = 0
    for i in range(n):
        amax = max(amax, sizes[i])
    x = np.zeros((n, amax))
    for i in range(n):
        for b in range(sizes[i]):
            x[i, b] = 1.0 / sizes[i]
    cum = np.zeros((n, amax))
    u = np.zeros((n, amax))
    avg = np.zeros(total)
    dist = np.zeros(total)
    t = 0
    while t < max_iters:
        _accumulate(avg, x, prof)
        _expected_payoffs(Un, x, prof, sizes, u)
        t += 1
        for i in range(n):
            A = sizes[i]
            eta = math.sqrt(8.0 * math.log(A) / (t + 1)) if A > 1 else 0.0
            top = -np.inf
            for b in range(A):
                cum[i, b] += u[i, b]
                if eta * cum[i, b] > top:
                    top = eta * cum[i, b]
            z = 0.0
            for b in range(A):
                x[i, b] = math.exp(eta * cum[i, b] - top)
                z += x[i, b]
            for b in range(A):
                x[i, b] /= z
        if t % check_every == 0 or t == max_iters:
            for k in range(total):
                dist[k] = avg[k] / t
            if cce_gap(U, dist, prof, sizes, stride) <= tol:
                break
    return avg, t


@njit(cache=True, nogil=True)
def _stationary(R, A, prev, out):
    """Stationary distribution of the chain driven by positive regrets R[a, b]."""
    L = np.zeros((A, A))
    anypos = False
    for a in range(A):
        rs = 0.0
        for b in range(A):
            if b != a and R[a, b] > 0.0:
                L[a, b] = R[a, b]
                rs += R[a, b]
                anypos = True
        L[a, a] = -rs
    if not anypos:
        for a in range(A):
            out[a] = prev[a]
        return
    # Solve L^T q = 0 with the last equation replaced by sum(q) = 1.
    M = np.zeros((A, A + 1))
    for r in range(A):
        for c in range(A):
            M[r, c] = L[c, r]
    for c in range(A):
        M[A - 1, c] = 1.0
    M[A - 1, A] = 1.0
    ok = True
    for col in range(A):
        piv = col
        for r in range(col + 1, A):
            if abs(M[r, col]) > abs(M[piv, col]):
                piv = r
        if abs(M[piv, col]) < 1e-300:
            ok = False
            break
        if piv != col:
            for c in range(A + 1):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
        for r in range(col + 1, A):
            f = M[r, col] / M[col, col]
            if f != 0.0:
                for c in range(col, A + 1):
                    M[r, c] -= f * M[col, c]
    if ok:
        for r in range(A - 1, -1, -1):
            acc = M[r, A]
            for c in range(r + 1, A):
                acc -= M[r, c] * out[c]
            out[r] = acc / M[r, r]
        z = 0.0
        for a in range(A):
            if not (out[a] > -1e-9):  # also catches NaN
                ok = False
                break
            if out[a] < 0.0:
                out[a] = 0.0
            z += out[a]
        if ok and z > 0.0:
            for a in range(A):
                out[a] /= z
            return
    # Reducible chain: power iteration from the previous strategy.
    mu = 0.0
    for a in range(A):
        mu = max(mu, -L[a, a])
    mu *= 2.0
    q = np.empty(A)
    for a in range(A):
        q[a] = prev[a]
    nxt = np.empty(A)
    for _ in range(2000):
        for b in range(A):
            nxt[b] = q[b]
            for a in range(A):
                nxt[b] += q[a] * L[a, b] / mu
        for b in range(A):
            q[b] = nxt[b]
    z = 0.0
    for a in range(A):
        q[a] = max(q[a], 0.0)
        z += q[a]
    for a in range(A):
        out[a] = q[a] / z


@njit(cache=True, nogil=True)
def internal_regret_matching(U, Un, prof, sizes, stride, tol, max_iters, check_every):
    """Deterministic internal-regret matching on mixed strategies.

    Each agent plays the stationary distribution of the Markov chain whose
    off-diagonal rates are its cumulative internal regrets. Regrets are kept
    at their positive part after every update and round ``t`` enters the
    average with weight ``t``; both speed up convergence in practice and the
    stopping rule only trusts the measured gap.
    """
    n, total = U.shape
    amax = 0
    for i in range(n):
        amax = max(amax, sizes[i])
    x = np.zeros((n, amax))
    for i in range(n):
        for b in range(sizes[i]):
            x[i, b] = 1.0 / sizes[i]
    R = np.zeros((n, amax, amax))
    u = np.zeros((n, amax))
    avg = np.zeros(total)
    dist = np.zeros(total)
    newx = np.zeros(amax)
    t = 0
    while t < max_iters:
        _accumulate(avg, x, prof, float(t + 1))
        _expected_payoffs(Un, x, prof, sizes, u)
        t += 1
        for i in range(n):
            A = sizes[i]
            for a in range(A):
                for b in range(A):
                    r = R[i, a, b] + x[i, a] * (u[i, b] - u[i, a])
                    R[i, a, b] = r if r > 0.0 else 0.0
            _stationary(R[i], A, x[i], newx)
            for a in range(A):
                x[i, a] = newx[a]
        if t % check_every == 0 or t == max_iters:
            z = t * (t + 1) / 2.0
            for k in range(total):
                dist[k] = avg[k] / z
            if ce_gap(U, dist, prof, sizes, stride) <= tol:
                break
    return avg, t
