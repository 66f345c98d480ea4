import itertools
import math

import numpy as np
import pytest

from robustmg.core import validate
from robustmg.errors import NonUniqueEquilibrium, ParameterRegimeViolation
from robustmg.instances import (HardInstanceSpec, build_hard_rmdp, build_theta_set, fishing_game,
                                fishing_rollout, fishing_solve, hard_rmdp_closed_form)
from robustmg.instances.fishing import stage_payoffs
from robustmg.nvi import dr_nvi


def test_fishing_payoffs():
    assert stage_payoffs(0.049)[1, 3] == pytest.approx(2.902)
    assert stage_payoffs(0.051)[0, 2] == pytest.approx(-1.02)
    assert stage_payoffs(0.0)[0, 2:].tolist() == [0.0, 0.0]
    assert stage_payoffs(0.3)[0, :2].tolist() == [-1.0, -1.0]


def test_fishing_kernel():
    P = fishing_game(0.2, 2).kernel()
    assert P[0, 5, 2, 6] == pytest.approx(0.2) and P[0, 5, 2, 5] == pytest.approx(0.8)
    assert P[0, 5, 1, 5] == 1.0           # legal fishing never moves
    assert P[1, 100, 3, 100] == 1.0       # revoked license is absorbing
    validate(fishing_game(0.2, 2).to_game(0.01))


@pytest.mark.parametrize("p, profile", [(0.049, (1, 1)), (0.051, (0, 0))])
def test_standard_equilibria(p, profile):
    assert fishing_solve(p, 100).constant_profile() == profile


def test_robust_equilibrium_identical_across_cities():
    a = fishing_solve(0.049, 100, robust=True, sigma=0.005)
    b = fishing_solve(0.051, 100, robust=True, sigma=0.005)
    assert a.constant_profile() == b.constant_profile() == (0, 0)


def test_knife_edge_parameter_has_no_unique_equilibrium():
    with pytest.raises(NonUniqueEquilibrium):
        fishing_solve(0.05, 3)


def test_rollouts():
    assert all(fishing_rollout(0.049, 10_000, (0, 0), s) == 0 for s in range(5))
    assert fishing_rollout(0.0, 10_000, (1, 1), 0) == 0
    assert fishing_rollout(0.049, 10_000, (1, 1), 0) == 100
    assert fishing_rollout(0.049, 10_000, (1, 1), 3) == fishing_rollout(0.049, 10_000, (1, 1), 3)


def hamming_ok(theta, d):
    return all(np.sum(a != b) >= d for a, b in itertools.combinations(theta, 2))


@pytest.mark.parametrize("H", [16, 20, 24])
def test_theta_set(H):
    theta = build_theta_set(H)
    assert theta.shape[1] == H
    assert len(theta) >= math.ceil(math.exp(H / 8))
    assert hamming_ok(theta, math.ceil(H / 8))
    assert not theta[0].any()
    assert len({tuple(t) for t in theta}) == len(theta)


def test_theta_set_is_greedy_lexicographic():
    # independent greedy over all words for a small length
    H, d = 9, 2
    kept = []
    for w in itertools.product((0, 1), repeat=H):
        if len(kept) >= math.ceil(math.exp(H / 8)):
            break
        if all(sum(x != y for x, y in zip(w, k)) >= d for k in kept):
            kept.append(w)
    assert build_theta_set(H).tolist() == [list(k) for k in kept]


def test_parameter_branches():
    big = HardInstanceSpec(2, 2, 20, 0.01, 0.5)
    assert big.p == pytest.approx((1 + 0.125 / 20) * 0.01)
    small = HardInstanceSpec(2, 2, 20, 0.005, 0.01)
    assert small.p == pytest.approx(0.25 / 20)
    for spec in (big, small):
        assert 0 <= spec.q <= spec.p <= spec.p + spec.delta <= 1
        assert spec.q >= max(spec.c2 / (2 * spec.H), spec.sigma)


@pytest.mark.parametrize("kwargs", [
    dict(sigma=0.005, eps=0.5),        # eps too large for the small-sigma branch
    dict(sigma=0.8, eps=0.5),          # sigma above 1 - c0
    dict(sigma=0.1, eps=0.5, c1=0.2),  # c1 != c0/2
    dict(sigma=0.1, eps=0.5, w=4),     # w out of range
    dict(sigma=0.1, eps=0.5, theta=(1, 0)),
])
def test_parameter_violations(kwargs):
    with pytest.raises(ParameterRegimeViolation):
        HardInstanceSpec(S=2, A=2, H=20, **kwargs)


def test_hard_instance_structure():
    spec = HardInstanceSpec(1, 2, 5, 0.1, 0.5, w=1, theta=(1, 0, 1, 1, 0))
    g = build_hard_rmdp(spec)
    validate(g)
    assert np.array_equal(g.kernel.sum(-1), np.ones_like(g.kernel.sum(-1)))
    m = spec.pending
    for y in range(m, 2 * m):
        assert np.all(g.kernel[:, y, :, y] == 1.0)
        assert np.all(g.reward[0, :, y] == 1.0)
    assert np.all(g.reward[0, :, :m] == 0.0)
    for h, bit in enumerate(spec.theta):
        assert g.kernel[h, 1, bit, m + 1] == pytest.approx(spec.p)
        assert g.kernel[h, 1, 1 - bit, m + 1] == pytest.approx(spec.q)
        assert g.kernel[h, 0, 0, m] == pytest.approx(spec.p + spec.delta)


def test_closed_form_gap_values():
    spec = HardInstanceSpec(1, 2, 3, 0.05, 0.5)
    cf = hard_rmdp_closed_form(spec)
    p = spec.p
    assert cf.gap[0] == pytest.approx(1 + (1 - p) + (1 - p) ** 2, abs=1e-15)
    assert cf.gap[-1] == 1.0


def test_optimal_action_at_special_state():
    spec = HardInstanceSpec(2, 2, 12, 0.1, 0.8, w=3)
    res = dr_nvi(build_hard_rmdp(spec))
    chosen = res.policy.dist[:-1, spec.w].argmax(-1)
    assert chosen.tolist() == list(spec.theta[:-1])
