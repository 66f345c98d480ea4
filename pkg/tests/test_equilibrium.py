import numpy as np
import pytest

from oracles import cce_vertices_2x2, grid_minimax_value
from robustmg.core import JointActionSpace
from robustmg.equilibrium import (StageGame, compute_ce, compute_cce, compute_nash, compute_nash_2p,
                                  compute_pure_nash, pure_nash_profiles, solve_stage, stage_gap_cce,
                                  stage_gap_ce, stage_gap_ne)
from robustmg.errors import NashIntractable, NotProductDistribution
from robustmg.instances.fishing import stage_payoffs

PENNIES = StageGame.from_tensors([[1, -1], [-1, 1]], [[-1, 1], [1, -1]])


def random_stage(rng, sizes):
    n = len(sizes)
    return StageGame(JointActionSpace(sizes), rng.random((n, int(np.prod(sizes)))))


def test_pennies_uniform_has_zero_gaps():
    x = np.full(4, 0.25)
    assert stage_gap_cce(PENNIES, x) == 0.0
    assert stage_gap_ce(PENNIES, x) == 0.0
    assert stage_gap_ne(PENNIES, x) == 0.0


def test_point_mass_with_unit_deviation_gain():
    g = StageGame.from_tensors([[0, 0], [1, 0]], [[0, 0], [0, 0]])
    x = np.array([1.0, 0, 0, 0])
    assert stage_gap_cce(g, x) == pytest.approx(1.0)
    assert stage_gap_ne(g, x) == pytest.approx(1.0)


def test_swap_gap_hand_computed():
    delta = 0.3
    # agent 0 gains delta by switching 0 -> 1 whatever agent 1 does
    u0 = np.array([[0.0, 0.0], [delta, delta]])
    g = StageGame.from_tensors(u0, np.zeros((2, 2)))
    assert stage_gap_ce(g, np.full(4, 0.25)) == pytest.approx(delta / 2)


def test_cce_polytope_vertices_certify():
    rng = np.random.default_rng(7)
    count = 0
    for _ in range(50):
        u1, u2 = rng.random((2, 2)), rng.random((2, 2))
        g = StageGame.from_tensors(u1, u2)
        for v in cce_vertices_2x2(u1, u2):
            assert stage_gap_cce(g, v) <= 1e-9
            count += 1
    assert count > 50


def test_gap_orderings():
    rng = np.random.default_rng(8)
    for _ in range(200):
        g = random_stage(rng, (2, 3))
        x = rng.dirichlet(np.ones(6))
        assert stage_gap_cce(g, x) <= stage_gap_ce(g, x) + 1e-12
        f = [rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3))]
        prod = np.outer(*f).ravel()
        assert stage_gap_ne(g, prod) == pytest.approx(stage_gap_cce(g, prod), abs=1e-12)


def test_nash_certifier_rejects_correlation():
    with pytest.raises(NotProductDistribution):
        stage_gap_ne(PENNIES, [0.5, 0, 0, 0.5])


@pytest.mark.parametrize("p, profile", [(0.049, (1, 1)), (0.051, (0, 0))])
def test_fishing_final_stage_pure_equilibrium(p, profile):
    g = StageGame(JointActionSpace((2, 2)), stage_payoffs(p))
    sol = compute_pure_nash(g)
    assert sol.certified_gap <= 1e-12
    assert g.actions.decode(int(np.argmax(sol.dist))) == profile


def test_pennies_has_no_pure_equilibrium():
    assert compute_pure_nash(PENNIES) is None
    assert pure_nash_profiles(PENNIES).size == 0


def test_pure_profiles_lexicographic():
    coord = StageGame.from_tensors(np.eye(2), np.eye(2))
    assert pure_nash_profiles(coord).tolist() == [0, 3]
    assert np.argmax(compute_pure_nash(coord).dist) == 0


def test_pennies_mixed_nash():
    sol = compute_nash_2p(PENNIES)
    assert np.allclose(sol.dist, 0.25, atol=1e-12)
    assert sol.certified_gap <= 1e-12
    assert sol.strategies is not None


def test_nash_2p_prefers_pure():
    coord = StageGame.from_tensors(np.eye(2), np.eye(2))
    assert compute_nash_2p(coord).dist.tolist() == [1.0, 0, 0, 0]


def test_zero_sum_value_matches_grid_minimax():
    rng = np.random.default_rng(9)
    for _ in range(10):
        M = rng.random((3, 3))
        sol = compute_nash_2p(StageGame.from_tensors(M, -M))
        assert sol.certified_gap <= 1e-8
        value = float(sol.dist @ M.ravel())
        assert abs(value - grid_minimax_value(M)) <= 2e-3


def test_nash_intractable_cases():
    rng = np.random.default_rng(10)
    with pytest.raises(NashIntractable):
        compute_nash_2p(random_stage(rng, (7, 2)))
    three = StageGame.from_tensors(*[np.array([[[1, 0], [0, 1]], [[0, 1], [1, 0]]]) * s for s in (1, -1, 0)])
    # pennies between the first two agents; the third is indifferent
    with pytest.raises(NashIntractable):
        compute_nash(three)


def test_dominant_strategy_point_mass():
    g = StageGame.from_tensors([[1, 1], [0, 0]], [[1, 0], [1, 0]])
    for solver in (compute_cce, compute_ce):
        sol = solver(g)
        assert sol.dist.tolist() == [1.0, 0, 0, 0]
        assert sol.certified_gap == 0.0


def test_pennies_learned_equilibria():
    for solver, gap in ((compute_cce, stage_gap_cce), (compute_ce, stage_gap_ce)):
        sol = solver(PENNIES, tol=1e-3)
        assert sol.converged
        assert gap(PENNIES, sol.dist) <= 1e-3


def test_random_ce_within_tolerance():
    rng = np.random.default_rng(12)
    for sizes in ((2, 3), (3, 3)):
        for _ in range(5):
            g = random_stage(rng, sizes)
            sol = compute_ce(g, tol=1e-3)
            assert sol.certified_gap == stage_gap_ce(g, sol.dist) <= 1e-3


def test_dynamics_deterministic():
    g = random_stage(np.random.default_rng(13), (3, 2, 2))
    a, b = compute_cce(g), compute_cce(g)
    assert np.array_equal(a.dist, b.dist)


def test_solve_stage_dispatch():
    for kind in ("nash", "ce", "cce"):
        sol = solve_stage(PENNIES, kind)
        assert sol.kind.value == kind
        assert np.all(sol.dist >= 0) and abs(sol.dist.sum() - 1) <= 1e-12


def test_invalid_tolerance():
    with pytest.raises(ValueError):
        compute_cce(PENNIES, tol=0.0)
