"""Random tabular games for experiments and tests."""

from __future__ import annotations

import numpy as np

from .core import JointActionSpace, RobustMarkovGame


def random_game(rng: np.random.Generator, horizon: int, state_count: int, action_sizes,
                sigma=0.0, concentration: float = 1.0, structure: str = "general") -> RobustMarkovGame:
    """Uniform [0, 1] rewards and Dirichlet kernel rows.

    ``structure="constant-sum"`` (two agents only) sets the second agent's
    reward to one minus the first's, which makes mixed stage equilibria
    common. Rows are renormalized after drawing so they sum to one within
    1e-15.
    """
    acts = JointActionSpace(tuple(action_sizes))
    n, A = acts.agent_count, acts.total
    H, S = horizon, state_count
    reward = rng.random((n, H, S, A))
    if structure == "constant-sum":
        if n != 2:
            raise ValueError("constant-sum games need exactly two agents")
        reward[1] = 1.0 - reward[0]
    elif structure != "general":
        raise ValueError(f"unknown structure {structure!r}")
    kernel = rng.dirichlet(np.full(S, concentration), size=(H, S, A))
    kernel /= kernel.sum(axis=-1, keepdims=True)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,))
    return RobustMarkovGame(H, S, acts, reward, kernel, sigma, (0.0, 1.0))
