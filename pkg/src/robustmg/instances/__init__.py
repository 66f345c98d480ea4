from .fishing import FishingGame, FishingSolution, fishing_game, fishing_gap_ne, fishing_rollout, fishing_solve
from .hard import HardClosedForm, HardInstanceSpec, build_hard_rmdp, build_theta_set, hard_rmdp_closed_form

__all__ = [
    "FishingGame", "FishingSolution", "fishing_game", "fishing_gap_ne", "fishing_rollout", "fishing_solve",
    "HardClosedForm", "HardInstanceSpec", "build_hard_rmdp", "build_theta_set", "hard_rmdp_closed_form",
]
