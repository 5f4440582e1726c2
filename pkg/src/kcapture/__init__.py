"""Multi-pursuer k-capture games: k-Hull geometry, pursuit policies, evaders and a game engine."""

from .engine import GameState, Outcome, Trace, run, step
from .geometry import beta_max, halfspace_depth, in_khull_interior, khull_boundary_2d
from .scenario import Scenario, load_scenario

__all__ = [
    "GameState", "Outcome", "Trace", "Scenario", "beta_max", "halfspace_depth",
    "in_khull_interior", "khull_boundary_2d", "load_scenario", "run", "step",
]
__version__ = "0.1.0"
