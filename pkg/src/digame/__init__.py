"""Biased Maker-Breaker games on the complete digraph: engine, strategies, checkers and experiments."""

from .game_core import DirectedEdge, EdgeOwner, GameConfig, GameState, new_game
from .harness import GameKind, RunSpec, SweepConfig, run_game, sweep

__version__ = "0.1.0"

__all__ = [
    "DirectedEdge", "EdgeOwner", "GameConfig", "GameState", "new_game",
    "GameKind", "RunSpec", "SweepConfig", "run_game", "sweep",
]
