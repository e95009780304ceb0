"""Evolutionary dynamics of time-varying two-strategy games on regular
networks: Monte Carlo engine, closed-form analytics, optimal game
distributions, and exact small-population oracles."""

from .games import (DilemmaGame, DurationDistribution, GameDistribution,
                    GameProcess, Strategy, effective_game, expected_dilemmas,
                    stationary_distribution)
from .network import (RegularGraph, complete_graph, lattice_moore,
                      lattice_von_neumann, random_regular)
from .rng import RandomStream, derive_run_seed

__all__ = [
    "DilemmaGame", "DurationDistribution", "GameDistribution", "GameProcess",
    "Strategy", "effective_game", "expected_dilemmas",
    "stationary_distribution", "RegularGraph", "complete_graph",
    "lattice_moore", "lattice_von_neumann", "random_regular", "RandomStream",
    "derive_run_seed",
]

__version__ = "0.1.0"
