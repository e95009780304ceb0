"""Dilemma-strength games, game-duration distributions, and stationary
game distributions of the renewal switching process."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .rng import RandomStream

_DILEMMA_TOL = 1e-12
_PI_TOL = 1e-12


class Strategy(IntEnum):
    """The two strategies: A cooperates, B defects."""

    B = 0
    A = 1


@dataclass(frozen=True)
class DilemmaGame:
    """A normalized 2x2 game with reward 1 and punishment 0.

    ``dg`` is the gamble-intending dilemma (temptation minus reward) and
    ``dr`` the risk-averting dilemma (punishment minus sucker payoff).
    """

    dg: float
    dr: float

    def __post_init__(self):
        for name, v in (("dg", self.dg), ("dr", self.dr)):
            if not math.isfinite(v) or abs(v) > 1.0 + _DILEMMA_TOL:
                raise ValueError(f"{name}={v!r} outside [-1, 1]")

    def payoff(self, own: Strategy, opponent: Strategy) -> float:
        if own == Strategy.A:
            return 1.0 if opponent == Strategy.A else -self.dr
        return 1.0 + self.dg if opponent == Strategy.A else 0.0

    def payoff_matrix(self) -> np.ndarray:
        """Payoff indexed as [own, opponent] with the Strategy integer codes."""
        m = np.empty((2, 2))
        m[Strategy.A, Strategy.A] = 1.0
        m[Strategy.A, Strategy.B] = -self.dr
        m[Strategy.B, Strategy.A] = 1.0 + self.dg
        m[Strategy.B, Strategy.B] = 0.0
        return m


def payoff(game: DilemmaGame, own: Strategy, opponent: Strategy) -> float:
    return game.payoff(own, opponent)


# duration-distribution kind codes shared with the simulation kernels
KIND_EXPONENTIAL = 0
KIND_UNIFORM = 1
KIND_DETERMINISTIC = 2
KIND_TABLE = 3


@dataclass(frozen=True)
class DurationDistribution:
    """How long one game interaction lasts before switching.

    Supported variants: exponential (``rate``), uniform (``lower``/``upper``),
    deterministic (``duration``) and a finite empirical table of
    (duration, probability) pairs.
    """

    kind: int
    p1: float = 0.0
    p2: float = 0.0
    table: tuple = field(default=())

    @classmethod
    def exponential(cls, rate: float) -> "DurationDistribution":
        if not (rate > 0 and math.isfinite(rate)):
            raise ValueError(f"exponential rate must be positive, got {rate!r}")
        return cls(KIND_EXPONENTIAL, p1=1.0 / rate)

    @classmethod
    def uniform(cls, lower: float, upper: float) -> "DurationDistribution":
        if not (0 <= lower < upper and math.isfinite(upper)):
            raise ValueError(f"invalid uniform bounds ({lower!r}, {upper!r})")
        return cls(KIND_UNIFORM, p1=lower, p2=upper)

    @classmethod
    def deterministic(cls, duration: float) -> "DurationDistribution":
        if not (duration > 0 and math.isfinite(duration)):
            raise ValueError(f"duration must be positive, got {duration!r}")
        return cls(KIND_DETERMINISTIC, p1=duration)

    @classmethod
    def empirical(cls, pairs: Sequence[tuple]) -> "DurationDistribution":
        pairs = tuple((float(d), float(p)) for d, p in pairs)
        if not pairs:
            raise ValueError("empirical table must be non-empty")
        if any(d <= 0 for d, _ in pairs):
            raise ValueError("empirical durations must be positive")
        if any(p < 0 for _, p in pairs):
            raise ValueError("empirical probabilities must be nonnegative")
        total = sum(p for _, p in pairs)
        if abs(total - 1.0) > _PI_TOL:
            raise ValueError(f"empirical probabilities sum to {total}, not 1")
        return cls(KIND_TABLE, table=pairs)

    def mean(self) -> float:
        if self.kind == KIND_EXPONENTIAL:
            return self.p1
        if self.kind == KIND_UNIFORM:
            return 0.5 * (self.p1 + self.p2)
        if self.kind == KIND_DETERMINISTIC:
            return self.p1
        return sum(d * p for d, p in self.table)

    def sample(self, rng: RandomStream) -> float:
        if self.kind == KIND_EXPONENTIAL:
            return -self.p1 * math.log1p(-rng.uniform())
        if self.kind == KIND_UNIFORM:
            return self.p1 + (self.p2 - self.p1) * rng.uniform()
        if self.kind == KIND_DETERMINISTIC:
            return self.p1
        u = rng.uniform()
        acc = 0.0
        for d, p in self.table:
            acc += p
            if u < acc:
                return d
        return self.table[-1][0]


def mean_duration(dist: DurationDistribution) -> float:
    return dist.mean()


def sample_duration(dist: DurationDistribution, rng: RandomStream) -> float:
    return dist.sample(rng)


@dataclass(frozen=True)
class GameDistribution:
    """Stationary probability of playing each game."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        object.__setattr__(self, "pi", pi)
        if pi.ndim != 1 or pi.size < 1:
            raise ValueError("pi must be a non-empty vector")
        if np.any(pi < 0):
            raise ValueError("pi entries must be nonnegative")
        if abs(pi.sum() - 1.0) > _PI_TOL:
            raise ValueError(f"pi sums to {pi.sum()}, not 1")

    def __len__(self) -> int:
        return self.pi.size

    @classmethod
    def point_mass(cls, index: int, n: int) -> "GameDistribution":
        pi = np.zeros(n)
        pi[index] = 1.0
        return cls(pi)


@dataclass(frozen=True)
class GameProcess:
    """Cyclic renewal process over a list of games.

    Game i runs for a random duration drawn from ``durations[i]`` and then
    hands over to game (i+1) mod n.  For a single game the durations are
    irrelevant.
    """

    games: tuple
    durations: tuple

    def __init__(self, games: Sequence[DilemmaGame],
                 durations: Sequence[DurationDistribution]):
        games = tuple(games)
        durations = tuple(durations)
        if len(games) < 1:
            raise ValueError("need at least one game")
        if len(games) != len(durations):
            raise ValueError("games and durations must have equal length")
        object.__setattr__(self, "games", games)
        object.__setattr__(self, "durations", durations)

    @classmethod
    def single(cls, game: DilemmaGame) -> "GameProcess":
        return cls([game], [DurationDistribution.deterministic(1.0)])

    @property
    def n_games(self) -> int:
        return len(self.games)


def stationary_distribution(process: GameProcess) -> GameDistribution:
    """Long-run fraction of time on each game: mean duration over total mean."""
    means = np.array([d.mean() for d in process.durations])
    total = means.sum()
    if not (total > 0 and math.isfinite(total)):
        raise ValueError(f"total mean duration {total} is not positive finite")
    return GameDistribution(means / total)


def expected_dilemmas(dist: GameDistribution,
                      games: Sequence[DilemmaGame]) -> tuple:
    """Distribution-weighted dilemma strengths (sum pi*dr, sum pi*dg)."""
    if len(dist) != len(games):
        raise ValueError(f"distribution length {len(dist)} != {len(games)} games")
    sum_dr = float(sum(p * g.dr for p, g in zip(dist.pi, games)))
    sum_dg = float(sum(p * g.dg for p, g in zip(dist.pi, games)))
    return sum_dr, sum_dg


def effective_game(dist: GameDistribution,
                   games: Sequence[DilemmaGame]) -> DilemmaGame:
    """The expected payoff matrix of a game mix, itself a normalized game."""
    sum_dr, sum_dg = expected_dilemmas(dist, games)
    return DilemmaGame(dg=sum_dg, dr=sum_dr)
