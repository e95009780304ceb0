"""Optimal game distributions.

For two games the optimal distribution is piecewise constant in the
cooperator fraction, taking simplex-vertex values with at most one switch
point; the closed forms are implemented in ``optimal_policy_two_games``.
For more games both objectives stay linear in the distribution, so the
optimum is always a vertex and a direct argmin over per-game coefficients
suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .games import DilemmaGame, GameDistribution


class ObjectiveKind(Enum):
    """What the distribution should optimize at a given cooperator fraction."""

    MAX_GRADIENT = "max_gradient"
    MIN_FITNESS_DIFF = "min_fitness_diff"


@dataclass(frozen=True)
class PiecewisePolicy:
    """A distribution over games for every interior cooperator fraction.

    ``segments`` is an ordered list of ((lo, hi), GameDistribution) pairs
    that tile (0, 1); each interval is open at lo and open at hi except
    that a switch point belongs to the segment on its right, i.e. the
    right segment is [p*, 1).  ``degenerate`` marks the case where every
    distribution is optimal (the reported vertex is then only canonical).
    """

    segments: tuple
    breakpoints: tuple = ()
    degenerate: bool = False

    def __post_init__(self):
        lo = 0.0
        for (a, b), dist in self.segments:
            if not math.isclose(a, lo, abs_tol=1e-15) or b <= a:
                raise ValueError("segments must tile (0, 1) in order")
            lo = b
        if not math.isclose(lo, 1.0, abs_tol=1e-15):
            raise ValueError("segments must end at 1")

    def distribution_at(self, p_a: float) -> GameDistribution:
        if not 0.0 <= p_a <= 1.0:
            raise ValueError(f"p_a={p_a} outside [0, 1]")
        for (a, b), dist in self.segments:
            # switch points belong to the segment on their right
            if a <= p_a < b:
                return dist
        return self.segments[-1][1]

    @classmethod
    def constant(cls, dist: GameDistribution,
                 degenerate: bool = False) -> "PiecewisePolicy":
        return cls(segments=(((0.0, 1.0), dist),), degenerate=degenerate)

    @classmethod
    def switching(cls, left: GameDistribution, right: GameDistribution,
                  p_star: float) -> "PiecewisePolicy":
        return cls(segments=(((0.0, p_star), left), ((p_star, 1.0), right)),
                   breakpoints=(p_star,))


def h1(dist: GameDistribution, games: Sequence[DilemmaGame], p_a: float,
       k: int) -> float:
    """Game-mix term of the selection gradient; larger favors cooperators."""
    c = k * k - k
    total = 0.0
    for p, g in zip(dist.pi, games):
        total += p * (-(c - 1.0) * g.dr - g.dg + (c - 2.0) * p_a * (g.dr - g.dg))
    return total


def h2(dist: GameDistribution, games: Sequence[DilemmaGame],
       p_a: float) -> float:
    """Expected payoff advantage of defectors over cooperators against a
    population mixing at p_a (the fitness difference up to a positive
    factor)."""
    return float(sum(p * (p_a * (g.dg - g.dr) + g.dr)
                     for p, g in zip(dist.pi, games)))


def g1(p_a: float, games2: Sequence[DilemmaGame], k: int) -> float:
    """Coefficient of pi_1 in the (negated) gradient objective for two
    games; the gradient is maximized by pi_1 = 1 where G_1 < 0."""
    a, b = _two(games2)
    c = k * k - k
    return ((c - 1.0) * (a.dr - b.dr) + (a.dg - b.dg)
            - (c - 2.0) * (a.dr - a.dg - b.dr + b.dg) * p_a)


def g2(p_a: float, games2: Sequence[DilemmaGame]) -> float:
    """Coefficient of pi_1 in the fitness-difference objective for two
    games; the difference is minimized by pi_1 = 1 where G_2 < 0."""
    a, b = _two(games2)
    return (a.dg - b.dg) * p_a + (a.dr - b.dr) * (1.0 - p_a)


def _two(games2: Sequence[DilemmaGame]) -> tuple:
    if len(games2) != 2:
        raise ValueError(f"expected exactly two games, got {len(games2)}")
    return games2[0], games2[1]


_VERTEX_1 = GameDistribution(np.array([1.0, 0.0]))
_VERTEX_2 = GameDistribution(np.array([0.0, 1.0]))


def optimal_policy_two_games(objective: ObjectiveKind,
                             games2: Sequence[DilemmaGame],
                             k: int) -> PiecewisePolicy:
    """Closed-form optimal distribution over two games, as a function of
    the cooperator fraction.

    The objective coefficient G of pi_1 is linear in p_a, so the policy
    is the vertex selected by the sign of G, with at most one interior
    switch at the root of G.
    """
    a, b = _two(games2)
    if objective is ObjectiveKind.MAX_GRADIENT:
        if k < 3:
            raise ValueError("gradient policy needs degree k >= 3")
        g_at_0 = g1(0.0, games2, k)
        g_at_1 = g1(1.0, games2, k)
        slope = -(k * k - k - 2.0) * (a.dr - a.dg - b.dr + b.dg)
        # pi_1 = 1 favored where G_1 < 0
        favored, other = _VERTEX_1, _VERTEX_2
    else:
        g_at_0 = g2(0.0, games2)
        g_at_1 = g2(1.0, games2)
        slope = (a.dg - b.dg) - (a.dr - b.dr)
        favored, other = _VERTEX_1, _VERTEX_2

    if g_at_0 == 0.0 and g_at_1 == 0.0:
        return PiecewisePolicy.constant(_VERTEX_1, degenerate=True)
    if g_at_0 <= 0.0 and g_at_1 <= 0.0:
        return PiecewisePolicy.constant(favored)
    if g_at_0 >= 0.0 and g_at_1 >= 0.0:
        return PiecewisePolicy.constant(other)
    # strict sign change: G crosses zero once in (0,1)
    p_star = -g_at_0 / slope
    if not 0.0 < p_star < 1.0:
        # floating-point edge: collapse to the side matching G at 1/2
        mid = g_at_0 + 0.5 * slope
        return PiecewisePolicy.constant(favored if mid < 0 else other)
    if g_at_0 > 0.0:
        return PiecewisePolicy.switching(other, favored, p_star)
    return PiecewisePolicy.switching(favored, other, p_star)


def optimal_distribution_n_games(objective: ObjectiveKind,
                                 games: Sequence[DilemmaGame], p_a: float,
                                 k: int) -> tuple:
    """Best point-mass distribution at one cooperator fraction.

    Returns (GameDistribution, tie) where ``tie`` reports whether another
    vertex attains the same objective value (ties resolve to the lowest
    game index).
    """
    n = len(games)
    if n < 1:
        raise ValueError("need at least one game")
    c = k * k - k
    coeffs = np.empty(n)
    for i, g in enumerate(games):
        if objective is ObjectiveKind.MAX_GRADIENT:
            # minimize the negated gradient contribution
            coeffs[i] = -(-(c - 1.0) * g.dr - g.dg
                          + (c - 2.0) * p_a * (g.dr - g.dg))
        else:
            coeffs[i] = p_a * (g.dg - g.dr) + g.dr
    best = int(np.argmin(coeffs))
    tie = bool(np.sum(np.abs(coeffs - coeffs[best]) <= 1e-12) > 1)
    return GameDistribution.point_mass(best, n), tie


@dataclass(frozen=True)
class GridReport:
    violations: int
    worst_gap: float
    empirical_switch: float = math.nan
    degenerate: bool = False
    checked_points: int = 0


def grid_verify(objective: ObjectiveKind, games2: Sequence[DilemmaGame],
                k: int, grid_resolution: int) -> GridReport:
    """Brute-force check of the closed-form two-game policy.

    For each interior p_a on the grid, scans pi_1 over the same grid and
    verifies the policy's vertex is within one grid cell of the scanned
    optimum; also locates the empirical switch point if the policy has one.
    """
    if grid_resolution < 10:
        raise ValueError("grid resolution must be at least 10")
    policy = optimal_policy_two_games(objective, games2, k)
    if policy.degenerate:
        return GridReport(violations=0, worst_gap=0.0, degenerate=True)
    a, b = _two(games2)
    res = grid_resolution
    p_grid = np.arange(1, res) / res
    pi_grid = np.linspace(0.0, 1.0, res + 1)
    # both objectives are pi_1-linear: value = pi_1 * G(p) + offset(p)
    if objective is ObjectiveKind.MAX_GRADIENT:
        g_vals = np.array([g1(p, games2, k) for p in p_grid])
        c = k * k - k
        offset = -(-(c - 1.0) * b.dr - b.dg
                   + (c - 2.0) * p_grid * (b.dr - b.dg))
    else:
        g_vals = np.array([g2(p, games2) for p in p_grid])
        offset = p_grid * (b.dg - b.dr) + b.dr
    vals = np.outer(g_vals, pi_grid) + offset[:, None]
    best_idx = np.argmin(vals, axis=1)
    best_pi1 = pi_grid[best_idx]
    best_val = vals[np.arange(p_grid.size), best_idx]
    claimed_pi1 = np.array([float(policy.distribution_at(p).pi[0])
                            for p in p_grid])
    claimed_val = claimed_pi1 * g_vals + offset
    gaps = np.abs(claimed_pi1 - best_pi1)
    gaps[claimed_val - best_val <= 1e-12] = 0.0  # exact ties (switch point)
    violations = int(np.sum(gaps > 1.0 / res + 1e-12))
    worst = float(gaps.max())
    vertex = best_pi1 > 0.5
    flips = np.nonzero(vertex[1:] != vertex[:-1])[0]
    switch = float(p_grid[flips[-1] + 1]) if flips.size else math.nan
    return GridReport(violations=violations, worst_gap=worst,
                      empirical_switch=switch, checked_points=p_grid.size)
