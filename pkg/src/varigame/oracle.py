"""Exact fixation probabilities for small populations.

The full chain enumerates all 2^N strategy configurations of a graph and
solves the absorption system of one death-birth event; it is the ground
truth the Monte Carlo engine is validated against.  For complete graphs a
lumped birth-death chain on the cooperator count gives the same answer in
closed form and serves as a cross-check of the enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .games import DilemmaGame, GameDistribution, effective_game
from .network import RegularGraph

_RESIDUAL_TOL = 1e-10
_DENSE_LIMIT = 16
_HARD_LIMIT = 20

GameModel = Union[DilemmaGame, np.ndarray]


@dataclass(frozen=True)
class ExactResult:
    """Fixation probability of a lone cooperator, averaged over the N
    single-cooperator starting configurations, plus per-start values and
    the residual of the linear solve."""

    fixation_prob: float
    per_start: np.ndarray
    solver_residual: float


def _payoff_matrix(game_model: GameModel) -> np.ndarray:
    if isinstance(game_model, DilemmaGame):
        return game_model.payoff_matrix()
    pm = np.asarray(game_model, dtype=float)
    if pm.shape != (2, 2):
        raise ValueError(f"payoff matrix must be 2x2, got shape {pm.shape}")
    return pm


def mixed_payoff_matrix(dist: GameDistribution,
                        games: Sequence[DilemmaGame]) -> np.ndarray:
    """Expected payoff matrix of a game mix, for oracle validation of
    variable-game runs."""
    return effective_game(dist, games).payoff_matrix()


def exact_fixation(graph: RegularGraph, game_model: GameModel,
                   omega: float) -> ExactResult:
    """Absorption probability into the all-cooperator state, solved over
    the complete 2^N configuration space."""
    n = graph.n_nodes
    if n > _HARD_LIMIT:
        raise ValueError(f"state space 2^{n} too large (limit 2^{_HARD_LIMIT})")
    k = graph.degree
    pm = _payoff_matrix(game_model)
    nbrs = graph.neighbors
    n_states = 1 << n
    all_a = n_states - 1

    # minimum neighborhood fitness must stay positive
    fmin = 1.0 - omega + omega * k * pm.min()
    if fmin <= 0.0:
        raise ValueError(
            f"omega={omega} allows non-positive fitness (min {fmin:.3g})")

    rows = []
    cols = []
    vals = []
    # b[s] = one-step probability of jumping straight into all-A (only
    # possible from states one flip below it, but accumulate generally)
    b = np.zeros(n_states)
    masks = 1 << np.arange(n, dtype=np.int64)

    for s in range(n_states):
        if s == 0 or s == all_a:
            continue
        strat = (s & masks) != 0
        payoffs = np.empty(n)
        for i in range(n):
            row = nbrs[i]
            own = 1 if strat[i] else 0
            payoffs[i] = sum(pm[own, 1 if strat[j] else 0] for j in row)
        fit = 1.0 - omega + omega * payoffs
        stay = 0.0
        for dead in range(n):
            row = nbrs[dead]
            w = fit[row]
            total = w.sum()
            for j, wj in zip(row, w):
                prob = (1.0 / n) * (wj / total)
                if bool(strat[j]) == bool(strat[dead]):
                    stay += prob
                else:
                    t = s | (1 << dead) if strat[j] else s & ~(1 << dead)
                    if t == all_a:
                        b[s] += prob
                    elif t != 0:
                        rows.append(s)
                        cols.append(t)
                        vals.append(prob)
        rows.append(s)
        cols.append(s)
        vals.append(stay)

    transient = np.arange(1, all_a)
    index_of = np.full(n_states, -1, dtype=np.int64)
    index_of[transient] = np.arange(transient.size)
    q = sp.csr_matrix(
        (vals, (index_of[rows], index_of[cols])),
        shape=(transient.size, transient.size))
    system = sp.identity(transient.size, format="csr") - q
    rhs = b[transient]
    if n <= _DENSE_LIMIT:
        x = spla.spsolve(system.tocsc(), rhs)
    else:
        x, info = spla.gmres(system, rhs, rtol=1e-13, atol=0.0, maxiter=5000)
        if info != 0:
            raise RuntimeError(f"iterative solve did not converge (info={info})")
    residual = float(np.max(np.abs(system @ x - rhs)))
    if residual > _RESIDUAL_TOL:
        raise RuntimeError(f"solver residual {residual:.3e} above tolerance")

    per_start = np.array([x[index_of[1 << i]] for i in range(n)])
    return ExactResult(fixation_prob=float(per_start.mean()),
                       per_start=per_start,
                       solver_residual=residual)


def lumped_fixation_complete(n: int, game_model: GameModel,
                             omega: float) -> float:
    """Fixation probability of one cooperator in a complete graph of n
    players, via the birth-death chain on the cooperator count."""
    if n < 2:
        raise ValueError("need at least two players")
    pm = _payoff_matrix(game_model)

    def f_a(j):
        # a cooperator plays j-1 cooperators and n-j defectors
        return 1.0 - omega + omega * ((j - 1) * pm[1, 1] + (n - j) * pm[1, 0])

    def f_b(j):
        return 1.0 - omega + omega * (j * pm[0, 1] + (n - 1 - j) * pm[0, 0])

    gammas = np.empty(n - 1)
    for j in range(1, n):
        # up: a defector dies (prob (n-j)/n) and a cooperator among its
        # n-1 neighbors wins the fitness lottery
        up = ((n - j) / n) * (j * f_a(j)) / (j * f_a(j) + (n - 1 - j) * f_b(j))
        # down: a cooperator dies and a defector replaces it
        down = (j / n) * ((n - j) * f_b(j)) / ((j - 1) * f_a(j)
                                               + (n - j) * f_b(j))
        if up <= 0.0:
            raise ValueError("non-positive transition rate; omega too large")
        gammas[j - 1] = down / up
    partial = np.cumprod(gammas)
    return float(1.0 / (1.0 + partial.sum()))
