"""Monte Carlo death-birth dynamics with per-edge variable games."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .games import (DilemmaGame, GameDistribution, GameProcess, Strategy,
                    stationary_distribution)
from .network import RegularGraph
from .rng import RandomStream


class GameMode(Enum):
    RENEWAL = "renewal"
    IID_STATIONARY = "iid_stationary"
    FIXED = "fixed"


_MODE_CODE = {
    GameMode.FIXED: K.MODE_FIXED,
    GameMode.IID_STATIONARY: K.MODE_IID,
    GameMode.RENEWAL: K.MODE_RENEWAL,
}


@dataclass
class SimConfig:
    omega: float = 0.01
    game_mode: GameMode = GameMode.RENEWAL
    fixed_index: int = 0
    dt_per_event: float = 1.0
    seed: int = 0
    max_events: int = 10 ** 8

    def __post_init__(self):
        if isinstance(self.game_mode, str):
            self.game_mode = GameMode(self.game_mode)
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega={self.omega} outside [0, 1]")
        if self.dt_per_event <= 0:
            raise ValueError("dt_per_event must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be positive")


@dataclass
class PopulationState:
    """Per-node strategies, stored with the Strategy integer codes."""

    strategies: np.ndarray

    @classmethod
    def monomorphic(cls, n: int, strategy: Strategy) -> "PopulationState":
        return cls(np.full(n, int(strategy), dtype=np.int8))

    @classmethod
    def random_fraction(cls, n: int, coop_fraction: float,
                        rng: RandomStream) -> "PopulationState":
        """Round(coop_fraction * n) cooperators on a uniform random node set."""
        if not 0.0 <= coop_fraction <= 1.0:
            raise ValueError("coop_fraction outside [0, 1]")
        n_coop = int(round(coop_fraction * n))
        order = np.arange(n)
        for i in range(n - 1):  # Fisher-Yates on the shared stream
            j = i + rng.below(n - i)
            order[i], order[j] = order[j], order[i]
        strat = np.zeros(n, dtype=np.int8)
        strat[order[:n_coop]] = 1
        return cls(strat)

    def copy(self) -> "PopulationState":
        return PopulationState(self.strategies.copy())

    def coop_fraction(self) -> float:
        return float(self.strategies.mean())


@dataclass
class EdgeGameState:
    """Realized game on every edge plus the renewal clock."""

    current_game: np.ndarray  # int32 per edge
    remaining: np.ndarray     # float64 per edge


@dataclass
class FixationResult:
    runs: int
    fixations: int
    non_absorbed: int = 0

    @property
    def absorbed(self) -> int:
        return self.runs - self.non_absorbed

    @property
    def truncation_warning(self) -> bool:
        return self.non_absorbed > 0

    @property
    def estimate(self) -> float:
        return self.fixations / self.absorbed

    @property
    def stderr(self) -> float:
        p = self.estimate
        return math.sqrt(p * (1.0 - p) / self.absorbed)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    coop_fraction: np.ndarray
    p_aa: Optional[np.ndarray] = None
    q_a_given_a: Optional[np.ndarray] = None
    q_a_given_b: Optional[np.ndarray] = None


def _duration_arrays(process: GameProcess):
    n = process.n_games
    dkind = np.empty(n, dtype=np.int8)
    dp1 = np.zeros(n)
    dp2 = np.zeros(n)
    toff = np.zeros(n + 1, dtype=np.int32)
    tval: list = []
    tcum: list = []
    for i, d in enumerate(process.durations):
        dkind[i] = d.kind
        dp1[i] = d.p1
        dp2[i] = d.p2
        if d.table:
            acc = 0.0
            for dur, p in d.table:
                acc += p
                tval.append(dur)
                tcum.append(acc)
        toff[i + 1] = len(tval)
    return dkind, dp1, dp2, toff, np.array(tval), np.array(tcum)


class BoundProcess:
    """Array form of (graph, process, config) shared by all kernel calls."""

    def __init__(self, graph: RegularGraph, process: GameProcess,
                 config: SimConfig,
                 distribution: Optional[GameDistribution] = None):
        self.graph = graph
        self.process = process
        self.config = config
        if distribution is None:
            if process.n_games == 1:
                distribution = GameDistribution(np.ones(1))
            else:
                distribution = stationary_distribution(process)
        self.distribution = distribution
        self.mode_code = _MODE_CODE[config.game_mode]
        self.cumpi = np.cumsum(self.distribution.pi)
        self.pm = np.stack([g.payoff_matrix() for g in process.games])
        (self.dkind, self.dp1, self.dp2, self.toff, self.tval,
         self.tcum) = _duration_arrays(process)
        if config.game_mode == GameMode.FIXED:
            if not 0 <= config.fixed_index < process.n_games:
                raise ValueError("fixed_index out of range")

    def initial_edge_state(self, rng: RandomStream) -> EdgeGameState:
        edge_game = np.empty(self.graph.n_edges, dtype=np.int32)
        edge_rem = np.zeros(self.graph.n_edges)
        K.init_edges(self.mode_code, self.config.fixed_index, self.cumpi,
                     self.dkind, self.dp1, self.dp2, self.toff, self.tval,
                     self.tcum, edge_game, edge_rem, rng.state)
        return EdgeGameState(edge_game, edge_rem)


def total_payoff(graph: RegularGraph, strategies: np.ndarray,
                 edge_games: EdgeGameState, games: Sequence[DilemmaGame],
                 node: int) -> float:
    """Payoff accumulated by one node over all its current edge games."""
    pm = np.stack([g.payoff_matrix() for g in games])
    return float(K._node_payoff.py_func(node, strategies, graph.neighbors,
                                        graph.edge_of,
                                        edge_games.current_game, pm))


def fitness(omega: float, payoff_total: float) -> float:
    return 1.0 - omega + omega * payoff_total


def death_birth_step(graph: RegularGraph, state: PopulationState,
                     edge_games: EdgeGameState, process: GameProcess,
                     config: SimConfig, rng: RandomStream) -> PopulationState:
    """One death-birth update in place; returns the (mutated) state."""
    bound = BoundProcess(graph, process, config)
    count_a = int(state.strategies.sum())
    stamp = np.full(graph.n_edges, -1, dtype=np.int64)
    cumw = np.empty(graph.degree)
    out = K.death_birth_event(state.strategies, graph.neighbors,
                              graph.edge_of, edge_games.current_game, stamp,
                              0, bound.mode_code, bound.cumpi, bound.pm,
                              config.omega, count_a, cumw, rng.state)
    if out < 0:
        raise RuntimeError("non-positive neighborhood fitness sum; "
                           "omega/payoff combination invalid")
    return state


def advance_game_clocks(edge_games: EdgeGameState, process: GameProcess,
                        dt: float, rng: RandomStream) -> EdgeGameState:
    """Advance every edge clock by dt, cycling through games on expiry."""
    d = _duration_arrays(process)
    K.advance_clocks(edge_games.current_game, edge_games.remaining, dt,
                     process.n_games, *d, rng.state)
    return edge_games


def run_to_absorption(graph: RegularGraph, process: GameProcess,
                      config: SimConfig, initial: PopulationState,
                      rng: RandomStream):
    """Iterate events until all-A, all-B, or max_events.

    Returns (absorbed_as, events); absorbed_as is None when the guard
    tripped before absorption.
    """
    bound = BoundProcess(graph, process, config)
    edge = bound.initial_edge_state(rng)
    stamp = np.full(graph.n_edges, -1, dtype=np.int64)
    cumw = np.empty(graph.degree)
    out, events = K.run_to_absorption(
        initial.strategies, graph.neighbors, graph.edge_of,
        edge.current_game, edge.remaining, stamp, bound.mode_code,
        config.fixed_index, bound.cumpi, bound.pm, config.omega,
        config.dt_per_event, config.max_events, bound.dkind, bound.dp1,
        bound.dp2, bound.toff, bound.tval, bound.tcum, cumw, rng.state)
    if out == -2:
        raise RuntimeError("non-positive neighborhood fitness sum")
    if out == -1:
        return None, int(events)
    return Strategy(out), int(events)


def estimate_fixation(graph: RegularGraph, process: GameProcess,
                      config: SimConfig, invader: Strategy,
                      runs: int) -> FixationResult:
    """Invasion experiment: monomorphic opposite population, one random
    invader, repeated over independent per-run streams."""
    if runs < 1:
        raise ValueError("need at least one run")
    bound = BoundProcess(graph, process, config)
    outcomes, _events = K.fixation_batch(
        graph.neighbors, graph.edge_of, graph.n_edges, bound.mode_code,
        config.fixed_index, bound.cumpi, bound.pm, config.omega,
        config.dt_per_event, config.max_events, bound.dkind, bound.dp1,
        bound.dp2, bound.toff, bound.tval, bound.tcum, int(invader), runs,
        np.uint64(config.seed & ((1 << 64) - 1)))
    if np.any(outcomes == -2):
        raise RuntimeError("non-positive neighborhood fitness sum")
    fixations = int(np.count_nonzero(outcomes == int(invader)))
    non_absorbed = int(np.count_nonzero(outcomes == -1))
    return FixationResult(runs=runs, fixations=fixations,
                          non_absorbed=non_absorbed)


def simulate_trajectory(graph: RegularGraph, process: GameProcess,
                        config: SimConfig, initial_coop_fraction: float,
                        horizon_events: int, sample_every: int,
                        rng: Optional[RandomStream] = None,
                        pair_stats: bool = True) -> TrajectoryRecord:
    """Seed a random cooperator set and record the cooperator fraction
    (and pair statistics) every sample_every events."""
    if rng is None:
        rng = RandomStream(config.seed)
    bound = BoundProcess(graph, process, config)
    n = graph.n_nodes
    k = graph.degree
    state = PopulationState.random_fraction(n, initial_coop_fraction, rng)
    times, coop, aa, ab, n_samples = K.trajectory_run(
        state.strategies, graph.neighbors, graph.edge_of, graph.edges,
        bound.mode_code, config.fixed_index, bound.cumpi, bound.pm,
        config.omega, config.dt_per_event, bound.dkind, bound.dp1, bound.dp2,
        bound.toff, bound.tval, bound.tcum, horizon_events, sample_every,
        rng.state)
    times = times[:n_samples]
    coop = coop[:n_samples]
    record = TrajectoryRecord(times=times.copy(),
                              coop_fraction=coop / float(n))
    if pair_stats:
        aa = aa[:n_samples].astype(float)
        ab = ab[:n_samples].astype(float)
        p_a = coop / float(n)
        p_aa = 2.0 * aa / (k * n)
        with np.errstate(divide="ignore", invalid="ignore"):
            q_aa = np.where(coop > 0, p_aa / p_a, np.nan)
            p_b = 1.0 - p_a
            q_ab = np.where(coop < n, (ab / (k * n)) / p_b, np.nan)
        record.p_aa = p_aa
        record.q_a_given_a = q_aa
        record.q_a_given_b = q_ab
    return record


def measure_pair_stats(graph: RegularGraph, state: PopulationState):
    """Global and conditional cooperator frequencies from edge counts.

    Returns (p_a, p_aa, q_a_given_a, q_a_given_b); conditionals are None at
    the monomorphic boundaries where they are undefined.
    """
    n = graph.n_nodes
    k = graph.degree
    naa, nab = K.count_pair_edges(state.strategies, graph.edges)
    n_coop = int(state.strategies.sum())
    p_a = n_coop / n
    p_aa = 2.0 * naa / (k * n)
    q_aa = p_aa / p_a if n_coop > 0 else None
    q_ab = (nab / (k * n)) / (1.0 - p_a) if n_coop < n else None
    return p_a, p_aa, q_aa, q_ab


def renewal_occupancy_fractions(graph: RegularGraph, process: GameProcess,
                                total_time: float, seed: int) -> np.ndarray:
    """Per-edge fraction of time each game is active over a long horizon."""
    d = _duration_arrays(process)
    pi = stationary_distribution(process)
    occ = K.renewal_occupancy(graph.n_edges, process.n_games,
                              np.cumsum(pi.pi), *d, total_time, seed)
    return occ / total_time
