"""Compiled Monte Carlo kernels.

Everything here operates on plain arrays so numba can compile it; the
engine module owns the user-facing wrappers.  Randomness is a splitmix64
counter stream carried in a one-element uint64 array, advanced in place.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

U64 = np.uint64
_GOLDEN = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

MODE_FIXED = 0
MODE_IID = 1
MODE_RENEWAL = 2

KIND_EXPONENTIAL = 0
KIND_UNIFORM = 1
KIND_DETERMINISTIC = 2
KIND_TABLE = 3


@njit(cache=True, inline="always")
def _scramble(z):
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _next_u64(state):
    state[0] = state[0] + _GOLDEN
    return _scramble(state[0])


@njit(cache=True, inline="always")
def _unif(state):
    return (_next_u64(state) >> U64(11)) * _INV53


@njit(cache=True)
def derive_seed(seed_base, run_index):
    inner = _scramble(U64(run_index) + _GOLDEN)
    return _scramble((U64(seed_base) ^ inner) + _GOLDEN)


@njit(cache=True, inline="always")
def _below(state, n):
    i = int(_unif(state) * n)
    if i >= n:
        i = n - 1
    return i


@njit(cache=True, inline="always")
def _sample_duration(gi, dkind, dp1, dp2, dtoff, dtval, dtcum, state):
    k = dkind[gi]
    if k == KIND_EXPONENTIAL:
        return -dp1[gi] * np.log1p(-_unif(state))
    if k == KIND_UNIFORM:
        return dp1[gi] + (dp2[gi] - dp1[gi]) * _unif(state)
    if k == KIND_DETERMINISTIC:
        return dp1[gi]
    u = _unif(state)
    for j in range(dtoff[gi], dtoff[gi + 1]):
        if u < dtcum[j]:
            return dtval[j]
    return dtval[dtoff[gi + 1] - 1]


@njit(cache=True)
def sample_many(dkind, dp1, dp2, dtoff, dtval, dtcum, gi, n, state):
    out = np.empty(n)
    for i in range(n):
        out[i] = _sample_duration(gi, dkind, dp1, dp2, dtoff, dtval, dtcum, state)
    return out


@njit(cache=True, inline="always")
def _draw_cum(cumpi, state):
    u = _unif(state)
    for g in range(cumpi.shape[0]):
        if u < cumpi[g]:
            return g
    return cumpi.shape[0] - 1


@njit(cache=True)
def init_edges(mode, fixed_idx, cumpi, dkind, dp1, dp2, dtoff, dtval, dtcum,
               edge_game, edge_rem, state):
    """Stationary edge start: game ~ pi, fresh duration on that game."""
    for e in range(edge_game.shape[0]):
        if mode == MODE_FIXED:
            g = fixed_idx
        elif cumpi.shape[0] == 1:
            g = 0
        else:
            g = _draw_cum(cumpi, state)
        edge_game[e] = g
        if mode == MODE_RENEWAL:
            edge_rem[e] = _sample_duration(g, dkind, dp1, dp2, dtoff, dtval,
                                           dtcum, state)


@njit(cache=True)
def advance_clocks(edge_game, edge_rem, dt, n_games, dkind, dp1, dp2, dtoff,
                   dtval, dtcum, state):
    """Decrement every edge clock by dt, cycling games on expiry."""
    if dt == 0.0:
        return
    for e in range(edge_game.shape[0]):
        edge_rem[e] -= dt
        while edge_rem[e] <= 0.0:
            g = (edge_game[e] + 1) % n_games
            edge_game[e] = g
            edge_rem[e] += _sample_duration(g, dkind, dp1, dp2, dtoff, dtval,
                                            dtcum, state)


@njit(cache=True, inline="always")
def _node_payoff(x, strat, nbrs, edge_of, edge_game, pm):
    total = 0.0
    sx = strat[x]
    for s in range(nbrs.shape[1]):
        total += pm[edge_game[edge_of[x, s]], sx, strat[nbrs[x, s]]]
    return total


@njit(cache=True)
def death_birth_event(strat, nbrs, edge_of, edge_game, edge_stamp, event_idx,
                      mode, cumpi, pm, omega, count_a, cumw, state):
    """One death-birth update.  Returns the new cooperator count, or -1 if
    the neighborhood fitness sum is non-positive."""
    n = strat.shape[0]
    k = nbrs.shape[1]
    dead = _below(state, n)
    if mode == MODE_IID and cumpi.shape[0] > 1:
        # each edge's game is an independent draw from pi at every event;
        # only edges entering this event's fitness sums need materializing
        for s in range(k):
            y = nbrs[dead, s]
            for t in range(k):
                e = edge_of[y, t]
                if edge_stamp[e] != event_idx:
                    edge_stamp[e] = event_idx
                    edge_game[e] = _draw_cum(cumpi, state)
    total = 0.0
    for s in range(k):
        f = 1.0 - omega + omega * _node_payoff(nbrs[dead, s], strat, nbrs,
                                               edge_of, edge_game, pm)
        total += f
        cumw[s] = total
    if total <= 0.0:
        return -1
    u = _unif(state) * total
    pick = k - 1
    for s in range(k):
        if u < cumw[s]:
            pick = s
            break
    new = strat[nbrs[dead, pick]]
    old = strat[dead]
    if new != old:
        strat[dead] = new
        count_a += new - old
    return count_a


@njit(cache=True)
def run_to_absorption(strat, nbrs, edge_of, edge_game, edge_rem, edge_stamp,
                      mode, fixed_idx, cumpi, pm, omega, dt, max_events,
                      dkind, dp1, dp2, dtoff, dtval, dtcum, cumw, state):
    """Returns (outcome, events): outcome 1 all-A, 0 all-B, -1 not absorbed."""
    n = strat.shape[0]
    n_games = pm.shape[0]
    count_a = 0
    for i in range(n):
        count_a += strat[i]
    events = 0
    while 0 < count_a < n and events < max_events:
        if mode == MODE_RENEWAL:
            advance_clocks(edge_game, edge_rem, dt, n_games, dkind, dp1, dp2,
                           dtoff, dtval, dtcum, state)
        count_a = death_birth_event(strat, nbrs, edge_of, edge_game,
                                    edge_stamp, events, mode, cumpi, pm,
                                    omega, count_a, cumw, state)
        if count_a < 0:
            return -2, events
        events += 1
    if count_a == 0:
        return 0, events
    if count_a == n:
        return 1, events
    return -1, events


@njit(cache=True, parallel=True)
def fixation_batch(nbrs, edge_of, n_edges, mode, fixed_idx, cumpi, pm, omega,
                   dt, max_events, dkind, dp1, dp2, dtoff, dtval, dtcum,
                   invader, runs, seed_base):
    """Independent invasion runs; run r uses the stream derived from
    (seed_base, r), so results do not depend on thread scheduling."""
    n = nbrs.shape[0]
    k = nbrs.shape[1]
    outcomes = np.empty(runs, dtype=np.int8)
    events = np.empty(runs, dtype=np.int64)
    for r in prange(runs):
        state = np.empty(1, dtype=np.uint64)
        state[0] = derive_seed(seed_base, r)
        strat = np.full(n, 1 - invader, dtype=np.int8)
        strat[_below(state, n)] = invader
        edge_game = np.empty(n_edges, dtype=np.int32)
        edge_rem = np.zeros(n_edges)
        edge_stamp = np.full(n_edges, -1, dtype=np.int64)
        cumw = np.empty(k)
        init_edges(mode, fixed_idx, cumpi, dkind, dp1, dp2, dtoff, dtval,
                   dtcum, edge_game, edge_rem, state)
        out, ev = run_to_absorption(strat, nbrs, edge_of, edge_game, edge_rem,
                                    edge_stamp, mode, fixed_idx, cumpi, pm,
                                    omega, dt, max_events, dkind, dp1, dp2,
                                    dtoff, dtval, dtcum, cumw, state)
        outcomes[r] = out
        events[r] = ev
    return outcomes, events


@njit(cache=True)
def count_pair_edges(strat, edges):
    """(#AA edges, #mixed edges) over the materialized edge list."""
    naa = 0
    nab = 0
    for e in range(edges.shape[0]):
        sa = strat[edges[e, 0]]
        sb = strat[edges[e, 1]]
        if sa == 1 and sb == 1:
            naa += 1
        elif sa != sb:
            nab += 1
    return naa, nab


@njit(cache=True)
def trajectory_run(strat, nbrs, edge_of, edges, mode, fixed_idx, cumpi, pm,
                   omega, dt, dkind, dp1, dp2, dtoff, dtval, dtcum,
                   horizon_events, sample_every, state):
    """Run up to the horizon, sampling cooperator and pair-edge counts.

    Returns (sample_times, coop_counts, aa_counts, ab_counts, n_samples)."""
    n = strat.shape[0]
    k = nbrs.shape[1]
    n_games = pm.shape[0]
    n_edges = edges.shape[0]
    edge_game = np.empty(n_edges, dtype=np.int32)
    edge_rem = np.zeros(n_edges)
    edge_stamp = np.full(n_edges, -1, dtype=np.int64)
    cumw = np.empty(k)
    init_edges(mode, fixed_idx, cumpi, dkind, dp1, dp2, dtoff, dtval, dtcum,
               edge_game, edge_rem, state)
    max_samples = horizon_events // sample_every + 2
    times = np.empty(max_samples, dtype=np.int64)
    coop = np.empty(max_samples, dtype=np.int64)
    aa = np.empty(max_samples, dtype=np.int64)
    ab = np.empty(max_samples, dtype=np.int64)
    count_a = 0
    for i in range(n):
        count_a += strat[i]
    naa, nab = count_pair_edges(strat, edges)
    times[0] = 0
    coop[0] = count_a
    aa[0] = naa
    ab[0] = nab
    n_samples = 1
    events = 0
    while events < horizon_events and 0 < count_a < n:
        if mode == MODE_RENEWAL:
            advance_clocks(edge_game, edge_rem, dt, n_games, dkind, dp1, dp2,
                           dtoff, dtval, dtcum, state)
        count_a = death_birth_event(strat, nbrs, edge_of, edge_game,
                                    edge_stamp, events, mode, cumpi, pm,
                                    omega, count_a, cumw, state)
        events += 1
        if events % sample_every == 0:
            naa, nab = count_pair_edges(strat, edges)
            times[n_samples] = events
            coop[n_samples] = count_a
            aa[n_samples] = naa
            ab[n_samples] = nab
            n_samples += 1
    if events % sample_every != 0:
        # final state when absorption lands between sampling points
        naa, nab = count_pair_edges(strat, edges)
        times[n_samples] = events
        coop[n_samples] = count_a
        aa[n_samples] = naa
        ab[n_samples] = nab
        n_samples += 1
    return times, coop, aa, ab, n_samples


@njit(cache=True)
def renewal_occupancy(n_edges, n_games, cumpi, dkind, dp1, dp2, dtoff, dtval,
                      dtcum, total_time, seed):
    """Exact per-game occupancy time of each edge's renewal process,
    started from the stationary edge initialization."""
    occ = np.zeros((n_edges, n_games))
    state = np.empty(1, dtype=np.uint64)
    state[0] = U64(seed)
    for e in range(n_edges):
        g = _draw_cum(cumpi, state)
        rem = _sample_duration(g, dkind, dp1, dp2, dtoff, dtval, dtcum, state)
        t = 0.0
        while t + rem <= total_time:
            occ[e, g] += rem
            t += rem
            g = (g + 1) % n_games
            rem = _sample_duration(g, dkind, dp1, dp2, dtoff, dtval, dtcum,
                                   state)
        occ[e, g] += total_time - t
    return occ
