"""Pair-approximation analytics for death-birth dynamics under a game mix.

All closed forms are leading-order weak-selection results on the slow
manifold where the local excess assortment q_{A|A} - q_{A|B} equals
1/(k-1).  Inputs are the degree k, population size N, selection intensity
omega, and the distribution-weighted dilemma strengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import TrajectoryRecord
from .games import DilemmaGame, GameDistribution, expected_dilemmas


@dataclass(frozen=True)
class PairApproxParams:
    k: int
    n_pop: int
    omega: float

    def __post_init__(self):
        if self.k < 3:
            raise ValueError(
                f"degree k={self.k} degenerate: closed forms require k >= 3")
        if self.n_pop < 2:
            raise ValueError("population size must be at least 2")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")


@dataclass(frozen=True)
class DynamicsState:
    """Reduced coordinates: cooperator fraction and own-type assortment."""

    p_a: float
    q_a_given_a: float

    @property
    def p_b(self) -> float:
        return 1.0 - self.p_a

    @property
    def q_b_given_a(self) -> float:
        return 1.0 - self.q_a_given_a

    def q_a_given_b(self) -> float:
        # p_AB = p_BA pins the cross-conditional
        if self.p_b == 0.0:
            raise ValueError("q_{A|B} undefined at p_A = 1")
        return self.p_a * self.q_b_given_a / self.p_b

    def is_feasible(self, tol: float = 1e-12) -> bool:
        if not (0 <= self.p_a <= 1 and 0 <= self.q_a_given_a <= 1):
            return False
        if self.p_b == 0.0:
            return True
        q_ab = self.q_a_given_b()
        return -tol <= q_ab <= 1 + tol


@dataclass(frozen=True)
class Coefficients:
    i_a: float
    i_b: float
    i_c: float


@dataclass(frozen=True)
class DiffusionTerms:
    drift: float
    variance: float


def coefficients_general(state: DynamicsState, k: int) -> Coefficients:
    """Replacement-rate coefficients at an arbitrary feasible state."""
    if not state.is_feasible():
        raise ValueError(f"infeasible state {state}")
    q_aa = state.q_a_given_a
    q_ba = state.q_b_given_a
    q_ab = state.q_a_given_b() if state.p_b > 0 else q_aa
    q_bb = 1.0 - q_ab
    i_a = (k - 1) * (q_aa + q_bb) * (q_aa - q_ab)
    i_b = (k - 1) * q_ba * (q_aa + q_bb) + q_bb
    i_c = (k - 1) * q_ab * (q_aa + q_bb) + q_aa
    return Coefficients(i_a, i_b, i_c)


def manifold_state(p_a: float, k: int) -> DynamicsState:
    """The slow-manifold state at cooperator fraction p_a."""
    # q_{A|A} - q_{A|B} = 1/(k-1) with p_AB = p_BA gives
    # q_{A|A} = p_a + (1 - p_a)/(k - 1)
    return DynamicsState(p_a, p_a + (1.0 - p_a) / (k - 1))


def coefficients_on_manifold(p_a: float, k: int) -> Coefficients:
    i_a = k / (k - 1.0)
    i_b = (k * k - k - 1.0 - (k * k - k - 2.0) * p_a) / (k - 1.0)
    i_c = (1.0 + (k * k - k - 2.0) * p_a) / (k - 1.0)
    return Coefficients(i_a, i_b, i_c)


def _sums(dist: GameDistribution, games: Sequence[DilemmaGame]):
    return expected_dilemmas(dist, games)


def pair_dynamics(state: DynamicsState, params: PairApproxParams,
                  dist: GameDistribution,
                  games: Sequence[DilemmaGame]) -> tuple:
    """Leading-order time derivatives (dp_a, dq_a_given_a)."""
    k = params.k
    sum_dr, sum_dg = _sums(dist, games)
    c = coefficients_general(state, k)
    q_ab = state.q_a_given_b() if state.p_b > 0 else state.q_a_given_a
    p_ab = state.p_a * state.q_b_given_a
    dp_a = (params.omega * (k - 1.0) / k * p_ab
            * (c.i_a - c.i_b * sum_dr - c.i_c * sum_dg))
    dq_aa = (2.0 / k * state.q_b_given_a
             * (1.0 + (k - 1.0) * (q_ab - state.q_a_given_a)))
    return dp_a, dq_aa


def _gradient_bracket(p_a: float, k: int, sum_dr: float,
                      sum_dg: float) -> float:
    return (k - (k * k - k - 1.0) * sum_dr - sum_dg
            + (k * k - k - 2.0) * p_a * (sum_dr - sum_dg))


def selection_gradient(p_a: float, params: PairApproxParams,
                       dist: GameDistribution,
                       games: Sequence[DilemmaGame]) -> float:
    """Deterministic rate of change of the cooperator fraction on the
    slow manifold."""
    k = params.k
    sum_dr, sum_dg = _sums(dist, games)
    pref = params.omega * (k - 2.0) / (k * (k - 1.0)) * p_a * (1.0 - p_a)
    return pref * _gradient_bracket(p_a, k, sum_dr, sum_dg)


def diffusion_terms(p_a: float, params: PairApproxParams,
                    dist: GameDistribution,
                    games: Sequence[DilemmaGame]) -> DiffusionTerms:
    """Drift and variance of the one-dimensional diffusion for p_a."""
    k = params.k
    n = params.n_pop
    sum_dr, sum_dg = _sums(dist, games)
    c = coefficients_on_manifold(p_a, k)
    drift = (params.omega * (k - 2.0) / (n * k) * p_a * (1.0 - p_a)
             * (c.i_a - c.i_b * sum_dr - c.i_c * sum_dg))
    var = 2.0 * (k - 2.0) / (n * n * (k - 1.0)) * p_a * (1.0 - p_a)
    return DiffusionTerms(drift=drift, variance=var)


def phi_a(x: float, params: PairApproxParams, dist: GameDistribution,
          games: Sequence[DilemmaGame]) -> float:
    """Weak-selection fixation probability from initial fraction x."""
    k = params.k
    n = params.n_pop
    sum_dr, sum_dg = _sums(dist, games)
    bracket = ((-2.0 * k * k + 2.0 * k + 1.0) * sum_dr
               - (k * k - k + 1.0) * sum_dg + 3.0 * k
               + (k * k - k - 2.0) * x * (sum_dr - sum_dg))
    return x + params.omega * n / (6.0 * k) * x * (1.0 - x) * bracket


def rho_a(params: PairApproxParams, dist: GameDistribution,
          games: Sequence[DilemmaGame]) -> float:
    """Fixation probability of a single cooperator among N-1 defectors."""
    k = params.k
    n = params.n_pop
    sum_dr, sum_dg = _sums(dist, games)
    bracket = ((-2.0 * k * k + 2.0 * k + 1.0) * sum_dr
               - (k * k - k + 1.0) * sum_dg + 3.0 * k
               + (k * k - k - 2.0) / n * (sum_dr - sum_dg))
    return 1.0 / n + params.omega / (6.0 * k) * (1.0 - 1.0 / n) * bracket


def rho_b(params: PairApproxParams, dist: GameDistribution,
          games: Sequence[DilemmaGame]) -> float:
    """Fixation probability of a single defector among N-1 cooperators."""
    k = params.k
    n = params.n_pop
    sum_dr, sum_dg = _sums(dist, games)
    bracket = ((-k * k + k - 1.0) * sum_dr
               - (2.0 * k * k - 2.0 * k - 1.0) * sum_dg + 3.0 * k
               - (k * k - k - 2.0) / n * (sum_dr - sum_dg))
    return 1.0 / n - params.omega / (6.0 * k) * (1.0 - 1.0 / n) * bracket


def rho_ratio(params: PairApproxParams, dist: GameDistribution,
              games: Sequence[DilemmaGame]) -> float:
    """Leading-order ratio of cooperator to defector fixation probability."""
    k = params.k
    sum_dr, sum_dg = _sums(dist, games)
    return 1.0 + params.omega * (params.n_pop - 1.0) / 2.0 * (
        -(k - 1.0) * sum_dr - (k - 1.0) * sum_dg + 2.0)


def favors_cooperation(params: PairApproxParams, dist: GameDistribution,
                       games: Sequence[DilemmaGame]) -> tuple:
    """Whether a lone cooperator beats neutral drift (rho_A > 1/N in the
    large-N limit); returns (condition holds, signed margin)."""
    k = params.k
    sum_dr, sum_dg = _sums(dist, games)
    margin = 3.0 * k - ((2.0 * k * k - 2.0 * k - 1.0) * sum_dr
                        + (k * k - k + 1.0) * sum_dg)
    return margin > 0, margin


def cooperation_over_defection(params: PairApproxParams,
                               dist: GameDistribution,
                               games: Sequence[DilemmaGame]) -> tuple:
    """Whether cooperation is favored over defection (rho_A > rho_B);
    returns (condition holds, signed margin)."""
    k = params.k
    sum_dr, sum_dg = _sums(dist, games)
    margin = 2.0 / (k - 1.0) - sum(
        p * (g.dr + g.dg) for p, g in zip(dist.pi, games))
    return margin > 0, float(margin)


def solve_threshold(condition: str, free_parameter: str,
                    params: PairApproxParams, dist: GameDistribution,
                    games: Sequence[DilemmaGame]) -> float:
    """Value of one dilemma parameter at which a theorem margin crosses zero.

    ``free_parameter`` names the varied entry, e.g. "dg1" or "dr2"
    (1-based game index).  Both margins are linear in any single dilemma
    parameter, so the root is a closed-form solve.
    """
    kind = free_parameter[:2]
    idx = int(free_parameter[2:]) - 1
    if kind not in ("dg", "dr") or not 0 <= idx < len(games):
        raise ValueError(f"bad parameter designator {free_parameter!r}")
    pi_i = float(dist.pi[idx])
    if pi_i == 0.0:
        raise ValueError(
            f"game {idx + 1} has zero stationary weight; parameter inert")
    k = params.k
    if condition == "thm1":
        coef = (2.0 * k * k - 2.0 * k - 1.0) if kind == "dr" \
            else (k * k - k + 1.0)
        coef = -coef * pi_i  # d(margin)/d(parameter)
    elif condition == "thm2":
        coef = -pi_i
    else:
        raise ValueError(f"unknown condition {condition!r}")

    def margin_at(v: float) -> float:
        patched = list(games)
        g = patched[idx]
        patched[idx] = DilemmaGame(dg=v if kind == "dg" else g.dg,
                                   dr=v if kind == "dr" else g.dr)
        fn = favors_cooperation if condition == "thm1" \
            else cooperation_over_defection
        return fn(params, dist, patched)[1]

    base = getattr(games[idx], kind)
    return base - margin_at(base) / coef


def integrate_trajectory(p0: float, params: PairApproxParams, policy_or_dist,
                         games: Sequence[DilemmaGame], t_end: float,
                         step: float = 1.0,
                         sample_every: int = 1) -> TrajectoryRecord:
    """Classical fourth-order integration of the selection gradient.

    ``policy_or_dist`` is a fixed GameDistribution or any object exposing
    ``distribution_at(p)`` (a state-dependent policy).
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError("p0 outside [0, 1]")
    if step <= 0:
        raise ValueError("step must be positive")

    if hasattr(policy_or_dist, "distribution_at"):
        def rhs(p):
            return selection_gradient(p, params,
                                      policy_or_dist.distribution_at(p),
                                      games)
    else:
        def rhs(p):
            return selection_gradient(p, params, policy_or_dist, games)

    n_steps = int(round(t_end / step))
    times = [0.0]
    values = [p0]
    p = p0
    for i in range(n_steps):
        k1 = rhs(p)
        k2 = rhs(min(max(p + 0.5 * step * k1, 0.0), 1.0))
        k3 = rhs(min(max(p + 0.5 * step * k2, 0.0), 1.0))
        k4 = rhs(min(max(p + step * k3, 0.0), 1.0))
        p = p + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p = min(max(p, 0.0), 1.0)
        if p < 1e-12:
            p = 0.0
        elif p > 1.0 - 1e-12:
            p = 1.0
        if (i + 1) % sample_every == 0 or i == n_steps - 1:
            times.append((i + 1) * step)
            values.append(p)
    return TrajectoryRecord(times=np.array(times),
                            coop_fraction=np.array(values))
