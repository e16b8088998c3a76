"""Seeded Monte Carlo rollouts of the FlipDyn closed loop.

Timing at step k: the policies are queried at (k, x_k, alpha_k), both actions
are drawn, alpha_{k+1} follows the flip transition (or a forced event), and
x_{k+1} = f^{alpha_{k+1}}_k(x_k). Step k is charged g(x_k) + d(x_k) a0 -
a(x_k) a1, and a final row at k = L charges the terminal value
V^{alpha_L}_L(x_L).
"""

import logging
from functools import partial
from multiprocessing.pool import ThreadPool
from typing import Callable, Optional

import numpy as np

import matrix_game
from all_types.finite_dtypes import StateEnumeration, ValueTables
from all_types.game_dtypes import ActionPair, FlipState, GameSpec, MixedPolicy2
from all_types.lq_dtypes import NdLQParams, NdValueMatrices, ScalarLQParams, ScalarValueCoeffs
from all_types.sim_dtypes import AggregateStats, RolloutConfig, TrajectoryRecord
from constants import EXHAUSTIVE_CAP
from core_model import flip_transition, stage_cost, step_state
from finite_solver import TreeEvaluation, payoff_matrices_from_values
from game_errors import ConfigurationError, HorizonCapExceeded, PolicyProviderError
from logging_wrapper import log_and_validate
import lq_nd
import lq_scalar

logger = logging.getLogger(__name__)

PolicyPair = tuple[MixedPolicy2, MixedPolicy2]
PolicyProvider = Callable[[int, np.ndarray, int], PolicyPair]


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    """Independent counter-based stream for one run: key = seed, the run index
    sits in the top word of the Philox counter."""
    counter = np.array([0, 0, 0, run_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def _forced_map(spec: GameSpec, config: RolloutConfig) -> dict[int, FlipState]:
    forced = {}
    for event in config.forced_events:
        if event.step >= spec.L:
            raise ConfigurationError(
                f"forced event at step {event.step} lies outside the horizon {spec.L}"
            )
        forced[event.step] = event.alpha
    return forced


def _query(policies: PolicyProvider, k: int, x: np.ndarray, alpha: int) -> PolicyPair:
    try:
        return policies(k, x, alpha)
    except Exception as e:
        raise PolicyProviderError(f"policy provider failed: {e}", k) from e


def rollout(
    spec: GameSpec, policies: PolicyProvider, config: RolloutConfig, run_index: int = 0
) -> TrajectoryRecord:
    L, n = spec.L, spec.dynamics.n
    rng = run_rng(config.seed, run_index)
    forced = _forced_map(spec, config)
    terminal = spec.terminal_condition()

    xs = np.empty((L + 1, n))
    alphas = np.zeros(L + 1, dtype=np.int64)
    a0s = np.zeros(L + 1, dtype=np.int64)
    a1s = np.zeros(L + 1, dtype=np.int64)
    costs = np.empty(L + 1)
    p_def = np.full(L + 1, np.nan) if config.record_policies else None
    p_adv = np.full(L + 1, np.nan) if config.record_policies else None

    x = spec.x0.copy()
    alpha = FlipState(forced.get(0, spec.alpha0))
    for k in range(L):
        defender, adversary = _query(policies, k, x, alpha)
        u = rng.random(2)
        actions = ActionPair(a0=int(u[0] < defender.p_act), a1=int(u[1] < adversary.p_act))

        xs[k], alphas[k] = x, alpha
        a0s[k], a1s[k] = actions.a0, actions.a1
        costs[k] = stage_cost(x, actions, spec.costs)
        if config.record_policies:
            p_def[k], p_adv[k] = defender.p_act, adversary.p_act

        alpha = flip_transition(alpha, actions)
        if k + 1 in forced:
            alpha = FlipState(forced[k + 1])
        x = step_state(x, alpha, spec.dynamics, k)

    xs[L], alphas[L] = x, alpha
    costs[L] = terminal.value(alpha, x)
    return TrajectoryRecord(
        run=run_index, x=xs, alpha=alphas, a0=a0s, a1=a1s, stage_cost=costs,
        p_act_defender=p_def, p_act_adversary=p_adv,
    )


@log_and_validate(logger)
def monte_carlo(spec: GameSpec, policies: PolicyProvider, config: RolloutConfig) -> AggregateStats:
    """Aggregate ``config.runs`` rollouts; the reduction runs in run order so
    the result does not depend on ``config.workers``."""
    run_one = partial(rollout, spec, policies, config)
    if config.workers > 1:
        with ThreadPool(processes=config.workers) as pool:
            records = pool.map(run_one, range(config.runs))
    else:
        records = [run_one(i) for i in range(config.runs)]

    alpha = np.vstack([r.alpha for r in records])
    run_costs = np.array([r.total_cost for r in records])
    if config.record_policies:
        mean_beta = np.vstack([r.p_act_defender for r in records]).mean(axis=0)
        mean_gamma = np.vstack([r.p_act_adversary for r in records]).mean(axis=0)
    else:
        mean_beta = mean_gamma = np.full(spec.L + 1, np.nan)
    std_error = float(run_costs.std(ddof=1) / np.sqrt(config.runs)) if config.runs > 1 else 0.0

    return AggregateStats(
        runs=config.runs,
        mean_alpha=alpha.mean(axis=0),
        mean_beta=mean_beta,
        mean_gamma=mean_gamma,
        mean_cost=float(run_costs.mean()),
        cost_std_error=std_error,
        costs=run_costs,
        trajectories=records[: config.keep_trajectories],
    )


@log_and_validate(logger)
def expected_cost_exhaustive(
    spec: GameSpec, policies: PolicyProvider, cap: int = EXHAUSTIVE_CAP
) -> float:
    """Exact expected cost over every joint action sequence (terminal charge
    included), memoized on (k, alpha, x)."""
    if spec.L > cap:
        raise HorizonCapExceeded(f"horizon {spec.L} exceeds the exhaustive cap of {cap}", {"cap": cap})
    terminal = spec.terminal_condition()
    memo: dict[tuple[int, int, bytes], float] = {}

    def expect(k: int, alpha: int, x: np.ndarray) -> float:
        key = (k, alpha, x.tobytes())
        if key in memo:
            return memo[key]
        if k == spec.L:
            total = terminal.value(alpha, x)
        else:
            defender, adversary = _query(policies, k, x, alpha)
            total = 0.0
            for a0 in (0, 1):
                for a1 in (0, 1):
                    weight = defender.prob(a0) * adversary.prob(a1)
                    if weight == 0.0:
                        continue
                    actions = ActionPair(a0=a0, a1=a1)
                    nxt = flip_transition(alpha, actions)
                    x_next = np.ascontiguousarray(step_state(x, nxt, spec.dynamics, k))
                    total += weight * (stage_cost(x, actions, spec.costs) + expect(k + 1, nxt, x_next))
        memo[key] = total
        return total

    return expect(0, int(spec.alpha0), np.ascontiguousarray(spec.x0))


# policy providers


def constant_provider(defender_act: float, adversary_act: float) -> PolicyProvider:
    pair = (MixedPolicy2.from_act(defender_act), MixedPolicy2.from_act(adversary_act))
    return lambda k, x, alpha: pair


def tables_provider(tables: ValueTables, enumeration: Optional[StateEnumeration] = None) -> PolicyProvider:
    enumeration = enumeration or tables.enumeration

    def provider(k: int, x: np.ndarray, alpha: int) -> PolicyPair:
        return tables.policies(k, enumeration.id_of(x), alpha)

    return provider


def tree_provider(evaluation: TreeEvaluation) -> PolicyProvider:
    return evaluation.policy_at


def scalar_provider(coeffs: ScalarValueCoeffs, params: ScalarLQParams) -> PolicyProvider:
    """Closed-form policies; invalid steps use the coefficient game."""
    cache: dict[tuple[int, int], PolicyPair] = {}

    def provider(k: int, x: np.ndarray, alpha: int) -> PolicyPair:
        key = (k, int(alpha))
        if key not in cache:
            if coeffs.valid[k]:
                cache[key] = lq_scalar.scalar_policy(coeffs, params, k, alpha)
            else:
                cache[key] = lq_scalar.coefficient_game_policy(coeffs, params, k, alpha)
        return cache[key]

    return provider


def nd_provider(matrices: NdValueMatrices, params: NdLQParams) -> PolicyProvider:
    """Closed-form policies on valid steps; elsewhere, and at x = 0, the exact
    2x2 game at x built from the quadratic continuations."""

    def fallback(k: int, x: np.ndarray, alpha: int) -> PolicyPair:
        y0 = matrices.Btilde @ x
        y1 = matrices.Wtilde @ x
        xi0, xi1 = payoff_matrices_from_values(
            y0 @ matrices.P0[k + 1] @ y0,
            y1 @ matrices.P1[k + 1] @ y1,
            x @ params.D @ x,
            x @ params.A @ x,
        )
        game = matrix_game.solve(xi1 if alpha else xi0)
        return game.row_policy, game.col_policy

    def provider(k: int, x: np.ndarray, alpha: int) -> PolicyPair:
        if matrices.valid[k] and np.any(x):
            return lq_nd.nd_policy(x, matrices, params, k, alpha)
        return fallback(k, x, alpha)

    return provider
