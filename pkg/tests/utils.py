import logging
from typing import Optional, Sequence

import numpy as np

from all_types.config_dtypes import ExperimentConfig, FiniteBlock
from all_types.finite_dtypes import StateEnumeration
from all_types.game_dtypes import GameSpec, MixedPolicy2, PayoffMatrix2
from all_types.lq_dtypes import NdLQParams, ScalarLQParams
from cli_io import build_finite_game
from matrix_game import find_pure_saddle
from simulator import PolicyProvider

logger = logging.getLogger(__name__)


def example_scalar_params(L: int = 1, btilde: float = 0.9, wtilde: float = 1.1, **overrides) -> ScalarLQParams:
    """The worked scalar instance: g=1, d=0.5, a=0.9, mu=1."""
    costs = dict(g=1.0, d=0.5, a=0.9, mu=1.0)
    costs.update(overrides)
    return ScalarLQParams.from_closed_loop(btilde, wtilde, L=L, **costs)


def random_identity_cost_params(rng: np.random.Generator, n: int, L: int) -> NdLQParams:
    """Random stable plant with A = aI, D = dI and Q = I.

    Both closed loops are U diag(s) V' with s in [0.85, 1] (adversary) or
    [0.5, 1] (defender), scaled to a norm below 0.99 and 0.6; the last step then
    satisfies the Loewner conditions for any a, d <= 0.6.
    """

    def scaled(norm: float, low: float) -> np.ndarray:
        U, _ = np.linalg.qr(rng.normal(size=(n, n)))
        V, _ = np.linalg.qr(rng.normal(size=(n, n)))
        return norm * U @ np.diag(rng.uniform(low, 1.0, n)) @ V.T

    wtilde = scaled(rng.uniform(0.9, 0.99), 0.85)
    btilde = scaled(rng.uniform(0.2, 0.6), 0.5)
    a, d = rng.uniform(0.1, 0.6, 2)
    eye = np.eye(n)
    return NdLQParams(F=wtilde, B=eye, K=wtilde - btilde, Q=eye, D=d * eye, A=a * eye, L=L)


def random_finite_game(
    rng: np.random.Generator, n_states: int, horizon: int, initial_state: int = 0
) -> tuple[GameSpec, StateEnumeration]:
    """Random closed game on 1-D states 0..S-1 with strictly positive costs."""
    block = FiniteBlock(
        states=[[float(s)] for s in range(n_states)],
        f0=rng.integers(0, n_states, n_states).tolist(),
        f1=rng.integers(0, n_states, n_states).tolist(),
        g=rng.uniform(0.1, 2.0, n_states).tolist(),
        d=rng.uniform(0.05, 1.0, n_states).tolist(),
        a=rng.uniform(0.05, 1.0, n_states).tolist(),
        initial_state=initial_state,
    )
    config = ExperimentConfig(name="random_finite", mode="finite", horizon=horizon, finite=block)
    return build_finite_game(config)


def random_matrix_without_saddle(rng: np.random.Generator) -> PayoffMatrix2:
    while True:
        M = PayoffMatrix2.from_array(rng.uniform(-5.0, 5.0, (2, 2)))
        if find_pure_saddle(M) is None:
            return M


def grid_value(M: PayoffMatrix2, resolution: float = 1e-4) -> float:
    """min over defender mixtures of the adversary's best pure reply."""
    p = np.linspace(0.0, 1.0, int(round(1.0 / resolution)) + 1)
    rows = np.stack([1.0 - p, p], axis=1)
    payoffs = rows @ M.as_array()
    return float(payoffs.max(axis=1).min())


def deviating_provider(
    base: PolicyProvider,
    defender_actions: Optional[Sequence[int]] = None,
    adversary_actions: Optional[Sequence[int]] = None,
) -> PolicyProvider:
    """``base`` with one player replaced by a pure open-loop action sequence
    indexed by step."""

    def provider(k: int, x: np.ndarray, alpha: int):
        defender, adversary = base(k, x, alpha)
        if defender_actions is not None:
            defender = MixedPolicy2.pure(bool(defender_actions[k]))
        if adversary_actions is not None:
            adversary = MixedPolicy2.pure(bool(adversary_actions[k]))
        return defender, adversary

    return provider
