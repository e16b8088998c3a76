import logging

import numpy as np

from all_types.game_dtypes import ActionPair, ClosedLoopDynamics, CostModel, FlipState
from game_errors import ConfigurationError

logger = logging.getLogger(__name__)


def flip_transition(alpha: int, actions: ActionPair) -> FlipState:
    """Next FlipDyn state: unchanged when both players make the same move,
    otherwise owned by whichever player moved."""
    if actions.a0 == actions.a1:
        return FlipState(alpha)
    return FlipState.ADVERSARY if actions.a1 else FlipState.DEFENDER


def step_state(
    x: np.ndarray, alpha_next: int, dynamics: ClosedLoopDynamics, k: int
) -> np.ndarray:
    if x.shape != (dynamics.n,):
        raise ConfigurationError(
            f"state has shape {x.shape}, dynamics expect ({dynamics.n},)", {"k": k}
        )
    x_next = np.atleast_1d(np.asarray(dynamics.map_for(alpha_next, k)(x), dtype=np.float64))
    if x_next.shape != (dynamics.n,):
        raise ConfigurationError(
            f"closed loop f{int(alpha_next)} returned shape {x_next.shape}, expected ({dynamics.n},)",
            {"k": k},
        )
    return x_next


def stage_cost(x: np.ndarray, actions: ActionPair, costs: CostModel) -> float:
    cost = costs.g(x)
    if actions.a0:
        cost += costs.d(x)
    if actions.a1:
        cost -= costs.a(x)
    return float(cost)
