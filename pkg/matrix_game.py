"""2x2 zero-sum matrix games with a minimizing row player (defender) and a
maximizing column player (adversary)."""

import logging
from typing import Optional

import numpy as np

from all_types.game_dtypes import GameKind, GameSolution2, MixedPolicy2, PayoffMatrix2
from constants import DEGENERACY_RTOL
from game_errors import DegenerateGame, PureSaddleExists

logger = logging.getLogger(__name__)


def security_levels(M: PayoffMatrix2) -> tuple[float, float]:
    """Pure security levels (upper, lower).

    upper = min over rows of the row maximum (what the defender can guarantee),
    lower = max over columns of the column minimum (what the adversary can
    guarantee). A pure saddle exists iff they coincide.
    """
    arr = M.as_array()
    return float(arr.max(axis=1).min()), float(arr.min(axis=0).max())


def find_pure_saddle(M: PayoffMatrix2) -> Optional[tuple[int, int, float]]:
    arr = M.as_array()
    row_max = arr.max(axis=1)
    col_min = arr.min(axis=0)
    for r in range(2):
        for c in range(2):
            if arr[r, c] == row_max[r] and arr[r, c] == col_min[c]:
                return r, c, float(arr[r, c])
    return None


def _denominator(M: PayoffMatrix2) -> float:
    delta = M.m1 - M.m2 + M.m4 - M.m3
    scale = max(1.0, abs(M.m1), abs(M.m2), abs(M.m3), abs(M.m4))
    if abs(delta) < DEGENERACY_RTOL * scale:
        raise DegenerateGame(
            "denominator m1 - m2 + m4 - m3 vanishes and no pure saddle exists",
            {"delta": delta, "matrix": M.as_array().tolist()},
        )
    return delta


def solve_mixed(M: PayoffMatrix2) -> GameSolution2:
    saddle = find_pure_saddle(M)
    if saddle is not None:
        raise PureSaddleExists("matrix has a pure saddle point; mixed solution is not unique", saddle)
    delta = _denominator(M)

    # act is index 1 for both players
    row_act = (M.m1 - M.m2) / delta
    col_act = (M.m1 - M.m3) / delta
    value = (M.m1 * M.m4 - M.m2 * M.m3) / delta
    return GameSolution2(
        row_policy=MixedPolicy2.from_act(row_act),
        col_policy=MixedPolicy2.from_act(col_act),
        value=value,
        kind=GameKind.MIXED,
    )


def solve(M: PayoffMatrix2) -> GameSolution2:
    saddle = find_pure_saddle(M)
    if saddle is None:
        return solve_mixed(M)
    r, c, value = saddle
    return GameSolution2(
        row_policy=MixedPolicy2.pure(r == 1),
        col_policy=MixedPolicy2.pure(c == 1),
        value=value,
        kind=GameKind.PURE,
        saddle=(r, c),
    )


def expected_payoff(M: PayoffMatrix2, row: MixedPolicy2, col: MixedPolicy2) -> float:
    return float(row.as_vector() @ M.as_array() @ col.as_vector())


def is_saddle(M: PayoffMatrix2, solution: GameSolution2, tol: float = 1e-9) -> bool:
    """No pure row lowers and no pure column raises the solution's payoff."""
    arr = M.as_array()
    value = expected_payoff(M, solution.row_policy, solution.col_policy)
    row_payoffs = arr @ solution.col_policy.as_vector()
    col_payoffs = solution.row_policy.as_vector() @ arr
    return bool(np.all(row_payoffs >= value - tol) and np.all(col_payoffs <= value + tol))
