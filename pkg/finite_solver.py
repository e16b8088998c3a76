"""Exact backward induction of the coupled FlipDyn value functions.

Tabular over finite state enumerations, and tree-evaluated over the reachable
set for continuous states at small horizons.
"""

import logging
from collections import deque
from functools import partial
from multiprocessing.pool import ThreadPool
from typing import Callable, Iterable, Optional

import numpy as np

import matrix_game
from all_types.finite_dtypes import CellSolution, StateEnumeration, TraceEntry, ValueTables
from all_types.game_dtypes import (
    ClosedLoopDynamics,
    CostModel,
    GameSpec,
    MixedPolicy2,
    PayoffMatrix2,
    TerminalCondition,
    as_state,
)
from config_factory import CONF
from constants import ENUMERATION_CAP
from core_model import step_state
from game_errors import EnumerationNotClosed, FlipDynError, HorizonCapExceeded
from logging_wrapper import log_and_validate

logger = logging.getLogger(__name__)

ValueAccessor = Callable[[np.ndarray], float]


def payoff_matrices_from_values(
    v0_next: float, v1_next: float, d: float, a: float
) -> tuple[PayoffMatrix2, PayoffMatrix2]:
    xi0 = PayoffMatrix2(m1=v0_next, m2=v1_next - a, m3=v0_next + d, m4=v0_next + d - a)
    xi1 = PayoffMatrix2(m1=v1_next, m2=v1_next - a, m3=v0_next + d, m4=v1_next + d - a)
    return xi0, xi1


def _continuations(
    x: np.ndarray, k: int, V0_next: ValueAccessor, V1_next: ValueAccessor, dynamics: ClosedLoopDynamics
) -> tuple[float, float]:
    y0 = step_state(x, 0, dynamics, k)
    y1 = step_state(x, 1, dynamics, k)
    try:
        return float(V0_next(y0)), float(V1_next(y1))
    except (KeyError, IndexError) as e:
        raise EnumerationNotClosed("successor value missing", {"k": k}) from e


def build_payoff_matrices(
    x: np.ndarray,
    k: int,
    V0_next: ValueAccessor,
    V1_next: ValueAccessor,
    costs: CostModel,
    dynamics: ClosedLoopDynamics,
) -> tuple[PayoffMatrix2, PayoffMatrix2]:
    v0n, v1n = _continuations(x, k, V0_next, V1_next, dynamics)
    return payoff_matrices_from_values(v0n, v1n, costs.d(x), costs.a(x))


def _mixed_condition(v0_next: float, v1_next: float, d: float, a: float) -> bool:
    return v1_next > v0_next + max(d, a)


def mixed_condition_holds(
    x: np.ndarray,
    V0_next: ValueAccessor,
    V1_next: ValueAccessor,
    costs: CostModel,
    dynamics: ClosedLoopDynamics,
    k: int,
) -> bool:
    v0n, v1n = _continuations(x, k, V0_next, V1_next, dynamics)
    return _mixed_condition(v0n, v1n, costs.d(x), costs.a(x))


def solve_cell_from_values(g: float, v0_next: float, v1_next: float, d: float, a: float) -> CellSolution:
    """Solve both branches of one cell.

    Both matrices are solved exactly: a pure saddle when there is one, else
    the unique mixed equilibrium. ``mixed`` flags cells where the
    mixed-equilibrium condition holds; with d, a > 0 those are exactly the
    strictly mixed cells, with a zero takeover cost they sit on the boundary.
    """
    xi0, xi1 = payoff_matrices_from_values(v0_next, v1_next, d, a)
    mixed = _mixed_condition(v0_next, v1_next, d, a)
    game0, game1 = matrix_game.solve(xi0), matrix_game.solve(xi1)
    return CellSolution(
        v0=g + game0.value, v1=g + game1.value, game0=game0, game1=game1, mixed=mixed
    )


def enumerate_states(
    dynamics: ClosedLoopDynamics,
    seeds: Iterable,
    horizon: Optional[int] = None,
    cap: int = ENUMERATION_CAP,
) -> StateEnumeration:
    """Close ``seeds`` under f0 and f1 (every step's maps when time-varying)."""
    steps = range(horizon) if dynamics.time_varying else range(1)
    if dynamics.time_varying and horizon is None:
        raise ValueError("time-varying dynamics need a horizon to enumerate")

    states: list[np.ndarray] = []
    index: dict[bytes, int] = {}

    def _add(x: np.ndarray) -> int:
        key = x.tobytes()
        if key not in index:
            if len(states) >= cap:
                raise EnumerationNotClosed(f"state enumeration exceeded cap of {cap} states")
            index[key] = len(states)
            states.append(x)
            queue.append(x)
        return index[key]

    queue: deque = deque()
    for seed in seeds:
        _add(np.ascontiguousarray(as_state(seed)))

    edges: dict[tuple[int, int, int], int] = {}
    while queue:
        x = queue.popleft()
        s = index[x.tobytes()]
        for t in steps:
            for alpha in (0, 1):
                y = np.ascontiguousarray(step_state(x, alpha, dynamics, t))
                edges[(t, s, alpha)] = _add(y)

    transitions = np.zeros((len(steps), len(states), 2), dtype=np.int64)
    for (t, s, alpha), target in edges.items():
        transitions[t, s, alpha] = target
    logger.debug(f"enumerated {len(states)} states over {len(steps)} step map(s)")
    return StateEnumeration(states=np.vstack(states), transitions=transitions)


def _solve_state(
    s: int,
    k: int,
    enumeration: StateEnumeration,
    costs: CostModel,
    V0_next: np.ndarray,
    V1_next: np.ndarray,
) -> CellSolution:
    x = enumeration.states[s]
    v0n = V0_next[enumeration.successor(s, 0, k)]
    v1n = V1_next[enumeration.successor(s, 1, k)]
    d, a = costs.d(x), costs.a(x)
    try:
        cell = solve_cell_from_values(costs.g(x), v0n, v1n, d, a)
    except FlipDynError as e:
        raise e.with_context(k=k, state=s)
    if not cell.mixed and logger.isEnabledFor(logging.DEBUG):
        upper, lower = matrix_game.security_levels(payoff_matrices_from_values(v0n, v1n, d, a)[0])
        logger.debug(f"step {k}, state {s}: pure cell, security levels ({upper:.6g}, {lower:.6g})")
    return cell


@log_and_validate(logger, validate_output=True, output_model=ValueTables)
def backward_induction(
    spec: GameSpec,
    enumeration: StateEnumeration,
    terminal: Optional[TerminalCondition] = None,
    workers: Optional[int] = None,
) -> ValueTables:
    terminal = terminal or spec.terminal_condition()
    workers = CONF.workers if workers is None else workers
    L, S = spec.L, enumeration.size
    if enumeration.transitions.shape[0] not in (1, L):
        raise EnumerationNotClosed(
            f"transition table covers {enumeration.transitions.shape[0]} steps, horizon is {L}"
        )

    V0 = np.empty((L + 1, S))
    V1 = np.empty((L + 1, S))
    defender_act = np.empty((L, S, 2))
    adversary_act = np.empty((L, S, 2))
    mixed = np.zeros((L, S, 2), dtype=bool)
    for s, x in enumerate(enumeration.states):
        V0[L, s] = terminal.value(0, x)
        V1[L, s] = terminal.value(1, x)

    pool = ThreadPool(workers) if workers > 1 else None
    try:
        for k in range(L - 1, -1, -1):
            solve_one = partial(
                _solve_state, k=k, enumeration=enumeration, costs=spec.costs,
                V0_next=V0[k + 1], V1_next=V1[k + 1],
            )
            cells = pool.map(solve_one, range(S)) if pool else [solve_one(s) for s in range(S)]
            for s, cell in enumerate(cells):
                V0[k, s], V1[k, s] = cell.v0, cell.v1
                for alpha in (0, 1):
                    row, col = cell.policies(alpha)
                    defender_act[k, s, alpha] = row.p_act
                    adversary_act[k, s, alpha] = col.p_act
                    mixed[k, s, alpha] = cell.mixed
            n_pure = S - int(mixed[k, :, 0].sum())
            if n_pure:
                logger.debug(f"step {k}: {n_pure}/{S} cells fell back to the exact matrix solve")
    finally:
        if pool:
            pool.close()
            pool.join()

    return ValueTables(
        V0=V0, V1=V1, defender_act=defender_act, adversary_act=adversary_act,
        mixed=mixed, enumeration=enumeration,
    )


class ValueTree:
    """Memoized value recursion over the states reachable from any query.

    Nodes are keyed on (k, exact bytes of x); successors produced by the same
    maps collide exactly, nothing is merged by rounding.
    """

    def __init__(self, spec: GameSpec, terminal: TerminalCondition):
        self.spec = spec
        self.terminal = terminal
        self._memo: dict[tuple[int, bytes], tuple[np.ndarray, CellSolution]] = {}

    def __len__(self) -> int:
        return len(self._memo)

    def node(self, k: int, x: np.ndarray) -> CellSolution:
        x = np.ascontiguousarray(x, dtype=np.float64)
        key = (k, x.tobytes())
        hit = self._memo.get(key)
        if hit is not None:
            return hit[1]

        if k == self.spec.L:
            cell = CellSolution(v0=self.terminal.value(0, x), v1=self.terminal.value(1, x))
        else:
            dynamics, costs = self.spec.dynamics, self.spec.costs
            n0 = self.node(k + 1, step_state(x, 0, dynamics, k))
            n1 = self.node(k + 1, step_state(x, 1, dynamics, k))
            try:
                cell = solve_cell_from_values(costs.g(x), n0.v0, n1.v1, costs.d(x), costs.a(x))
            except FlipDynError as e:
                raise e.with_context(k=k, x=x.tolist())
        self._memo[key] = (x, cell)
        return cell

    def policy_at(self, k: int, x: np.ndarray, alpha: int) -> tuple[MixedPolicy2, MixedPolicy2]:
        return self.node(k, x).policies(alpha)

    def trace(self) -> list[TraceEntry]:
        entries = []
        for (k, _), (x, cell) in self._memo.items():
            if cell.game0 is None:
                continue
            entries.append(
                TraceEntry(
                    k=k,
                    x=x.tolist(),
                    v0=cell.v0,
                    v1=cell.v1,
                    defender_act=(cell.game0.row_policy.p_act, cell.game1.row_policy.p_act),
                    adversary_act=(cell.game0.col_policy.p_act, cell.game1.col_policy.p_act),
                    mixed=cell.mixed,
                )
            )
        entries.sort(key=lambda e: e.k)
        return entries


class TreeEvaluation:
    def __init__(self, v0: float, v1: float, tree: ValueTree):
        self.v0 = v0
        self.v1 = v1
        self.tree = tree

    @property
    def trace(self) -> list[TraceEntry]:
        return self.tree.trace()

    def policy_at(self, k: int, x: np.ndarray, alpha: int) -> tuple[MixedPolicy2, MixedPolicy2]:
        return self.tree.policy_at(k, x, alpha)


@log_and_validate(logger)
def evaluate_value_tree(
    spec: GameSpec, terminal: Optional[TerminalCondition] = None, cap: Optional[int] = None
) -> TreeEvaluation:
    cap = CONF.tree_cap if cap is None else cap
    if spec.L > cap:
        raise HorizonCapExceeded(f"horizon {spec.L} exceeds the tree cap of {cap}", {"cap": cap})
    tree = ValueTree(spec, terminal or spec.terminal_condition())
    root = tree.node(0, spec.x0)
    logger.debug(f"value tree holds {len(tree)} nodes")
    return TreeEvaluation(v0=root.v0, v1=root.v1, tree=tree)
