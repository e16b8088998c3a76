"""Closed-form FlipDyn solution for scalar linear dynamics with quadratic
costs g x^2, d x^2, a x^2.

Value functions stay exactly quadratic, V^alpha_k(x) = p^alpha_k x^2, and the
equilibrium policies depend only on the coefficients.
"""

import logging
from typing import Optional

import numpy as np

import matrix_game
from all_types.game_dtypes import ClosedLoopDynamics, CostModel, GameSpec, MixedPolicy2, TerminalCondition
from all_types.lq_dtypes import ScalarLQParams, ScalarValueCoeffs
from config_factory import CONF
from finite_solver import payoff_matrices_from_values
from game_errors import InvalidStep, ValidityViolation
from logging_wrapper import log_and_validate

logger = logging.getLogger(__name__)


def _step_valid(ptilde: float, p0: float, d: float, a: float) -> bool:
    # ptilde >= max(d, a) alone admits ptilde == 0 when d = a = 0, and the
    # closed-form policies divide by ptilde
    return ptilde > 0.0 and ptilde >= max(d, a) and p0 >= 0.0


def coefficient_game(
    params: ScalarLQParams, k: int, p0_next: float, p1_next: float
) -> tuple[float, float]:
    """Exact one-step coefficients from the 2x2 games of the coefficient
    matrices; agrees with the closed form wherever that applies."""
    b2, w2 = params.btilde(k) ** 2, params.wtilde(k) ** 2
    xi0, xi1 = payoff_matrices_from_values(b2 * p0_next, w2 * p1_next, params.d, params.a)
    return (
        params.g + matrix_game.solve(xi0).value,
        params.g + matrix_game.solve(xi1).value,
    )


@log_and_validate(logger)
def scalar_backward_recursion(
    params: ScalarLQParams, strict: Optional[bool] = None
) -> ScalarValueCoeffs:
    strict = CONF.strict if strict is None else strict
    L, g, d, a = params.L, params.g, params.d, params.a

    p0 = np.empty(L + 1)
    p1 = np.empty(L + 1)
    ptilde = np.empty(L)
    valid = np.zeros(L, dtype=bool)
    p0[L] = g
    p1[L] = params.terminal_p1

    for k in range(L - 1, -1, -1):
        b2 = params.btilde(k) ** 2
        w2 = params.wtilde(k) ** 2
        pt = w2 * p1[k + 1] - b2 * p0[k + 1]
        ptilde[k] = pt

        correction = d * a / pt if (d * a != 0.0 and pt != 0.0) else 0.0
        p0_k = g + b2 * p0[k + 1] + d - correction
        p1_k = g + w2 * p1[k + 1] - a + correction
        valid[k] = _step_valid(pt, p0_k, d, a)

        if not valid[k]:
            if strict:
                raise ValidityViolation(
                    f"mixed-equilibrium condition fails: ptilde={pt:.6g}, max(d, a)={max(d, a):.6g}, p0={p0_k:.6g}",
                    k,
                )
            logger.debug(f"step {k} invalid (ptilde={pt:.6g}); using the exact coefficient game")
            p0_k, p1_k = coefficient_game(params, k, p0[k + 1], p1[k + 1])
        p0[k], p1[k] = p0_k, p1_k

    if not valid.all():
        logger.warning(
            f"scalar recursion: {int((~valid).sum())} of {L} steps violate the mixed-equilibrium condition"
        )
    return ScalarValueCoeffs(p0=p0, p1=p1, ptilde=ptilde, valid=valid)


def scalar_policy(
    coeffs: ScalarValueCoeffs, params: ScalarLQParams, k: int, alpha: int
) -> tuple[MixedPolicy2, MixedPolicy2]:
    """(defender, adversary) equilibrium policies at step k.

    For alpha = 0 the defender idles with probability a / ptilde and the
    adversary idles with probability (ptilde - d) / ptilde; alpha = 1 swaps
    idle and act for both players.
    """
    if not 0 <= k < coeffs.L:
        raise InvalidStep(f"policy requested outside 0..{coeffs.L - 1}", k)
    if not coeffs.valid[k]:
        raise InvalidStep("step violates the mixed-equilibrium condition", k)
    pt = coeffs.ptilde[k]
    if alpha:
        return MixedPolicy2.from_act(params.a / pt), MixedPolicy2.from_act((pt - params.d) / pt)
    return MixedPolicy2.from_act((pt - params.a) / pt), MixedPolicy2.from_act(params.d / pt)


def scalar_value_at(coeffs: ScalarValueCoeffs, x: float, alpha: int, k: int) -> float:
    p = coeffs.p1[k] if alpha else coeffs.p0[k]
    x = float(np.asarray(x).reshape(-1)[0])
    return float(p * x * x)


def policy_table(coeffs: ScalarValueCoeffs, params: ScalarLQParams) -> dict[str, np.ndarray]:
    """beta_star / gamma_star per step: idle probabilities of the defender and
    the adversary for alpha = 0. NaN where the step is invalid."""
    beta = np.full(coeffs.L, np.nan)
    gamma = np.full(coeffs.L, np.nan)
    for k in range(coeffs.L):
        if coeffs.valid[k]:
            defender, adversary = scalar_policy(coeffs, params, k, 0)
            beta[k], gamma[k] = defender.p_idle, adversary.p_idle
    return {"k": np.arange(coeffs.L), "beta_star": beta, "gamma_star": gamma}


def coefficient_game_policy(
    coeffs: ScalarValueCoeffs, params: ScalarLQParams, k: int, alpha: int
) -> tuple[MixedPolicy2, MixedPolicy2]:
    """Equilibrium of the coefficient game at step k, valid or not."""
    b2, w2 = params.btilde(k) ** 2, params.wtilde(k) ** 2
    xi0, xi1 = payoff_matrices_from_values(
        b2 * coeffs.p0[k + 1], w2 * coeffs.p1[k + 1], params.d, params.a
    )
    game = matrix_game.solve(xi1 if alpha else xi0)
    return game.row_policy, game.col_policy


def to_game_spec(params: ScalarLQParams, x0: float, alpha0: int = 0) -> GameSpec:
    """The same instance as a general game: linear maps, quadratic costs and
    the quadratic terminal condition."""
    time_varying = any(isinstance(getattr(params, n), list) for n in ("F", "B", "E", "K", "W"))

    def _linear(gain: float):
        return lambda x: gain * x

    dynamics = ClosedLoopDynamics(
        n=1,
        f0=_linear(params.btilde(0)),
        f1=_linear(params.wtilde(0)),
        f0_steps=[_linear(params.btilde(k)) for k in range(params.L)] if time_varying else None,
        f1_steps=[_linear(params.wtilde(k)) for k in range(params.L)] if time_varying else None,
    )
    return GameSpec(
        dynamics=dynamics,
        costs=CostModel.scalar_quadratic(params.g, params.d, params.a),
        L=params.L,
        x0=[x0],
        alpha0=alpha0,
        terminal=TerminalCondition.quadratic([[params.g]], [[params.terminal_p1]]),
        mu=params.mu,
    )
