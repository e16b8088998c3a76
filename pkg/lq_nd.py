"""Approximate quadratic value recursion for n-dimensional linear FlipDyn
games with quadratic costs x'Qx, x'Dx, x'Ax.

V^alpha_k(x) is parameterized as x' P^alpha_k x. The parameterization bounds
the exact one-step values from the correct sides when A and D are multiples
of the identity, and is valid at a step when Pcheck dominates both A and D.
"""

import logging
from typing import Optional

import numpy as np

from all_types.game_dtypes import CostModel, GameSpec, MixedPolicy2, TerminalCondition
from all_types.lq_dtypes import NdLQParams, NdValueMatrices
from config_factory import CONF
from constants import CAUCHY_SCHWARZ_TOL, LOEWNER_TOL, MAX_CONDITION, SINGULAR_EIG_TOL
from game_errors import (
    DegenerateQuadraticForm,
    InvalidStep,
    NotPositiveDefinite,
    SingularPcheck,
    ValidityViolation,
    ZeroState,
)
from lqr_synthesis import build_linear_game
from logging_wrapper import log_and_validate

logger = logging.getLogger(__name__)


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def loewner_geq(M: np.ndarray, N: np.ndarray, tol: float = LOEWNER_TOL) -> bool:
    """M >= N in the Loewner order, up to ``tol`` on the smallest eigenvalue."""
    return bool(np.linalg.eigvalsh(symmetrize(M - N)).min() >= -tol)


def terminal_matrices(params: NdLQParams) -> tuple[np.ndarray, np.ndarray]:
    n, Q, D, A = params.n, params.Q, params.D, params.A
    slack = params.mu * np.eye(n)
    if loewner_geq(A, D):
        P1 = Q + A + slack
    elif loewner_geq(D, A):
        P1 = Q + D + slack
    else:
        # incomparable: dominate both Q + A and Q + D
        top = max(np.linalg.eigvalsh(A).max(), np.linalg.eigvalsh(D).max())
        P1 = Q + top * np.eye(n) + slack
    return Q.copy(), symmetrize(P1)


def _symmetric_inverse(P: np.ndarray, k: int) -> np.ndarray:
    w, V = np.linalg.eigh(P)
    magnitudes = np.abs(w)
    if magnitudes.min() < SINGULAR_EIG_TOL:
        raise SingularPcheck(f"Pcheck has an eigenvalue of magnitude {magnitudes.min():.3e}", k)
    condition = magnitudes.max() / magnitudes.min()
    if condition > MAX_CONDITION:
        raise SingularPcheck(f"Pcheck condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}", k)
    return (V / w) @ V.T


@log_and_validate(logger)
def nd_backward_recursion(params: NdLQParams, strict: Optional[bool] = None) -> NdValueMatrices:
    strict = CONF.strict if strict is None else strict
    L, n = params.L, params.n
    Q, D, A = params.Q, params.D, params.A
    Bt, Wt = params.btilde, params.wtilde

    P0 = np.empty((L + 1, n, n))
    P1 = np.empty((L + 1, n, n))
    Pcheck = np.empty((L, n, n))
    valid = np.zeros(L, dtype=bool)
    P0[L], P1[L] = terminal_matrices(params)

    for k in range(L - 1, -1, -1):
        carried0 = Bt.T @ P0[k + 1] @ Bt
        carried1 = Wt.T @ P1[k + 1] @ Wt
        Pc = symmetrize(carried1 - carried0)
        Pcheck[k] = Pc

        coupling = symmetrize(D @ _symmetric_inverse(Pc, k) @ A)
        P0[k] = symmetrize(Q + D + carried0 - coupling)
        P1[k] = symmetrize(Q - A + carried1 + coupling)

        valid[k] = loewner_geq(Pc, A) and loewner_geq(Pc, D)
        if not valid[k]:
            if strict:
                raise ValidityViolation("Pcheck does not dominate both A and D", k)
            logger.debug(f"step {k}: Loewner validity fails")

    if not valid.all():
        logger.warning(f"n-D recursion: {int((~valid).sum())} of {L} steps fail the Loewner conditions")
    return NdValueMatrices(P0=P0, P1=P1, Pcheck=Pcheck, Btilde=Bt, Wtilde=Wt, valid=valid)


def nd_policy(
    x: np.ndarray, matrices: NdValueMatrices, params: NdLQParams, k: int, alpha: int
) -> tuple[MixedPolicy2, MixedPolicy2]:
    """(defender, adversary) policies at x.

    For alpha = 0 the defender idles with probability x'Ax / x'Pcheck x and
    the adversary acts with probability x'Dx / x'Pcheck x; alpha = 1 swaps
    idle and act for both players.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        raise ZeroState("policy is undefined at x = 0", {"k": k})
    if not 0 <= k < matrices.L:
        raise InvalidStep(f"policy requested outside 0..{matrices.L - 1}", k)
    if not matrices.valid[k]:
        raise InvalidStep("step fails the Loewner validity conditions", k)

    qA = x @ params.A @ x
    qD = x @ params.D @ x
    qP = x @ matrices.Pcheck[k] @ x
    if alpha:
        return MixedPolicy2.from_act(qA / qP), MixedPolicy2.from_act((qP - qD) / qP)
    return MixedPolicy2.from_act((qP - qA) / qP), MixedPolicy2.from_act(qD / qP)


def exact_one_step_values(
    x: np.ndarray, P0_next: np.ndarray, P1_next: np.ndarray, params: NdLQParams
) -> tuple[float, float]:
    """Unparameterized one-step values at x given quadratic continuations."""
    x = np.asarray(x, dtype=np.float64)
    Bt, Wt = params.btilde, params.wtilde
    qB = x @ Bt.T @ P0_next @ Bt @ x
    qW = x @ Wt.T @ P1_next @ Wt @ x
    gap = qW - qB
    if abs(gap) < SINGULAR_EIG_TOL * max(1.0, abs(qW), abs(qB)):
        raise DegenerateQuadraticForm("x'Ptilde x vanishes", {"x": x.tolist()})
    qQ, qD, qA = x @ params.Q @ x, x @ params.D @ x, x @ params.A @ x
    coupling = qD * qA / gap
    return float(qQ + qD + qB - coupling), float(qQ - qA + qW + coupling)


def inverse_form_bound_holds(P: np.ndarray, x: np.ndarray) -> bool:
    """(x'x)^2 <= (x'Px)(x'P^-1 x) for positive definite P."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    if not np.allclose(P, P.T, atol=1e-12) or np.linalg.eigvalsh(symmetrize(P)).min() <= 0.0:
        raise NotPositiveDefinite("bound check needs a symmetric positive-definite matrix")
    if not np.any(x):
        raise ZeroState("bound check needs x != 0")
    lhs = float(x @ x) ** 2
    rhs = float(x @ P @ x) * float(x @ np.linalg.solve(P, x))
    return lhs <= rhs + CAUCHY_SCHWARZ_TOL * max(1.0, abs(rhs))


def to_game_spec(params: NdLQParams, x0, alpha0: int = 0) -> GameSpec:
    """General-game view of the instance, terminal condition included."""
    E = params.B if params.E is None else params.E
    dynamics = build_linear_game(params.F, params.B, E, params.K, params.W)
    P0_L, P1_L = terminal_matrices(params)
    return GameSpec(
        dynamics=dynamics,
        costs=CostModel.quadratic(params.Q, params.D, params.A),
        L=params.L,
        x0=x0,
        alpha0=alpha0,
        terminal=TerminalCondition.quadratic(P0_L, P1_L),
        mu=params.mu,
    )
