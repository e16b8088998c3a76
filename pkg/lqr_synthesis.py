import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from all_types.game_dtypes import ClosedLoopDynamics
from all_types.lq_dtypes import LqrWeights
from constants import MAX_CONDITION
from game_errors import ConfigurationError, NonConvergence, SingularInnerMatrix
from logging_wrapper import log_and_validate

logger = logging.getLogger(__name__)


class RiccatiSolution(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    S: np.ndarray
    K: np.ndarray
    iterations: int
    residual: float
    min_eigs: np.ndarray  # smallest eigenvalue of every iterate, S_0 included


def _check_dimensions(F: np.ndarray, B: np.ndarray, weights: LqrWeights) -> None:
    n, m = B.shape
    if F.shape != (n, n):
        raise ConfigurationError("inconsistent system dimensions", {"F": F.shape, "B": B.shape})
    if weights.Qc.shape != (n, n) or weights.Rc.shape != (m, m):
        raise ConfigurationError(
            "incorrect weighting matrix dimensions",
            {"Qc": weights.Qc.shape, "Rc": weights.Rc.shape, "n": n, "m": m},
        )


def _feedback(F: np.ndarray, B: np.ndarray, S: np.ndarray, Rc: np.ndarray) -> np.ndarray:
    """(Rc + B'SB)^-1 B'SF"""
    inner = Rc + B.T @ S @ B
    try:
        if np.linalg.cond(inner) > MAX_CONDITION:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.solve(inner, B.T @ S @ F)
    except np.linalg.LinAlgError as e:
        raise SingularInnerMatrix("Rc + B'SB is singular", {"cond": float(np.linalg.cond(inner))}) from e


@log_and_validate(logger)
def solve_riccati(F, B, weights: LqrWeights) -> RiccatiSolution:
    """Fixed-point iteration of the discrete algebraic Riccati equation from
    S_0 = Qc. Converged when the infinity-norm step falls below
    ``tol * max(1, |S|)``."""
    F = np.array(F, ndmin=2, dtype=float)
    B = np.array(B, ndmin=2, dtype=float)
    _check_dimensions(F, B, weights)

    S = weights.Qc.copy()
    min_eigs = [float(np.linalg.eigvalsh(S).min())]
    residual = np.inf
    for it in range(1, weights.iterations + 1):
        gain = _feedback(F, B, S, weights.Rc)
        S_next = weights.Qc + F.T @ S @ F - F.T @ S @ B @ gain
        S_next = 0.5 * (S_next + S_next.T)
        residual = float(np.linalg.norm(S_next - S, np.inf))
        S = S_next
        min_eigs.append(float(np.linalg.eigvalsh(S).min()))
        if residual < weights.tol * max(1.0, float(np.linalg.norm(S, np.inf))):
            return RiccatiSolution(
                S=S, K=_feedback(F, B, S, weights.Rc), iterations=it,
                residual=residual, min_eigs=np.array(min_eigs),
            )
    raise NonConvergence("Riccati iteration did not converge", residual, weights.iterations)


def lqr_gain(F, B, weights: Optional[LqrWeights] = None) -> np.ndarray:
    B = np.array(B, ndmin=2, dtype=float)
    if weights is None:
        weights = LqrWeights.identity(B.shape[0], B.shape[1])
    return solve_riccati(F, B, weights).K


def build_linear_game(F, B, E=None, K=None, W=None) -> ClosedLoopDynamics:
    """f0(x) = (F - BK)x, f1(x) = (F + EW)x. E defaults to B; K and W to zero."""
    F = np.array(F, ndmin=2, dtype=float)
    B = np.array(B, ndmin=2, dtype=float)
    E = B if E is None else np.array(E, ndmin=2, dtype=float)
    n = F.shape[0]
    if F.shape != (n, n) or B.shape[0] != n or E.shape[0] != n:
        raise ConfigurationError(
            "inconsistent system dimensions", {"F": F.shape, "B": B.shape, "E": E.shape}
        )
    K = np.zeros((B.shape[1], n)) if K is None else np.array(K, ndmin=2, dtype=float)
    W = np.zeros((E.shape[1], n)) if W is None else np.array(W, ndmin=2, dtype=float)
    if K.shape != (B.shape[1], n):
        raise ConfigurationError(f"K must be {B.shape[1]}x{n}", {"K": K.shape})
    if W.shape != (E.shape[1], n):
        raise ConfigurationError(f"W must be {E.shape[1]}x{n}", {"W": W.shape})

    Bt = F - B @ K
    Wt = F + E @ W
    return ClosedLoopDynamics(n=n, f0=lambda x: Bt @ x, f1=lambda x: Wt @ x, btilde=Bt, wtilde=Wt)


def single_integrator(F: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    return np.array([[F]], dtype=float), np.array([[delta]], dtype=float)


def double_integrator(f_hat: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Second-order plant with acceleration input and sample time ``delta``."""
    F = np.array([[f_hat, delta], [0.0, f_hat]])
    B = np.array([[0.5 * delta**2], [delta]])
    return F, B


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))
