from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from constants import DEFAULT_MU, LQR_MAX_ITER, LQR_TOL
from game_errors import ConfigurationError, NotPositiveDefinite

Coefficient = Union[float, list[float]]


def _min_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())


class ScalarLQParams(BaseModel):
    """Scalar plant x' = F x + B u + E w with u = -K x, w = W x.

    F, B, E, K, W may each be a constant or a per-step sequence of length L.
    E defaults to B.
    """

    model_config = ConfigDict(frozen=True)

    F: Coefficient
    B: Coefficient = 0.0
    E: Optional[Coefficient] = None
    K: Coefficient = 0.0
    W: Coefficient = 0.0
    g: float = Field(..., gt=0.0)
    d: float = Field(..., ge=0.0)
    a: float = Field(..., ge=0.0)
    mu: float = Field(DEFAULT_MU, ge=0.0)
    L: int

    @field_validator("L")
    @classmethod
    def _horizon(cls, v):
        if v < 1:
            raise ValueError("horizon must be >= 1")
        return v

    @model_validator(mode="after")
    def _sequence_lengths(self):
        for name in ("F", "B", "E", "K", "W"):
            value = getattr(self, name)
            if isinstance(value, list) and len(value) != self.L:
                raise ValueError(f"{name} sequence has length {len(value)}, expected L={self.L}")
        return self

    @classmethod
    def from_closed_loop(
        cls, btilde: float, wtilde: float, g: float, d: float, a: float, L: int, mu: float = DEFAULT_MU
    ) -> "ScalarLQParams":
        """Parameters whose closed loops are exactly btilde (defender) and wtilde (adversary)."""
        return cls(F=wtilde, B=1.0, K=wtilde - btilde, W=0.0, g=g, d=d, a=a, L=L, mu=mu)

    def _at(self, name: str, k: int) -> float:
        value = getattr(self, name)
        if name == "E" and value is None:
            value = self.B
        return float(value[k] if isinstance(value, list) else value)

    def btilde(self, k: int) -> float:
        return self._at("F", k) - self._at("B", k) * self._at("K", k)

    def wtilde(self, k: int) -> float:
        return self._at("F", k) + self._at("E", k) * self._at("W", k)

    @property
    def terminal_p1(self) -> float:
        return self.g + max(self.a, self.d) + self.mu


class ScalarValueCoeffs(BaseModel):
    """p0/p1 have L+1 entries; ptilde[k] and valid[k] belong to step k < L."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p0: np.ndarray
    p1: np.ndarray
    ptilde: np.ndarray
    valid: np.ndarray

    @property
    def L(self) -> int:
        return len(self.p0) - 1

    @property
    def all_valid(self) -> bool:
        return bool(self.valid.all())


class NdLQParams(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    F: np.ndarray
    B: np.ndarray
    E: Optional[np.ndarray] = None
    K: np.ndarray
    W: Optional[np.ndarray] = None
    Q: np.ndarray
    D: np.ndarray
    A: np.ndarray
    mu: float = Field(DEFAULT_MU, ge=0.0)
    L: int

    @field_validator("F", "B", "E", "K", "W", "Q", "D", "A", mode="before")
    @classmethod
    def _as_matrix(cls, v):
        if v is None:
            return v
        return np.atleast_2d(np.asarray(v, dtype=np.float64))

    @field_validator("L")
    @classmethod
    def _horizon(cls, v):
        if v < 1:
            raise ValueError("horizon must be >= 1")
        return v

    @model_validator(mode="after")
    def _consistency(self):
        n = self.F.shape[0]
        if self.F.shape != (n, n):
            raise ConfigurationError(f"F must be square, got {self.F.shape}")
        m = self.B.shape[1]
        if self.B.shape[0] != n:
            raise ConfigurationError(f"B must have {n} rows, got {self.B.shape}")
        if self.K.shape != (m, n):
            raise ConfigurationError(f"K must be {m}x{n}, got {self.K.shape}")
        E = self.B if self.E is None else self.E
        if E.shape[0] != n:
            raise ConfigurationError(f"E must have {n} rows, got {E.shape}")
        if self.W is not None and self.W.shape != (E.shape[1], n):
            raise ConfigurationError(f"W must be {E.shape[1]}x{n}, got {self.W.shape}")
        for name in ("Q", "D", "A"):
            M = getattr(self, name)
            if M.shape != (n, n):
                raise ConfigurationError(f"{name} must be {n}x{n}, got {M.shape}")
            if not np.allclose(M, M.T, atol=1e-12):
                raise NotPositiveDefinite(f"{name} must be symmetric")
            if _min_eig(M) <= 0.0:
                raise NotPositiveDefinite(f"{name} must be positive definite", {"min_eig": _min_eig(M)})
        return self

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def btilde(self) -> np.ndarray:
        return self.F - self.B @ self.K

    @property
    def wtilde(self) -> np.ndarray:
        E = self.B if self.E is None else self.E
        W = np.zeros((E.shape[1], self.n)) if self.W is None else self.W
        return self.F + E @ W


class NdValueMatrices(BaseModel):
    """P0/P1 are stacked (L+1, n, n); Pcheck[k] is the gap matrix used at step k."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    P0: np.ndarray
    P1: np.ndarray
    Pcheck: np.ndarray
    Btilde: np.ndarray
    Wtilde: np.ndarray
    valid: np.ndarray

    @property
    def L(self) -> int:
        return self.P0.shape[0] - 1

    def min_eigs(self) -> dict[str, np.ndarray]:
        return {
            "min_eig_P0": np.array([_min_eig(P) for P in self.P0]),
            "min_eig_P1": np.array([_min_eig(P) for P in self.P1]),
            "min_eig_Pcheck": np.array([_min_eig(P) for P in self.Pcheck]),
        }


class LqrWeights(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    Qc: np.ndarray
    Rc: np.ndarray
    iterations: int = Field(LQR_MAX_ITER, ge=1)
    tol: float = Field(LQR_TOL, gt=0.0)

    @field_validator("Qc", "Rc", mode="before")
    @classmethod
    def _as_matrix(cls, v):
        return np.atleast_2d(np.asarray(v, dtype=np.float64))

    @model_validator(mode="after")
    def _definiteness(self):
        if _min_eig(self.Rc) <= 0.0:
            raise NotPositiveDefinite("Rc must be positive definite")
        if _min_eig(self.Qc) < -1e-12:
            raise NotPositiveDefinite("Qc must be positive semidefinite")
        return self

    @classmethod
    def identity(cls, n: int, m: int) -> "LqrWeights":
        return cls(Qc=np.eye(n), Rc=np.eye(m))
