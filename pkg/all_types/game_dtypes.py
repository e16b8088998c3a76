from enum import Enum, IntEnum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from constants import DEFAULT_MU

StateMap = Callable[[np.ndarray], np.ndarray]
ScalarField = Callable[[np.ndarray], float]


def as_state(x) -> np.ndarray:
    """Coerce to a finite 1-D float64 vector (scalars become length-1)."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1:
        raise ValueError(f"state must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state entries must be finite")
    return arr


class FlipState(IntEnum):
    DEFENDER = 0
    ADVERSARY = 1


class GameKind(str, Enum):
    MIXED = "mixed"
    PURE = "pure"


class ActionPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    a0: int = Field(..., ge=0, le=1, description="defender takeover action")
    a1: int = Field(..., ge=0, le=1, description="adversary takeover action")


class MixedPolicy2(BaseModel):
    """Distribution over (idle, act) for one player at one step.

    Index 0 of ``as_vector`` is idle and index 1 is act, the same order as the
    rows and columns of the cost-to-go matrices.
    """

    model_config = ConfigDict(frozen=True)

    p_act: float = Field(..., ge=0.0, le=1.0)
    p_idle: float = Field(..., ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _sums_to_one(self):
        if abs(self.p_act + self.p_idle - 1.0) > 1e-12:
            raise ValueError(f"p_act + p_idle must be 1, got {self.p_act + self.p_idle}")
        return self

    @classmethod
    def from_act(cls, p_act: float) -> "MixedPolicy2":
        p = min(max(float(p_act), 0.0), 1.0)
        return cls(p_act=p, p_idle=1.0 - p)

    @classmethod
    def from_vector(cls, vec) -> "MixedPolicy2":
        """Build from an (idle, act) vector, trusting only the act entry."""
        return cls.from_act(vec[1])

    @classmethod
    def pure(cls, act: bool) -> "MixedPolicy2":
        return cls.from_act(1.0 if act else 0.0)

    def as_vector(self) -> np.ndarray:
        return np.array([self.p_idle, self.p_act])

    def prob(self, action: int) -> float:
        return self.p_act if action else self.p_idle


class ClosedLoopDynamics(BaseModel):
    """Closed-loop maps under defender control (f0) and adversary control (f1).

    ``f0_steps`` / ``f1_steps`` make the maps time-indexed; when given they
    must cover every step of the horizon that uses them.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int = Field(..., ge=1)
    f0: StateMap
    f1: StateMap
    f0_steps: Optional[list[StateMap]] = None
    f1_steps: Optional[list[StateMap]] = None
    btilde: Optional[np.ndarray] = None
    wtilde: Optional[np.ndarray] = None

    @property
    def time_varying(self) -> bool:
        return self.f0_steps is not None or self.f1_steps is not None

    @property
    def steps_available(self) -> Optional[int]:
        lengths = [len(s) for s in (self.f0_steps, self.f1_steps) if s is not None]
        return min(lengths) if lengths else None

    def map_for(self, alpha: int, k: int) -> StateMap:
        steps = self.f1_steps if alpha else self.f0_steps
        if steps is not None:
            return steps[k]
        return self.f1 if alpha else self.f0


class CostModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    g: ScalarField
    d: ScalarField
    a: ScalarField
    Q: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None

    @classmethod
    def quadratic(cls, Q, D, A) -> "CostModel":
        Q, D, A = (np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in (Q, D, A))
        return cls(
            g=lambda x: float(x @ Q @ x),
            d=lambda x: float(x @ D @ x),
            a=lambda x: float(x @ A @ x),
            Q=Q,
            D=D,
            A=A,
        )

    @classmethod
    def scalar_quadratic(cls, g: float, d: float, a: float) -> "CostModel":
        return cls.quadratic([[g]], [[d]], [[a]])

    @classmethod
    def constant(cls, g: float, d: float, a: float) -> "CostModel":
        return cls(g=lambda x: g, d=lambda x: d, a=lambda x: a)


class TerminalCondition(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: str
    V0: ScalarField
    V1: ScalarField

    @classmethod
    def slack(cls, costs: CostModel, mu: float = DEFAULT_MU) -> "TerminalCondition":
        """V0 = g, V1 = g + max(a, d) + mu * (1 + g)."""
        if mu < 0:
            raise ValueError("mu must be nonnegative")

        def v1(x):
            gx = costs.g(x)
            return gx + max(costs.a(x), costs.d(x)) + mu * (1.0 + gx)

        return cls(kind="slack", V0=costs.g, V1=v1)

    @classmethod
    def quadratic(cls, P0_L, P1_L) -> "TerminalCondition":
        P0 = np.atleast_2d(np.asarray(P0_L, dtype=np.float64))
        P1 = np.atleast_2d(np.asarray(P1_L, dtype=np.float64))
        return cls(
            kind="quadratic",
            V0=lambda x: float(x @ P0 @ x),
            V1=lambda x: float(x @ P1 @ x),
        )

    @classmethod
    def from_values(cls, V0: ScalarField, V1: ScalarField, kind: str = "custom") -> "TerminalCondition":
        return cls(kind=kind, V0=V0, V1=V1)

    def value(self, alpha: int, x: np.ndarray) -> float:
        return float(self.V1(x) if alpha else self.V0(x))


class GameSpec(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dynamics: ClosedLoopDynamics
    costs: CostModel
    L: int
    x0: np.ndarray
    alpha0: FlipState = FlipState.DEFENDER
    terminal: Optional[TerminalCondition] = None
    mu: float = Field(DEFAULT_MU, ge=0.0)

    @field_validator("x0", mode="before")
    @classmethod
    def _coerce_x0(cls, v):
        return as_state(v)

    @field_validator("L")
    @classmethod
    def _horizon(cls, v):
        if v < 1:
            raise ValueError("horizon must be >= 1")
        return v

    @model_validator(mode="after")
    def _dimensions(self):
        if self.x0.shape[0] != self.dynamics.n:
            raise ValueError(
                f"x0 has dimension {self.x0.shape[0]} but dynamics expect n={self.dynamics.n}"
            )
        available = self.dynamics.steps_available
        if available is not None and available < self.L:
            raise ValueError(f"time-varying dynamics cover {available} steps, horizon is {self.L}")
        return self

    def terminal_condition(self) -> TerminalCondition:
        return self.terminal or TerminalCondition.slack(self.costs, self.mu)


class PayoffMatrix2(BaseModel):
    """[[m1, m2], [m3, m4]]; the row player minimizes."""

    model_config = ConfigDict(frozen=True)

    m1: float = Field(..., allow_inf_nan=False)
    m2: float = Field(..., allow_inf_nan=False)
    m3: float = Field(..., allow_inf_nan=False)
    m4: float = Field(..., allow_inf_nan=False)

    @classmethod
    def from_array(cls, arr) -> "PayoffMatrix2":
        M = np.asarray(arr, dtype=np.float64)
        if M.shape != (2, 2):
            raise ValueError(f"payoff matrix must be 2x2, got {M.shape}")
        return cls(m1=M[0, 0], m2=M[0, 1], m3=M[1, 0], m4=M[1, 1])

    def as_array(self) -> np.ndarray:
        return np.array([[self.m1, self.m2], [self.m3, self.m4]])

    def affine(self, scale: float, shift: float) -> "PayoffMatrix2":
        return PayoffMatrix2.from_array(scale * self.as_array() + shift)


class GameSolution2(BaseModel):
    model_config = ConfigDict(frozen=True)

    row_policy: MixedPolicy2
    col_policy: MixedPolicy2
    value: float
    kind: GameKind
    saddle: Optional[tuple[int, int]] = None
