from datetime import datetime
from typing import Any, Literal, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

from all_types.sim_dtypes import AggregateStats, ForcedEvent
from constants import DEFAULT_MU, LQR_MAX_ITER, LQR_TOL

# a number means "that multiple of the identity"; matrices are row-major nested lists
MatrixLike = Union[float, list[float], list[list[float]]]


class LqrBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    Qc: MatrixLike = 1.0
    Rc: MatrixLike = 1.0
    iterations: int = Field(LQR_MAX_ITER, ge=1)
    tol: float = Field(LQR_TOL, gt=0.0)


class ScalarBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    F: float
    B: Optional[float] = Field(None, description="control channel; defaults to delta")
    delta: Optional[float] = Field(None, gt=0.0, description="sample time")
    E: Optional[float] = None
    K: Optional[float] = Field(None, description="defender gain; synthesized by LQR when omitted")
    W: float = 0.0
    lqr: Optional[LqrBlock] = None
    g: float = Field(..., gt=0.0)
    d: float = Field(..., ge=0.0)
    a: float = Field(..., ge=0.0)


class NdBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    plant: Literal["matrices", "double_integrator"] = "matrices"
    f_hat: Optional[float] = None
    delta: Optional[float] = Field(None, gt=0.0)
    F: Optional[list[list[float]]] = None
    B: Optional[list[list[float]]] = None
    E: Optional[list[list[float]]] = None
    K: Optional[list[list[float]]] = None
    W: Optional[list[list[float]]] = None
    lqr: Optional[LqrBlock] = None
    Q: MatrixLike
    D: MatrixLike
    A: MatrixLike


class FiniteBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    states: list[list[float]]
    f0: list[int] = Field(..., description="successor state index under defender control")
    f1: list[int] = Field(..., description="successor state index under adversary control")
    g: list[float]
    d: list[float]
    a: list[float]
    terminal_V0: Optional[list[float]] = None
    terminal_V1: Optional[list[float]] = None
    initial_state: int = Field(0, ge=0)


class SimulationBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(..., ge=0, lt=2**64)
    runs: int = Field(500, ge=1)
    forced_events: list[ForcedEvent] = Field(default_factory=list)
    x0: Optional[Union[float, list[float]]] = None
    alpha0: Literal[0, 1] = 0
    keep_trajectories: int = Field(0, ge=0)
    workers: Optional[int] = Field(None, ge=1, description="defaults to the FLIPDYN_WORKERS setting")


class OutputBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: Optional[str] = None


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    mode: Literal["scalar", "nd", "finite"]
    horizon: int
    mu: float = Field(DEFAULT_MU, ge=0.0)
    validity: Optional[Literal["strict", "permissive"]] = None
    scalar: Optional[ScalarBlock] = None
    nd: Optional[NdBlock] = None
    finite: Optional[FiniteBlock] = None
    simulation: Optional[SimulationBlock] = None
    output: OutputBlock = Field(default_factory=OutputBlock)

    _source_hash: Optional[str] = PrivateAttr(default=None)

    @field_validator("horizon")
    @classmethod
    def _horizon(cls, v):
        if v < 1:
            raise ValueError("horizon must be >= 1")
        return v


class SuiteConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    configs: list[str] = Field(..., min_length=1)


class ResultsMetadata(BaseModel):
    name: str
    mode: str
    config_hash: str
    library_version: str
    rng: str
    validity: str
    created_at: datetime


class ResultsBundle(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    metadata: ResultsMetadata
    tables: dict[str, pd.DataFrame] = Field(default_factory=dict)
    matrices: dict[str, Any] = Field(default_factory=dict)
    summary: dict[str, Any] = Field(default_factory=dict)
    stats: Optional[AggregateStats] = None
