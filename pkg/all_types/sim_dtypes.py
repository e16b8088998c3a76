from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from all_types.game_dtypes import FlipState


class ForcedEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    step: int = Field(..., ge=0, description="step whose FlipDyn state is overridden")
    alpha: FlipState = Field(..., description="state imposed at that step")


class RolloutConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(..., ge=0, lt=2**64)
    runs: int = Field(1, ge=1)
    forced_events: list[ForcedEvent] = Field(default_factory=list)
    record_policies: bool = True
    keep_trajectories: int = Field(
        0, ge=0, description="number of leading runs whose full trajectories are kept"
    )
    workers: int = Field(1, ge=1)


class TrajectoryRecord(BaseModel):
    """One realized path. Arrays have L+1 rows; row L is the terminal charge
    with idle actions."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    run: int
    x: np.ndarray
    alpha: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    stage_cost: np.ndarray
    p_act_defender: Optional[np.ndarray] = None
    p_act_adversary: Optional[np.ndarray] = None

    @property
    def L(self) -> int:
        return len(self.alpha) - 1

    @property
    def total_cost(self) -> float:
        return float(self.stage_cost.sum())


class AggregateStats(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    runs: int
    mean_alpha: np.ndarray
    mean_beta: np.ndarray
    mean_gamma: np.ndarray
    mean_cost: float
    cost_std_error: float
    costs: np.ndarray
    trajectories: list[TrajectoryRecord] = Field(default_factory=list)
