from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from all_types.game_dtypes import GameSolution2, MixedPolicy2
from game_errors import EnumerationNotClosed


class StateEnumeration(BaseModel):
    """Finite state set closed under both closed-loop maps.

    ``transitions[t, s, alpha]`` is the id of the successor of state ``s``
    under the map of player ``alpha``; ``t`` is the step for time-varying
    dynamics and always 0 otherwise.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    states: np.ndarray
    transitions: np.ndarray

    _index: dict[bytes, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_closure(self):
        if self.states.ndim != 2:
            raise ValueError(f"states must be a (S, n) array, got {self.states.shape}")
        S = self.states.shape[0]
        if self.transitions.ndim != 3 or self.transitions.shape[1:] != (S, 2):
            raise ValueError(f"transitions must have shape (T, {S}, 2), got {self.transitions.shape}")
        if self.transitions.size and (self.transitions.min() < 0 or self.transitions.max() >= S):
            raise EnumerationNotClosed("transition table points outside the enumeration")
        return self

    def model_post_init(self, __context) -> None:
        self._index.update({row.tobytes(): i for i, row in enumerate(self.states)})

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def id_of(self, x: np.ndarray) -> int:
        try:
            return self._index[np.asarray(x, dtype=np.float64).tobytes()]
        except KeyError:
            raise EnumerationNotClosed("state is not part of the enumeration", {"x": np.asarray(x).tolist()}) from None

    def successor(self, s: int, alpha: int, k: int) -> int:
        t = k if self.transitions.shape[0] > 1 else 0
        return int(self.transitions[t, s, alpha])


class CellSolution(BaseModel):
    """Both FlipDyn branches of one (k, x) cell."""

    model_config = ConfigDict(frozen=True)

    v0: float
    v1: float
    game0: Optional[GameSolution2] = None
    game1: Optional[GameSolution2] = None
    mixed: bool = False

    def policies(self, alpha: int) -> tuple[MixedPolicy2, MixedPolicy2]:
        game = self.game1 if alpha else self.game0
        if game is None:
            raise ValueError("terminal cells carry no policy")
        return game.row_policy, game.col_policy


class TraceEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int
    x: list[float]
    v0: float
    v1: float
    defender_act: tuple[float, float] = Field(..., description="defender p_act for alpha = 0, 1")
    adversary_act: tuple[float, float] = Field(..., description="adversary p_act for alpha = 0, 1")
    mixed: bool


class ValueTables(BaseModel):
    """V0/V1 are (L+1, S); policy arrays are (L, S, 2) indexed by FlipDyn state."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, revalidate_instances="always")

    V0: np.ndarray
    V1: np.ndarray
    defender_act: np.ndarray
    adversary_act: np.ndarray
    mixed: np.ndarray
    enumeration: StateEnumeration

    @model_validator(mode="after")
    def _check_tables(self):
        S = self.enumeration.size
        if self.V0.ndim != 2 or self.V0.shape[1] != S or self.V1.shape != self.V0.shape:
            raise ValueError(f"value tables must be (L+1, {S}), got {self.V0.shape} and {self.V1.shape}")
        expected = (self.V0.shape[0] - 1, S, 2)
        for name in ("defender_act", "adversary_act", "mixed"):
            if getattr(self, name).shape != expected:
                raise ValueError(f"{name} must have shape {expected}, got {getattr(self, name).shape}")
        for name in ("defender_act", "adversary_act"):
            p = getattr(self, name)
            if p.size and not (np.all(p >= 0.0) and np.all(p <= 1.0)):
                raise ValueError(f"{name} holds probabilities outside [0, 1]")
        if not (np.isfinite(self.V0).all() and np.isfinite(self.V1).all()):
            raise ValueError("value tables hold non-finite entries")
        return self

    @property
    def L(self) -> int:
        return self.V0.shape[0] - 1

    def value(self, k: int, s: int, alpha: int) -> float:
        return float(self.V1[k, s] if alpha else self.V0[k, s])

    def policies(self, k: int, s: int, alpha: int) -> tuple[MixedPolicy2, MixedPolicy2]:
        return (
            MixedPolicy2.from_act(self.defender_act[k, s, alpha]),
            MixedPolicy2.from_act(self.adversary_act[k, s, alpha]),
        )
