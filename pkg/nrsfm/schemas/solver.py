from enum import Enum
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import Settings, settings
from ..errors import DataValidationError
from .model import ShapeStack


class Method(str, Enum):
    PINV = "pinv"
    RIGID = "rigid"
    TEMPORAL = "temporal"
    ST_L2 = "st-l2"
    ST_L1 = "st-l1"


# SolverConfig field -> Settings field; the defaults live in config.py only
_SETTING_NAMES = {
    "lambda1": "LAMBDA1",
    "lambda2": "LAMBDA2",
    "delta_ratio": "DELTA_RATIO",
    "irls_max_iters": "IRLS_MAX_ITERS",
    "cg_max_iters": "CG_MAX_ITERS",
    "cg_tol": "CG_TOL",
    "objective_tol": "OBJECTIVE_TOL",
    "inner_solver": "INNER_SOLVER",
}


def _default(field: str):
    return Settings.model_fields[_SETTING_NAMES[field]].default


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(default=_default("lambda1"), ge=0)
    lambda2: float = Field(default=_default("lambda2"), ge=0)
    delta: Optional[float] = Field(default=None, gt=0)
    delta_ratio: float = Field(default=_default("delta_ratio"), gt=0)
    irls_max_iters: int = Field(default=_default("irls_max_iters"), ge=1)
    cg_max_iters: int = Field(default=_default("cg_max_iters"), ge=1)
    cg_tol: float = Field(default=_default("cg_tol"), gt=0)
    objective_tol: float = Field(default=_default("objective_tol"), gt=0)
    inner_solver: Literal["cg", "gradient_descent"] = _default("inner_solver")

    @classmethod
    def from_settings(cls, source: Settings = settings, **overrides) -> "SolverConfig":
        values = {field: getattr(source, name) for field, name in _SETTING_NAMES.items()}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def resolve_delta(self, tracks: np.ndarray) -> float:
        """IRLS smoothing in pixel units: explicit delta, else delta_ratio * max|W|"""
        if self.delta is not None:
            return self.delta
        scale = float(np.max(np.abs(tracks))) if tracks.size else 0.0
        return self.delta_ratio * scale if scale > 0 else self.delta_ratio


class IrlsWeights(BaseModel):
    """Diagonal of E stored as a 2F x P field aligned with W

    ``delta`` is the smoothing the weights were computed with; uniform
    weights for a plain least squares solve carry none.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    delta: Optional[float] = None

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v):
        arr = np.array(v, dtype=np.float64, copy=True)
        if arr.ndim != 2 or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise DataValidationError("IRLS weights must be a finite, strictly positive matrix")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_bound(self):
        if self.delta is None:
            return self
        if self.delta <= 0:
            raise DataValidationError("IRLS smoothing delta must be positive")
        if np.max(self.values) > self.delta ** -0.5 * (1 + 1e-12):
            raise DataValidationError("IRLS weights exceed delta^(-1/2)")
        return self

    @classmethod
    def uniform(cls, rows: int, cols: int) -> "IrlsWeights":
        return cls(values=np.ones((rows, cols)))


class SubproblemResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    shape: ShapeStack
    iterations: int
    converged: bool
    relative_residual: float


class SolveReport(BaseModel):
    method: Method = Method.ST_L1
    objective_trace: List[float] = []
    cg_iterations: List[int] = []
    subproblem_converged: List[bool] = []
    converged: bool = True
    final_objective: Optional[float] = None
    delta: Optional[float] = None
    warnings: List[str] = []
