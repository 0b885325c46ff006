from typing import List, Literal, Optional

from pydantic import BaseModel

from .solver import Method, SolveReport


class GridPayload(BaseModel):
    rows: int
    cols: int
    mask: Optional[List[List[bool]]] = None


class SolverOverrides(BaseModel):
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    delta: Optional[float] = None
    irls_max_iters: Optional[int] = None
    cg_max_iters: Optional[int] = None
    cg_tol: Optional[float] = None
    objective_tol: Optional[float] = None
    inner_solver: Optional[Literal["cg", "gradient_descent"]] = None


class ReconstructRequest(BaseModel):
    tracks: List[List[float]]
    rotations: Optional[List[List[List[float]]]] = None
    estimate_rotations: bool = False
    grid: Optional[GridPayload] = None
    method: Method = Method.ST_L1
    solver: SolverOverrides = SolverOverrides()

    class Config:
        json_schema_extra = {
            "example": {
                "tracks": [[0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 1.0]],
                "rotations": [[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]],
                "grid": {"rows": 2, "cols": 2},
                "method": "st-l1",
                "solver": {"lambda1": 0.001, "lambda2": 1.0},
            }
        }


class ReconstructResponse(BaseModel):
    shape: List[List[float]]
    report: SolveReport
    rotation_mode: str


class EvaluateRequest(BaseModel):
    estimate: List[List[float]]
    ground_truth: List[List[float]]
