from typing import List, Literal, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .model import GridTopology, RotationStack, ShapeStack, TrackMatrix


class SceneSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: int = Field(default=10, ge=1)
    cols: int = Field(default=10, ge=1)
    frames: int = Field(default=20, ge=1)
    basis_rank: int = Field(default=2, ge=1)
    # RMS out-of-plane deformation per mode, as a fraction of the grid half extent
    amplitude: float = Field(default=0.04, ge=0)
    spacing: float = Field(default=1.0, gt=0)
    mask: Literal["full", "ellipse"] = "full"
    # rotation path: angle_start + i * angle_step radians about axis
    axis: Tuple[float, float, float] = (0.2, 1.0, 0.1)
    angle_start: float = 0.3
    angle_step: float = 0.05
    seed: int = 1

    @field_validator("axis")
    @classmethod
    def validate_axis(cls, v):
        if sum(c * c for c in v) == 0:
            raise ValueError("Rotation axis must be non-zero")
        return v


class Scene(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: SceneSpec
    tracks: TrackMatrix
    rotations: RotationStack
    shape: ShapeStack
    topology: GridTopology


class ContaminationGrid(BaseModel):
    """Noise ratios r (sigma = r max|W|) and outlier ratios in [0, 1]"""

    noise: List[float] = []
    outliers: List[float] = []

    @field_validator("noise")
    @classmethod
    def validate_noise(cls, v):
        if any(r < 0 for r in v):
            raise ValueError("Noise ratios must be non-negative")
        return v

    @field_validator("outliers")
    @classmethod
    def validate_outliers(cls, v):
        if any(r < 0 or r > 1 for r in v):
            raise ValueError("Outlier ratios must lie in [0, 1]")
        return v

    @property
    def is_empty(self) -> bool:
        return not self.noise and not self.outliers
