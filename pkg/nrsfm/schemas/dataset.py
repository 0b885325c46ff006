from typing import Optional

from pydantic import BaseModel, field_validator

from .scene import SceneSpec

DATASET_VERSION = "nrsfm-dataset/1"


class Contamination(BaseModel):
    noise_ratio: float = 0.0
    outlier_ratio: float = 0.0
    seed: int = 1


class DatasetManifest(BaseModel):
    version: str = DATASET_VERSION
    frames: int
    points: int
    grid_rows: int
    grid_cols: int
    tracks: str = "tracks.bin"
    topology: str = "topology.bin"
    shape_gt: Optional[str] = None
    rotations: Optional[str] = None
    outlier_mask: Optional[str] = None
    contamination: Optional[Contamination] = None
    scene: Optional[SceneSpec] = None

    @field_validator("version")
    @classmethod
    def validate_version(cls, v):
        if v != DATASET_VERSION:
            raise ValueError(f"Unrecognized dataset version '{v}', expected '{DATASET_VERSION}'")
        return v
