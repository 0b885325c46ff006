from functools import cached_property
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..errors import DataValidationError, RotationValidityError, ShapeMismatchError

ORTHONORMALITY_TOL = 1e-8

# 8-connected surround, (d_row, d_col)
NEIGHBOR_OFFSETS: Tuple[Tuple[int, int], ...] = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)


def _frozen_array(value, name: str, ndim: int) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64, copy=True)
    except (TypeError, ValueError) as e:
        raise DataValidationError(f"{name} is not a numeric array: {str(e)}")
    if arr.ndim != ndim:
        raise DataValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataValidationError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


class TrackMatrix(BaseModel):
    """2F x P feature tracks; rows 2i and 2i+1 hold u and v of frame i"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    offsets: Optional[np.ndarray] = None

    @field_validator("data", mode="before")
    @classmethod
    def validate_data(cls, v):
        arr = _frozen_array(v, "track matrix", 2)
        if arr.shape[0] < 2 or arr.shape[0] % 2 != 0 or arr.shape[1] < 1:
            raise DataValidationError(f"track matrix must be 2F x P with F, P >= 1, got {arr.shape}")
        return arr

    @field_validator("offsets", mode="before")
    @classmethod
    def validate_offsets(cls, v):
        if v is None:
            return None
        return _frozen_array(v, "track offsets", 1)

    @model_validator(mode="after")
    def check_offsets_length(self):
        if self.offsets is not None and self.offsets.shape[0] != self.data.shape[0]:
            raise ShapeMismatchError(
                f"expected {self.data.shape[0]} row offsets, got {self.offsets.shape[0]}"
            )
        return self

    @property
    def frames(self) -> int:
        return self.data.shape[0] // 2

    @property
    def points(self) -> int:
        return self.data.shape[1]

    @property
    def row_offsets(self) -> np.ndarray:
        if self.offsets is None:
            return np.zeros(self.data.shape[0])
        return self.offsets

    def frame(self, i: int) -> np.ndarray:
        return self.data[2 * i:2 * i + 2]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data)))


class RotationStack(BaseModel):
    """F orthographic cameras; the block-diagonal 2F x 3F matrix is never formed"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    blocks: np.ndarray

    @field_validator("blocks", mode="before")
    @classmethod
    def validate_blocks(cls, v):
        arr = _frozen_array(v, "rotation blocks", 3)
        if arr.shape[0] < 1 or arr.shape[1:] != (2, 3):
            raise DataValidationError(f"rotation blocks must have shape (F, 2, 3), got {arr.shape}")
        gram = np.einsum("fij,fkj->fik", arr, arr)
        deviation = np.abs(gram - np.eye(2)).reshape(arr.shape[0], -1).max(axis=1)
        bad = np.flatnonzero(deviation > ORTHONORMALITY_TOL)
        if bad.size:
            frame = int(bad[0])
            raise RotationValidityError(
                f"rotation block of frame {frame} is not row-orthonormal "
                f"(max |R R^T - I| = {deviation[frame]:.3e})",
                frame=frame,
            )
        return arr

    @property
    def frames(self) -> int:
        return self.blocks.shape[0]

    def apply(self, shape: np.ndarray) -> np.ndarray:
        """3F x P shape data -> 2F x P, per-frame R_i S_i"""
        frames = self.frames
        stacked = shape.reshape(frames, 3, -1)
        return np.einsum("fij,fjp->fip", self.blocks, stacked).reshape(2 * frames, -1)

    def apply_transpose(self, tracks: np.ndarray) -> np.ndarray:
        """2F x P -> 3F x P, per-frame R_i^T W_i"""
        frames = self.frames
        stacked = tracks.reshape(frames, 2, -1)
        return np.einsum("fji,fjp->fip", self.blocks, stacked).reshape(3 * frames, -1)

    def gram_blocks(self) -> np.ndarray:
        """(F, 3, 3) stack of R_i^T R_i"""
        return np.einsum("fji,fjk->fik", self.blocks, self.blocks)

    def pinv_blocks(self) -> np.ndarray:
        """(F, 3, 2) stack of R_i^+"""
        return np.linalg.pinv(self.blocks)

    def viewing_directions(self) -> np.ndarray:
        """(F, 3) unit vectors spanning the null space of each R_i"""
        return np.cross(self.blocks[:, 0], self.blocks[:, 1])


class ShapeStack(BaseModel):
    """3F x P shape sequence; rows 3i..3i+2 hold x, y, z of frame i"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def validate_data(cls, v):
        arr = _frozen_array(v, "shape stack", 2)
        if arr.shape[0] < 3 or arr.shape[0] % 3 != 0 or arr.shape[1] < 1:
            raise DataValidationError(f"shape stack must be 3F x P with F, P >= 1, got {arr.shape}")
        return arr

    @property
    def frames(self) -> int:
        return self.data.shape[0] // 3

    @property
    def points(self) -> int:
        return self.data.shape[1]

    def frame(self, i: int) -> np.ndarray:
        return self.data[3 * i:3 * i + 3]

    def as_frames(self) -> np.ndarray:
        return self.data.reshape(self.frames, 3, self.points)

    def vec(self) -> np.ndarray:
        """Column-stacking vec(S)"""
        return self.data.reshape(-1, order="F")

    @classmethod
    def from_vec(cls, v: np.ndarray, frames: int, points: int) -> "ShapeStack":
        """ivec: inverse of vec for a 3F x P stack"""
        v = np.asarray(v)
        if v.size != 3 * frames * points:
            raise ShapeMismatchError(f"cannot reshape vector of size {v.size} to {3 * frames} x {points}")
        return cls(data=v.reshape(3 * frames, points, order="F"))

    @classmethod
    def zeros(cls, frames: int, points: int) -> "ShapeStack":
        return cls(data=np.zeros((3 * frames, points)))


class GridTopology(BaseModel):
    """Pixel grid with optional absent cells; present cells are numbered row-major"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    rows: int
    cols: int
    mask: Optional[np.ndarray] = None

    @field_validator("mask", mode="before")
    @classmethod
    def validate_mask(cls, v):
        if v is None:
            return None
        arr = np.array(v, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise DataValidationError(f"grid mask must be 2-dimensional, got shape {arr.shape}")
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def check_dims(self):
        if self.rows < 1 or self.cols < 1:
            raise DataValidationError(f"grid must have at least one row and column, got {self.rows}x{self.cols}")
        if self.mask is not None:
            if self.mask.shape != (self.rows, self.cols):
                raise ShapeMismatchError(
                    f"grid mask shape {self.mask.shape} does not match grid {self.rows}x{self.cols}"
                )
            if not self.mask.any():
                raise DataValidationError("grid mask has no present cells")
        return self

    @classmethod
    def full(cls, rows: int, cols: int) -> "GridTopology":
        return cls(rows=rows, cols=cols)

    @cached_property
    def present(self) -> np.ndarray:
        if self.mask is None:
            return np.ones((self.rows, self.cols), dtype=bool)
        return self.mask

    @cached_property
    def point_index(self) -> np.ndarray:
        """rows x cols array of column indices, -1 for absent cells"""
        index = np.full((self.rows, self.cols), -1, dtype=np.int64)
        index[self.present] = np.arange(int(self.present.sum()))
        index.setflags(write=False)
        return index

    @cached_property
    def cells(self) -> np.ndarray:
        """(P, 2) grid coordinates (row, col) of each point"""
        return np.argwhere(self.present)

    @property
    def num_points(self) -> int:
        return int(self.present.sum())

    def index_of(self, row: int, col: int) -> Optional[int]:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            return None
        idx = int(self.point_index[row, col])
        return idx if idx >= 0 else None

    def neighbors(self, point: int) -> List[int]:
        row, col = self.cells[point]
        found = []
        for d_row, d_col in NEIGHBOR_OFFSETS:
            idx = self.index_of(row + d_row, col + d_col)
            if idx is not None:
                found.append(idx)
        return found

    def neighbor_pairs(self, symmetric: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """Directed (point, neighbor) index pairs over all present cells

        With ``symmetric`` a neighbor at offset (dr, dc) is kept only when the
        opposite cell at (-dr, -dc) is present as well.
        """
        padded = np.full((self.rows + 2, self.cols + 2), -1, dtype=np.int64)
        padded[1:-1, 1:-1] = self.point_index
        centers, others = [], []
        for d_row, d_col in NEIGHBOR_OFFSETS:
            shifted = padded[1 + d_row:self.rows + 1 + d_row, 1 + d_col:self.cols + 1 + d_col]
            both = (self.point_index >= 0) & (shifted >= 0)
            if symmetric:
                mirrored = padded[1 - d_row:self.rows + 1 - d_row, 1 - d_col:self.cols + 1 - d_col]
                both &= mirrored >= 0
            centers.append(self.point_index[both])
            others.append(shifted[both])
        return np.concatenate(centers), np.concatenate(others)

    def quads(self) -> np.ndarray:
        """(Q, 4) corner indices (r,c), (r,c+1), (r+1,c+1), (r+1,c) of complete quads"""
        idx = self.point_index
        corners = np.stack([idx[:-1, :-1], idx[:-1, 1:], idx[1:, 1:], idx[1:, :-1]], axis=-1)
        return corners[(corners >= 0).all(axis=-1)]


class RotationSource(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mode: Literal["provided", "estimated"]
    rotations: RotationStack
    residuals: List[float]
    reprojection_residual: Optional[float] = None
    # reserved for a low-rank rotation estimator; unused by rigid factorization
    model_complexity: Optional[int] = None
