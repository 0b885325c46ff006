"""8-neighbor Laplacian spatial smoothness on a pixel grid.

A neighbor pair (p + o, p - o) enters the stencil of p only when both cells are
present; the center weight is minus the number of kept neighbors. Interior
points get the full kernel (center -8, eight +1). Edge points keep the
second difference along the edge, and corners and isolated points get an
empty row. Every row annihilates affine fields, so a tilted plane costs
nothing anywhere on the grid, and on full grids a*row*col is free too.

One P x P matrix L is shared by all 3F coordinate rows; the 3FP x 3FP
operator is never built.
"""
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import sparse

from ..errors import ShapeMismatchError
from ..schemas.model import GridTopology, ShapeStack

logger = logging.getLogger(__name__)


class SpatialOperator(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    topology: GridTopology
    laplacian: sparse.csr_matrix

    @property
    def points(self) -> int:
        return self.laplacian.shape[1]

    def _check(self, data: np.ndarray) -> None:
        if data.shape[1] != self.points:
            raise ShapeMismatchError(f"shape has {data.shape[1]} points but the grid has {self.points}")

    def apply(self, data: np.ndarray) -> np.ndarray:
        """Row-wise filtering S L^T"""
        self._check(data)
        return (self.laplacian @ data.T).T

    def apply_transpose(self, data: np.ndarray) -> np.ndarray:
        self._check(data)
        return (self.laplacian.T @ data.T).T

    def apply_gram(self, data: np.ndarray) -> np.ndarray:
        """ivec(A^T A vec(S)) as two sparse products"""
        return self.apply_transpose(self.apply(data))


def build_laplacian(topology: GridTopology) -> SpatialOperator:
    points = topology.num_points
    centers, others = topology.neighbor_pairs(symmetric=True)
    degree = np.bincount(centers, minlength=points).astype(np.float64)
    rows = np.concatenate([centers, np.arange(points)])
    cols = np.concatenate([others, np.arange(points)])
    values = np.concatenate([np.ones(centers.size), -degree])
    laplacian = sparse.csr_matrix((values, (rows, cols)), shape=(points, points))
    logger.debug(f"Built {topology.rows}x{topology.cols} Laplacian with {laplacian.nnz} non-zeros")
    return SpatialOperator(topology=topology, laplacian=laplacian)


def apply_spatial(op: SpatialOperator, shape: ShapeStack) -> ShapeStack:
    return ShapeStack(data=op.apply(shape.data))
