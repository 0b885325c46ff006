"""First-order temporal smoothness and its closed-form regularized solve.

The system (R^T R + lam H^T H) is symmetric with half-bandwidth 3: R^T R is
block-diagonal with 3x3 blocks and H^T H couples row j with row j+3 only.
It is factorized once in LAPACK upper banded form and the factor is reused for
all P right-hand sides.
"""
import logging
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import sparse
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from ..errors import DataValidationError, RankDeficiencyError, UnsupportedOrderError
from ..schemas.model import RotationStack, ShapeStack, TrackMatrix
from .core_model import check_tracks

logger = logging.getLogger(__name__)

SUPPORTED_ORDERS = (1,)
HALF_BANDWIDTH = 3


class TemporalOperator(BaseModel):
    model_config = ConfigDict(frozen=True)

    frames: int
    order: int = 1

    @property
    def shape(self):
        return (3 * (self.frames - 1), 3 * self.frames)

    def apply(self, shape: np.ndarray) -> np.ndarray:
        """3F x P -> 3(F-1) x P; row block i is S_i - S_{i+1}"""
        return shape[:-3] - shape[3:]

    def apply_transpose(self, diff: np.ndarray) -> np.ndarray:
        out = np.zeros((diff.shape[0] + 3, diff.shape[1]))
        out[:-3] += diff
        out[3:] -= diff
        return out

    def apply_gram(self, shape: np.ndarray) -> np.ndarray:
        """H^T H S"""
        return self.apply_transpose(self.apply(shape))

    def matrix(self) -> sparse.csr_matrix:
        """Sparse H; H[j, j] = 1 and H[j, j + 3] = -1"""
        rows = 3 * (self.frames - 1)
        ones = np.ones(rows)
        return sparse.diags([ones, -ones], [0, 3], shape=self.shape, format="csr")

    def gram_bands(self) -> np.ndarray:
        """H^T H in upper banded storage with HALF_BANDWIDTH super-diagonals"""
        n = 3 * self.frames
        bands = np.zeros((HALF_BANDWIDTH + 1, n))
        if self.frames > 1:
            main = np.full(n, 2.0)
            main[:3] = 1.0
            main[-3:] = 1.0
            bands[HALF_BANDWIDTH] = main
            bands[0, 3:] = -1.0
        return bands


def build_temporal_operator(frames: int, order: int = 1) -> TemporalOperator:
    if frames < 1:
        raise DataValidationError(f"temporal operator needs at least one frame, got {frames}")
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(
            f"temporal smoothness of order {order} is not implemented; supported orders: {SUPPORTED_ORDERS}"
        )
    return TemporalOperator(frames=frames, order=order)


def rotation_gram_bands(rotations: RotationStack) -> np.ndarray:
    """Block-diagonal R^T R in upper banded storage"""
    gram = rotations.gram_blocks()
    n = 3 * rotations.frames
    bands = np.zeros((HALF_BANDWIDTH + 1, n))
    for offset in range(3):
        # entries (3f + k, 3f + k + offset) inside each block
        diag = np.zeros(n)
        for k in range(3 - offset):
            diag[k + offset::3] = gram[:, k, k + offset]
        bands[HALF_BANDWIDTH - offset] = diag
    return bands


def solve_pseudo_inverse(tracks: TrackMatrix, rotations: RotationStack) -> ShapeStack:
    check_tracks(tracks, rotations)
    frames = rotations.frames
    stacked = tracks.data.reshape(frames, 2, -1)
    shape = np.einsum("fij,fjp->fip", rotations.pinv_blocks(), stacked)
    return ShapeStack(data=shape.reshape(3 * frames, -1))


def solve_temporal(tracks: TrackMatrix, rotations: RotationStack, lam: float) -> ShapeStack:
    """S = (R^T R + lam H^T H)^{-1} R^T W via banded Cholesky"""
    check_tracks(tracks, rotations)
    if lam < 0:
        raise DataValidationError(f"temporal weight must be non-negative, got {lam}")
    if lam == 0 or rotations.frames == 1:
        # one frame has no temporal term; the depth stays unobserved
        return solve_pseudo_inverse(tracks, rotations)

    operator = build_temporal_operator(rotations.frames)
    bands = rotation_gram_bands(rotations) + lam * operator.gram_bands()
    rhs = rotations.apply_transpose(tracks.data)
    try:
        factor = cholesky_banded(bands, lower=False)
    except LinAlgError as e:
        logger.error(f"Error factorizing temporal system with lambda={lam}: {str(e)}")
        raise RankDeficiencyError(
            "temporal system is singular; use lambda > 0 and cameras whose viewing directions vary"
        )
    shape = cho_solve_banded((factor, False), rhs)
    logger.debug(f"Solved temporal system: F={rotations.frames}, P={tracks.points}, lambda={lam}")
    return ShapeStack(data=shape)


def solve_rigid(tracks: TrackMatrix, rotations: RotationStack) -> ShapeStack:
    """Best time-constant shape, the large-lambda limit of solve_temporal"""
    check_tracks(tracks, rotations)
    gram = rotations.gram_blocks().sum(axis=0)
    rhs = rotations.apply_transpose(tracks.data).reshape(rotations.frames, 3, -1).sum(axis=0)
    if np.linalg.matrix_rank(gram) < 3:
        raise RankDeficiencyError("all cameras share a viewing direction; rigid shape depth is unobservable")
    shape = np.linalg.solve(gram, rhs)
    return ShapeStack(data=np.tile(shape, (rotations.frames, 1)))


def lambda_path(tracks: TrackMatrix, rotations: RotationStack, lambdas: Sequence[float]) -> List[ShapeStack]:
    return [solve_temporal(tracks, rotations, lam) for lam in lambdas]

