"""Camera supply: ingestion of given rotations or rigid factorization fallback.

The fallback is Tomasi-Kanade factorization: a rank-3 split of the centered
tracks followed by a metric upgrade that solves for the symmetric 3x3 Gram
matrix Q = G G^T from the per-frame constraints
x_f^T Q x_f = 1, y_f^T Q y_f = 1, x_f^T Q y_f = 0.
"""
import logging
from typing import Sequence

import numpy as np

from ..errors import (
    DataValidationError,
    DegenerateMotionError,
    DegenerateRotationError,
    EstimationFailureError,
)
from ..schemas.model import RotationSource, RotationStack, TrackMatrix
from .core_model import center_tracks

logger = logging.getLogger(__name__)

DEGENERATE_SINGULAR_VALUE = 1e-6
RANK_TOL = 1e-8


def _project_blocks(blocks: np.ndarray):
    """Nearest row-orthonormal blocks (singular values snapped to 1)"""
    u, s, vt = np.linalg.svd(blocks, full_matrices=False)
    degenerate = np.flatnonzero(s[:, 1] < DEGENERATE_SINGULAR_VALUE)
    if degenerate.size:
        frame = int(degenerate[0])
        raise DegenerateRotationError(
            f"rotation block of frame {frame} is rank deficient (singular values {s[frame]})", frame=frame
        )
    residuals = np.abs(s - 1.0).max(axis=1)
    return u @ vt, residuals


def validate_rotations(blocks: Sequence[np.ndarray]) -> RotationSource:
    arr = np.asarray(blocks, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1:] != (2, 3):
        raise DataValidationError(f"expected F rotation blocks of shape 2x3, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataValidationError("rotation blocks contain non-finite entries")
    projected, residuals = _project_blocks(arr)
    if residuals.max() > 0:
        logger.info(f"Projected {arr.shape[0]} rotation blocks, max residual {residuals.max():.3e}")
    return RotationSource(mode="provided", rotations=RotationStack(blocks=projected), residuals=residuals.tolist())


def _symmetric_row(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients of a^T Q b in (q11, q12, q13, q22, q23, q33)"""
    return np.array([
        a[0] * b[0],
        a[0] * b[1] + a[1] * b[0],
        a[0] * b[2] + a[2] * b[0],
        a[1] * b[1],
        a[1] * b[2] + a[2] * b[1],
        a[2] * b[2],
    ])


def _from_symmetric(q: np.ndarray) -> np.ndarray:
    return np.array([
        [q[0], q[1], q[2]],
        [q[1], q[3], q[4]],
        [q[2], q[4], q[5]],
    ])


def estimate_rigid_rotations(tracks: TrackMatrix) -> RotationSource:
    frames, points = tracks.frames, tracks.points
    if frames < 3 or points < 4:
        raise DataValidationError(f"rigid factorization needs F >= 3 and P >= 4, got F={frames}, P={points}")

    centered = center_tracks(tracks).data
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size < 3 or s[2] <= RANK_TOL * s[0]:
        raise DegenerateMotionError(f"track matrix has effective rank below 3 (singular values {s[:3]})")

    sqrt_s = np.sqrt(s[:3])
    motion = u[:, :3] * sqrt_s
    structure = sqrt_s[:, np.newaxis] * vt[:3]

    system = np.zeros((3 * frames, 6))
    target = np.zeros(3 * frames)
    for f in range(frames):
        x_f, y_f = motion[2 * f], motion[2 * f + 1]
        system[3 * f] = _symmetric_row(x_f, x_f)
        system[3 * f + 1] = _symmetric_row(y_f, y_f)
        system[3 * f + 2] = _symmetric_row(x_f, y_f)
        target[3 * f:3 * f + 2] = 1.0
    q, *_ = np.linalg.lstsq(system, target, rcond=None)
    gram = _from_symmetric(q)
    if np.linalg.eigvalsh(gram).min() <= 0:
        raise EstimationFailureError(
            "metric upgrade produced a Gram matrix that is not positive definite; provide rotations instead"
        )

    corrective = np.linalg.cholesky(gram)
    blocks, residuals = _project_blocks((motion @ corrective).reshape(frames, 2, 3))

    # fix the global rotation: first camera becomes [I2 | 0]
    first = np.vstack([blocks[0], np.cross(blocks[0, 0], blocks[0, 1])])
    blocks = blocks @ first.T
    rotations = RotationStack(blocks=blocks)

    shape = first @ np.linalg.solve(corrective, structure)
    reprojection = np.linalg.norm(centered - rotations.apply(np.tile(shape, (frames, 1))))
    relative = float(reprojection / np.linalg.norm(centered))
    logger.info(f"Estimated {frames} rigid cameras, relative reprojection residual {relative:.3e}")
    return RotationSource(
        mode="estimated",
        rotations=rotations,
        residuals=residuals.tolist(),
        reprojection_residual=relative,
    )
