"""Measurement model W = R S with block-diagonal orthographic cameras."""
import logging
from typing import Sequence

import numpy as np

from ..errors import ShapeMismatchError
from ..schemas.model import RotationStack, ShapeStack, TrackMatrix

logger = logging.getLogger(__name__)


def center_tracks(tracks: TrackMatrix) -> TrackMatrix:
    """Remove the per-row mean over points; offsets accumulate across calls"""
    means = tracks.data.mean(axis=1)
    return TrackMatrix(
        data=tracks.data - means[:, np.newaxis],
        offsets=tracks.row_offsets + means,
    )


def assemble_rotation(blocks: Sequence[np.ndarray]) -> RotationStack:
    return RotationStack(blocks=np.stack([np.asarray(b, dtype=np.float64) for b in blocks]))


def check_dimensions(rotations: RotationStack, shape: ShapeStack) -> None:
    if rotations.frames != shape.frames:
        raise ShapeMismatchError(
            f"rotation stack has {rotations.frames} frames but shape stack has {shape.frames}"
        )


def check_tracks(tracks: TrackMatrix, rotations: RotationStack) -> None:
    if tracks.frames != rotations.frames:
        raise ShapeMismatchError(
            f"track matrix has {tracks.frames} frames but rotation stack has {rotations.frames}"
        )


def reproject(rotations: RotationStack, shape: ShapeStack) -> TrackMatrix:
    check_dimensions(rotations, shape)
    return TrackMatrix(data=rotations.apply(shape.data))


def restore_translation(shape: ShapeStack, rotations: RotationStack, offsets: np.ndarray) -> ShapeStack:
    """Shift each frame by t_i = R_i^+ o_i so it reprojects onto the uncentered tracks"""
    check_dimensions(rotations, shape)
    offsets = np.asarray(offsets, dtype=np.float64)
    if offsets.shape != (2 * shape.frames,):
        raise ShapeMismatchError(f"expected {2 * shape.frames} offsets, got shape {offsets.shape}")
    translations = np.einsum("fij,fj->fi", rotations.pinv_blocks(), offsets.reshape(-1, 2))
    return ShapeStack(data=shape.data + translations.reshape(-1, 1))
