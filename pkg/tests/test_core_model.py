from __future__ import annotations

import numpy as np
import pytest

from nrsfm.errors import ShapeMismatchError
from nrsfm.schemas.model import ShapeStack, TrackMatrix
from nrsfm.services.core_model import (
    assemble_rotation,
    center_tracks,
    check_dimensions,
    reproject,
    restore_translation,
)

from conftest import dense_rotation, random_rotations, random_shape


class TestCenterTracks:

    def test_rows_have_zero_mean_and_offsets_record_means(self):
        data = np.random.default_rng(0).normal(loc=3.0, size=(6, 7))
        centered = center_tracks(TrackMatrix(data=data))
        np.testing.assert_allclose(centered.data.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(centered.row_offsets, data.mean(axis=1))

    def test_offsets_accumulate(self):
        data = np.random.default_rng(1).normal(size=(4, 5))
        once = center_tracks(TrackMatrix(data=data))
        twice = center_tracks(once)
        np.testing.assert_allclose(twice.data, once.data)
        np.testing.assert_allclose(twice.row_offsets, once.row_offsets)


class TestReproject:

    def test_matches_dense_block_diagonal_product(self):
        rotations = random_rotations(4, seed=5)
        shape = random_shape(4, 6, seed=5)
        tracks = reproject(rotations, shape)
        np.testing.assert_allclose(tracks.data, dense_rotation(rotations) @ shape.data)

    def test_is_linear_in_the_shape(self):
        rotations = random_rotations(3, seed=7)
        a, b = random_shape(3, 5, seed=7), random_shape(3, 5, seed=8)
        combined = ShapeStack(data=2.0 * a.data - 0.5 * b.data)
        np.testing.assert_allclose(
            reproject(rotations, combined).data,
            2.0 * reproject(rotations, a).data - 0.5 * reproject(rotations, b).data,
            atol=1e-12,
        )

    def test_frame_count_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            check_dimensions(random_rotations(3), random_shape(4, 2))

    def test_assemble_rotation_from_blocks(self):
        blocks = list(random_rotations(3, seed=6).blocks)
        assert assemble_rotation(blocks).frames == 3


class TestRestoreTranslation:

    def test_restored_shape_reprojects_onto_raw_tracks(self):
        rotations = random_rotations(3, seed=7)
        shape = random_shape(3, 5, seed=7)
        translation = np.array([0.5, -1.0, 2.0])
        moved = ShapeStack(data=shape.data + np.tile(translation, 3)[:, np.newaxis])
        raw = reproject(rotations, moved)
        centered = center_tracks(raw)

        centered_shape = ShapeStack(data=shape.data - shape.as_frames().mean(axis=2).reshape(-1, 1))
        restored = restore_translation(centered_shape, rotations, centered.row_offsets)
        np.testing.assert_allclose(reproject(rotations, restored).data, raw.data, atol=1e-12)

    def test_offset_length_checked(self):
        with pytest.raises(ShapeMismatchError):
            restore_translation(random_shape(2, 3), random_rotations(2), np.zeros(3))
