"""Test the :mod:`psy_enrich.patch_pipeline` module."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import unittest
from fractions import Fraction

import _base_testing as bt
import numpy as np
from scipy.ndimage import gaussian_filter

import psy_enrich.patch_pipeline as pp
from psy_enrich.errors import (
    ConfigurationError,
    ContractViolation,
    DegenerateAnnotationError,
)


def vertical_edge(size=128):
    """An image that is dark left of ``x = size / 2`` and bright right"""
    pixels = np.zeros((size, size))
    pixels[:, size // 2 :] = 1.0
    return pp.FaceImage(pixels, float(size), size)


class TestPatchSpec(unittest.TestCase):
    """Test the :class:`psy_enrich.patch_pipeline.PatchSpec`"""

    def test_defaults(self):
        spec = pp.PatchSpec()
        self.assertEqual(spec.ratio, Fraction(1, 16))
        self.assertEqual(spec.offset_bound, 8)

    def test_invalid(self):
        for size in [6, 15]:
            with self.assertRaises(ConfigurationError):
                pp.PatchSpec(size)
        with self.assertRaises(ConfigurationError):
            pp.PatchSpec(64, 32)


class TestFaceImage(unittest.TestCase):
    """Test the :class:`psy_enrich.patch_pipeline.FaceImage`"""

    def test_from_landmarks(self):
        image = pp.FaceImage.from_landmarks(
            np.zeros((50, 60)), [[10, 10], [40, 30]], 128
        )
        self.assertEqual(image.face_size, 30)
        self.assertEqual((image.height, image.width), (50, 60))
        self.assertAlmostEqual(image.scale, 30 / 128)

    def test_invalid(self):
        with self.assertRaises(ContractViolation):
            pp.FaceImage(np.full((4, 4), 1.5), 10)
        with self.assertRaises(ContractViolation):
            pp.FaceImage(np.zeros((4, 4, 3)), 10)
        with self.assertRaises(DegenerateAnnotationError):
            pp.FaceImage(np.zeros((4, 4)), 0)
        with self.assertRaises(DegenerateAnnotationError):
            pp.FaceImage.from_landmarks(np.zeros((4, 4)), [[1, 1], [1, 1]])


class TestOffsets(bt.EnrichTestCase):
    """Test the random offsets"""

    def test_bounds(self):
        spec = pp.PatchSpec(64, 1024)
        rng = np.random.default_rng(0)
        offsets = pp.generate_offsets(rng, spec, 100000)
        self.assertTrue((np.abs(offsets) < 8).all())
        self.assertAlmostEqual(np.abs(offsets).mean(), 4.0, delta=0.05)

    def test_single(self):
        spec = pp.PatchSpec(16, 128)
        rng = np.random.default_rng(1)
        offsets = [pp.generate_offset(rng, spec) for _ in range(1000)]
        self.assertTrue((np.abs(offsets) < 2).all())

    def test_distort(self):
        sample = pp.distort([10.0, 10.0], np.pi / 2, 2.0, 0.5)
        self.assertEqual(sample.offset, 2.0)
        self.assertAlmostArrayEqual(sample.center, [10.0, 11.0])


class TestExtraction(bt.EnrichTestCase):
    """Test the patch extraction"""

    def test_along_normal(self):
        image = vertical_edge()
        spec = bt.small_patch_spec
        patch = pp.extract_normalized_patch(image, [63.5, 64.0], 0.0, spec)
        self.assertEqual(patch.pixels.shape, (16, 16))
        self.assertAlmostArrayEqual(patch.pixels[:, :8], 0)
        self.assertAlmostArrayEqual(patch.pixels[:, 8:], 1)

    def test_rotated(self):
        image = vertical_edge()
        spec = bt.small_patch_spec
        patch = pp.extract_normalized_patch(image, [63.5, 64.0], np.pi, spec)
        self.assertAlmostArrayEqual(patch.pixels[:, :8], 1)
        self.assertAlmostArrayEqual(patch.pixels[:, 8:], 0)
        # the edge runs along the columns if the normal points down
        patch = pp.extract_normalized_patch(
            image, [63.5, 64.0], np.pi / 2, spec
        )
        self.assertAlmostArrayEqual(patch.pixels[:8], 1, atol=1e-9)
        self.assertAlmostArrayEqual(patch.pixels[8:], 0, atol=1e-9)

    def test_unnormalized(self):
        image = vertical_edge()
        spec = bt.small_patch_spec
        patch = pp.extract_normalized_patch(
            image, [63.5, 64.0], np.pi, spec, normalize=False, t=3.4
        )
        self.assertAlmostArrayEqual(patch.pixels[:, :8], 0)
        self.assertEqual(patch.t, 3.4)
        self.assertEqual(patch.normal_angle, np.pi)

    def test_border(self):
        image = vertical_edge()
        patch = pp.extract_normalized_patch(
            image, [126.0, 2.0], 0.0, bt.small_patch_spec
        )
        self.assertAlmostArrayEqual(patch.pixels, 1)

    def test_scale(self):
        pixels = np.zeros((128, 128))
        pixels[:, 64:] = 1.0
        # the face spans 64 image pixels but 128 aligned pixels
        image = pp.FaceImage(pixels, 64.0, 128)
        patch = pp.extract_normalized_patch(
            image, [59.75, 64.0], 0.0, bt.small_patch_spec
        )
        # columns sample x = 56, 56.5, ..., 63.5
        self.assertAlmostArrayEqual(patch.pixels[:, :15], 0)
        self.assertAlmostArrayEqual(patch.pixels[:, 15], 0.5)

    def test_contract(self):
        image = vertical_edge()
        spec = bt.small_patch_spec
        with self.assertRaises(ContractViolation):
            pp.extract_patches(image, [[1, 2], [3, 4]], [0.0], spec)
        with self.assertRaises(ContractViolation):
            pp.extract_patches(image, [[1, 2]], [np.nan], spec)
        with self.assertRaises(ContractViolation):
            pp.extract_patches(image, [[1, 2]], [0.0], pp.PatchSpec(16, 256))

    def test_transpose(self):
        patch = pp.extract_normalized_patch(
            vertical_edge(), [63.5, 64.0], 0.0, bt.small_patch_spec
        )
        transposed = patch.transpose()
        self.assertAlmostArrayEqual(transposed.pixels, patch.pixels.T)
        self.assertAlmostArrayEqual(transposed.pixels[:8], 0)


class TestAugment(bt.EnrichTestCase):
    """Test the augmentations"""

    def setUp(self):
        super().setUp()
        self.pixels = np.linspace(0, 1, 256).reshape((16, 16))

    def test_deterministic(self):
        config = pp.AugmentConfig()
        first = pp.augment_pixels(
            self.pixels, np.random.default_rng(42), config
        )
        second = pp.augment_pixels(
            self.pixels, np.random.default_rng(42), config
        )
        self.assertTrue(np.array_equal(first, second))
        self.assertTrue(((first >= 0) & (first <= 1)).all())

    def test_disabled(self):
        ret = pp.augment_pixels(
            self.pixels, np.random.default_rng(0), pp.AugmentConfig.disabled()
        )
        self.assertTrue(np.array_equal(ret, self.pixels))

    def test_gray(self):
        config = pp.AugmentConfig(
            gray_prob=1,
            gray_scale=(2, 2),
            gray_shift=(0, 0),
            blur_prob=0,
            occlusion_prob=0,
        )
        ret = pp.augment_pixels(
            np.full((4, 4), 0.3), np.random.default_rng(0), config
        )
        self.assertAlmostArrayEqual(ret, 0.6)
        # clipped to [0, 1]
        ret = pp.augment_pixels(self.pixels, np.random.default_rng(0), config)
        self.assertEqual(ret.max(), 1.0)

    def test_blur_border(self):
        config = pp.AugmentConfig(
            gray_prob=0, blur_prob=1, blur_sigma=(1.5, 1.5), occlusion_prob=0
        )
        ret = pp.augment_pixels(self.pixels, np.random.default_rng(0), config)
        # the border pixels are replicated
        self.assertAlmostArrayEqual(
            ret, gaussian_filter(self.pixels, 1.5, mode="nearest")
        )
        self.assertFalse(
            np.allclose(ret, gaussian_filter(self.pixels, 1.5, mode="reflect"))
        )
        # a constant patch keeps its value up to the border
        ret = pp.augment_pixels(
            np.full((8, 8), 0.4), np.random.default_rng(0), config
        )
        self.assertAlmostArrayEqual(ret, 0.4)

    def test_occlusion(self):
        config = pp.AugmentConfig(
            gray_prob=0,
            blur_prob=0,
            occlusion_prob=1,
            occlusion_fraction=(0.25, 0.25),
            occlusion_fill=0.0,
        )
        ret = pp.augment_pixels(
            np.ones((16, 16)), np.random.default_rng(3), config
        )
        self.assertEqual((ret == 0).sum(), 64)

    def test_invalid_config(self):
        with self.assertRaises(ConfigurationError):
            pp.AugmentConfig(gray_prob=1.5)
        with self.assertRaises(ConfigurationError):
            pp.AugmentConfig(blur_sigma=(2, 1))
        with self.assertRaises(ConfigurationError):
            pp.AugmentConfig(occlusion_fraction=(0.5, 1.5))


class TestTrainingPatch(bt.EnrichTestCase):
    """Test :func:`psy_enrich.patch_pipeline.make_training_patch`"""

    def test_offset_applied(self):
        image = vertical_edge()
        spec = bt.small_patch_spec
        rng = np.random.default_rng(5)
        patch, sample = pp.make_training_patch(
            image, [63.5, 64.0], 0.0, 12.2, spec, rng
        )
        self.assertTrue(abs(sample.offset) < spec.offset_bound)
        self.assertAlmostArrayEqual(
            sample.center, [63.5 + sample.offset, 64.0]
        )
        self.assertAlmostArrayEqual(patch.center, sample.center)
        self.assertEqual(patch.t, 12.2)
        expected = pp.extract_normalized_patch(
            image, sample.center, 0.0, spec
        )
        self.assertAlmostArrayEqual(patch.pixels, expected.pixels)

    def test_reproducible(self):
        image = vertical_edge()
        spec = bt.small_patch_spec
        results = [
            pp.make_training_patch(
                image,
                [63.5, 64.0],
                0.3,
                0.0,
                spec,
                np.random.default_rng(7),
                pp.AugmentConfig(),
            )
            for _ in range(2)
        ]
        self.assertEqual(results[0][1].offset, results[1][1].offset)
        self.assertTrue(
            np.array_equal(results[0][0].pixels, results[1][0].pixels)
        )


if __name__ == "__main__":
    unittest.main()
