"""Test the :mod:`psy_enrich.quality` module."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import unittest

import _base_testing as bt
import numpy as np

import psy_enrich.quality as q
from psy_enrich.data_io import load_scheme
from psy_enrich.enrichment import initialize_enriched
from psy_enrich.errors import ConfigurationError, ContractViolation
from psy_enrich.patch_pipeline import (
    Patch,
    extract_patches,
    generate_offsets,
)


def edge_patch(contrast, noise, size=16):
    """A patch with a vertical edge of the given contrast"""
    pixels = np.full((size, size), 0.25)
    pixels[:, size // 2 :] += 0.5 * contrast
    return pixels + noise


class TestScores(bt.EnrichTestCase):
    """Test the variance ratio and the raw score"""

    def setUp(self):
        super().setUp()
        self.noise = np.random.default_rng(0).normal(0, 0.02, (16, 16))

    def test_raw_score(self):
        self.assertEqual(q.raw_score(1.0), 0.0)
        self.assertEqual(q.raw_score(3.0), 2.0)
        self.assertEqual(q.raw_score(0.5), -1.0)
        self.assertAlmostArrayEqual(q.raw_score([0.25, 4.0]), [-3.0, 3.0])
        for val in [0.0, -1.0]:
            with self.assertRaises(ContractViolation):
                q.raw_score(val)

    def test_transpose_antisymmetric(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            pixels = rng.random((16, 16))
            S = q.raw_score(q.variance_ratio(pixels, 0))
            S_T = q.raw_score(q.variance_ratio(pixels.T, 0))
            self.assertAlmostEqual(S, -S_T, places=10)
            patch = Patch(pixels, 0.0, 0.0, np.zeros(2))
            V = q.variance_ratio(patch, 0)
            V_T = q.variance_ratio(patch.transpose(), 0)
            self.assertAlmostEqual(V * V_T, 1)

    def test_ordering(self):
        sharp = edge_patch(1.0, self.noise)
        weak = edge_patch(0.2, self.noise)
        horizontal = sharp.T
        scores = q.raw_scores(np.stack([sharp, weak, horizontal]))
        self.assertEqual(scores.shape, (3,))
        self.assertGreater(scores[0], scores[1])
        self.assertGreater(scores[1], 0)
        self.assertLess(scores[2], 0)

    def test_flat_patch(self):
        self.assertEqual(q.variance_ratio(np.full((8, 8), 0.5)), 1.0)

    def test_empty(self):
        with self.assertRaises(ContractViolation):
            q.variance_ratio(np.zeros((0, 0)))
        with self.assertRaises(ContractViolation):
            q.variance_ratio(np.zeros(8))


class TestQualityModel(bt.EnrichTestCase):
    """Test the :class:`psy_enrich.quality.QualityModel`"""

    def test_normalize(self):
        model = q.fit_quality_model([4.0, 2.0, 3.0, 1.0])
        self.assertEqual(model.epsilon, 1e-6)
        self.assertEqual(len(model), 4)
        self.assertEqual(q.normalize_score(model, 0.0), 0.0)
        self.assertEqual(q.normalize_score(model, 2.0), 0.25)
        self.assertEqual(q.normalize_score(model, 2.5), 0.5)
        self.assertEqual(q.normalize_score(model, 10.0), 1.0)
        self.assertAlmostArrayEqual(
            model.normalize(np.array([-1.0, 1.5, 3.5])), [0.0, 0.25, 0.75]
        )

    def test_monotone(self):
        rng = np.random.default_rng(2)
        model = q.fit_quality_model(rng.normal(size=500))
        normalized = model.normalize(np.linspace(-4, 4, 101))
        self.assertTrue((np.diff(normalized) >= 0).all())
        self.assertTrue(((normalized >= 0) & (normalized <= 1)).all())

    def test_uniform(self):
        rng = np.random.default_rng(3)
        model = q.fit_quality_model(rng.normal(size=2000))
        stat = q.uniformity_statistic(model, rng.normal(size=2000))
        self.assertLess(stat, 0.08)
        shifted = q.uniformity_statistic(model, rng.normal(1, size=2000))
        self.assertGreater(shifted, 0.2)

    def test_score_patch(self):
        noise = np.random.default_rng(4).normal(0, 0.02, (16, 16))
        corpus = np.stack(
            [edge_patch(c, noise) for c in np.linspace(0, 1, 11)]
        )
        model = q.fit_quality_model(q.raw_scores(corpus))
        sharp = Patch(edge_patch(1.5, noise), 0.0, 0.0, np.zeros(2))
        self.assertEqual(q.score_patch(model, sharp), 1.0)
        self.assertEqual(q.score_patch(model, edge_patch(1, noise).T), 0.0)
        self.assertEqual(q.score_patch(model, corpus).shape, (11,))

    def test_invalid(self):
        with self.assertRaises(ConfigurationError):
            q.fit_quality_model([])
        with self.assertRaises(ConfigurationError):
            q.fit_quality_model([1.0, np.nan])

    def test_immutable(self):
        model = q.fit_quality_model([1.0, 2.0])
        with self.assertRaises(ValueError):
            model.scores[0] = 5.0


def anchor_patches(faces, scheme, rng=None, n_offsets=1):
    """Normalized patches at the anchors of synthetic faces

    If `rng` is given, the anchors are moved along their normals by random
    offsets as for the training of the regressor."""
    spec = bt.small_patch_spec
    patches = []
    for face in faces:
        angles = initialize_enriched(face.anchors, scheme, 1).normal_angle
        angles = np.repeat(angles, n_offsets)
        anchors = np.repeat(face.anchors, n_offsets, axis=0)
        if rng is None:
            offsets = np.zeros(len(angles))
        else:
            offsets = generate_offsets(rng, spec, len(angles))
        normals = np.stack([np.cos(angles), np.sin(angles)], -1)
        centers = anchors + (offsets * face.image.scale)[:, None] * normals
        patches.append(extract_patches(face.image, centers, angles, spec))
    return np.concatenate(patches)


class TestSyntheticCorpus(bt.EnrichTestCase):
    """Test the quality scores of patches from synthetic faces"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scheme = load_scheme("synth-ellipse")
        cls.faces = bt.synthetic_faces(range(200))
        rng = np.random.default_rng(0)
        cls.scores = q.raw_scores(
            anchor_patches(cls.faces, cls.scheme, rng, n_offsets=4)
        )
        cls.model = q.fit_quality_model(cls.scores)

    def test_corpus_size(self):
        # 13 anchors per face
        self.assertEqual(len(self.model), 10400)

    def test_uniform(self):
        self.assertLess(
            q.uniformity_statistic(self.model, self.scores), 0.05
        )
        faces = bt.synthetic_faces(range(1000, 1100))
        rng = np.random.default_rng(1)
        scores = q.raw_scores(
            anchor_patches(faces, self.scheme, rng, n_offsets=4)
        )
        self.assertLess(q.uniformity_statistic(self.model, scores), 0.1)

    def test_ordering(self):
        seeds = range(50)
        vertical = anchor_patches(self.faces[:50], self.scheme)
        # same scenes with wider edges
        config = bt.small_scene_config(blur=(3.0, 3.0))
        blurred = anchor_patches(
            bt.synthetic_faces(seeds, config), self.scheme
        )
        horizontal = vertical.transpose(0, 2, 1)
        means = [
            self.model.normalize(q.raw_scores(patches)).mean()
            for patches in [vertical, blurred, horizontal]
        ]
        self.assertGreater(means[0], means[1])
        self.assertGreater(means[1], means[2])


if __name__ == "__main__":
    unittest.main()
