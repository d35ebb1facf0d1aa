"""Test the :mod:`psy_enrich.enrichment` module."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import unittest

import _base_testing as bt
import numpy as np

import psy_enrich.enrichment as enr
from psy_enrich.contour_geometry import ComponentSpec, ContourScheme
from psy_enrich.data_io import EllipseArc
from psy_enrich.errors import ConfigurationError, ContractViolation


class TestHelpers(unittest.TestCase):
    """Test the density helpers"""

    def test_soft_index(self):
        self.assertEqual(enr.soft_index(3, 0, 5), 3.0)
        self.assertEqual(enr.soft_index(3, 2, 5), 3.4)
        with self.assertRaises(ContractViolation):
            enr.soft_index(3, 5, 5)
        with self.assertRaises(ContractViolation):
            enr.soft_index(3, -1, 5)

    def test_anchor_successors(self):
        scheme = ContourScheme(
            "mixed",
            [
                ComponentSpec("eye", 0, 3, closed=True),
                ComponentSpec("pupil", 4, 4, isolated=True),
                ComponentSpec("brow", 5, 7),
            ],
        )
        self.assertEqual(
            enr.anchor_successors(scheme), [1, 2, 3, 0, 4, 6, 7, 7]
        )

    def test_validate_density(self):
        self.assertEqual(enr.validate_density(5.0), 5)
        for val in [0, -1, 2.5, True]:
            with self.assertRaises(ConfigurationError):
                enr.validate_density(val)


class TestInitialize(bt.EnrichTestCase):
    """Test :func:`psy_enrich.enrichment.initialize_enriched`"""

    def test_counts_68(self):
        scheme = self.scheme_68
        anchors = bt.scheme_anchors(scheme)
        for density, count in zip([1, 2, 3, 5, 10], [68, 131, 194, 320, 635]):
            self.assertEqual(enr.enriched_count(scheme, density), count)
            enriched = enr.initialize_enriched(anchors, scheme, density)
            self.assertEqual(len(enriched), count, msg="D=%i" % density)

    def test_counts_98(self):
        scheme = self.scheme_98
        anchors = bt.scheme_anchors(scheme)
        enriched = enr.initialize_enriched(anchors, scheme, 5)
        self.assertEqual(len(enriched), 470)

    def test_anchors_exact(self):
        scheme = self.scheme_68
        anchors = bt.scheme_anchors(scheme)
        enriched = enr.initialize_enriched(anchors, scheme, 5)
        self.assertTrue(np.array_equal(enriched.anchors, anchors))
        self.assertEqual(enriched.anchor_mask.sum(), 68)
        for i in [0, 16, 36, 67]:
            pos = enriched.anchor_position(i)
            self.assertTrue(np.array_equal(enriched.points[pos], anchors[i]))
            self.assertEqual(enriched.t[pos], i)

    def test_density_one(self):
        scheme = self.scheme_68
        anchors = bt.scheme_anchors(scheme)
        enriched = enr.initialize_enriched(anchors, scheme, 1)
        self.assertTrue(np.array_equal(enriched.points, anchors))
        self.assertAlmostArrayEqual(enriched.t, np.arange(68))

    def test_soft_indices(self):
        scheme = self.scheme_68
        anchors = bt.scheme_anchors(scheme)
        enriched = enr.initialize_enriched(anchors, scheme, 5)
        self.assertAlmostArrayEqual(
            enriched.t[:7], [0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2]
        )
        # the facial contour ends with its last anchor
        self.assertEqual(enriched.t[80], 16)
        self.assertEqual(enriched.kind[80], "anchor")
        # closed contours interpolate back to their first anchor
        sl = enriched.component_slices["right eye"]
        self.assertEqual((sl.start, sl.stop), (160, 190))
        self.assertAlmostArrayEqual(
            enriched.t[sl][-4:], [41.2, 41.4, 41.6, 41.8]
        )

    def test_line_midpoints(self):
        scheme = self.scheme_68
        anchors = bt.scheme_anchors(scheme)
        enriched = enr.initialize_enriched(anchors, scheme, 2, "line")
        self.assertAlmostArrayEqual(
            enriched.points[1], 0.5 * (anchors[0] + anchors[1])
        )

    def test_isolated(self):
        scheme = self.scheme_98
        anchors = bt.scheme_anchors(scheme)
        enriched = enr.initialize_enriched(anchors, scheme, 5)
        self.assertEqual(enriched.isolated_mask.sum(), 2)
        self.assertTrue(np.isnan(enriched.normal_angle[-2:]).all())
        self.assertAlmostArrayEqual(enriched.t[-2:], [96, 97])
        self.assertTrue(np.array_equal(enriched.points[-2:], anchors[-2:]))

    def test_normals_outward(self):
        scheme = ContourScheme(
            "circle", [ComponentSpec("circle", 0, 7, closed=True)]
        )
        anchors = bt.ellipse_points(8, axes=(30.0, 30.0))
        enriched = enr.initialize_enriched(anchors, scheme, 4)
        radial = enriched.points - [64.0, 64.0]
        self.assertTrue(((enriched.normals * radial).sum(axis=-1) > 0).all())

    def test_wrong_anchors(self):
        scheme = self.scheme_68
        with self.assertRaises(ContractViolation):
            enr.initialize_enriched(np.zeros((67, 2)), scheme, 5)
        landmarks = enr.LandmarkSet("wflw-98", bt.scheme_anchors(scheme))
        with self.assertRaises(ContractViolation):
            enr.initialize_enriched(landmarks, scheme, 5)


class TestEnrichedLandmarkSet(bt.EnrichTestCase):
    """Test the :class:`psy_enrich.enrichment.EnrichedLandmarkSet`"""

    def setUp(self):
        super().setUp()
        scheme = self.scheme_68
        self.enriched = enr.initialize_enriched(
            bt.scheme_anchors(scheme), scheme, 3
        )

    def test_with_points(self):
        moved = self.enriched.with_points(
            self.enriched.points + 1, np.ones(len(self.enriched))
        )
        self.assertAlmostArrayEqual(moved.points, self.enriched.points + 1)
        self.assertIsNone(self.enriched.confidence)
        self.assertEqual(moved.density, 3)
        with self.assertRaises(ContractViolation):
            self.enriched.with_points(np.zeros((3, 2)))

    def test_to_frame(self):
        frame = self.enriched.to_frame()
        self.assertEqual(len(frame), 194)
        self.assertEqual(
            list(frame.columns),
            ["x", "y", "t", "kind", "component", "confidence"],
        )
        self.assertEqual(frame.component.iloc[0], "facial contour")
        self.assertTrue(frame.confidence.isnull().all())

    def test_shapes(self):
        with self.assertRaises(ContractViolation):
            enr.EnrichedLandmarkSet(
                self.enriched.scheme,
                3,
                self.enriched.points,
                self.enriched.t[:-1],
                self.enriched.normal_angle,
                self.enriched.component,
                self.enriched.anchor_index,
                self.enriched.sub_index,
            )


class TestDenseTruth(bt.EnrichTestCase):
    """Test :func:`psy_enrich.enrichment.enrich_dense_truth`"""

    def test_circle(self):
        scheme = ContourScheme(
            "circle", [ComponentSpec("circle", 0, 5, closed=True)]
        )
        circle = EllipseArc(
            [50.0, 40.0], (20.0, 20.0), 0.0, 0.3, None, 6, True
        )
        anchors = circle.eval(np.arange(6))
        truth = enr.enrich_dense_truth(anchors, [circle], scheme, 5)
        self.assertEqual(len(truth), 30)
        phi = 0.3 + 2 * np.pi * np.arange(30) / 30
        expected = np.stack(
            [50 + 20 * np.cos(phi), 40 + 20 * np.sin(phi)], axis=-1
        )
        self.assertAlmostArrayEqual(truth.points, expected, atol=1e-5)
        self.assertTrue(np.array_equal(truth.anchors, anchors))

    def test_arc_length_uniform(self):
        scheme = ContourScheme("arc", [ComponentSpec("arc", 0, 4)])
        arc = EllipseArc([0.0, 0.0], (40.0, 30.0), 0.0, 0.0, np.pi, 5)
        anchors = arc.eval(np.arange(5))
        truth = enr.enrich_dense_truth(anchors, [arc], scheme, 4)
        # equal chords within every anchor segment
        for i in range(4):
            pts = truth.points[4 * i : 4 * i + 5]
            chords = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
            self.assertAlmostArrayEqual(chords, chords.mean(), rtol=1e-2)

    def test_curve_count(self):
        scheme = ContourScheme("arc", [ComponentSpec("arc", 0, 4)])
        with self.assertRaises(ContractViolation):
            enr.enrich_dense_truth(np.zeros((5, 2)), [], scheme, 4)


if __name__ == "__main__":
    unittest.main()
