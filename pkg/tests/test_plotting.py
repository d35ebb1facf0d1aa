"""Test the :mod:`psy_enrich.plotting` module."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import os.path as osp
import unittest

import _base_testing as bt
import numpy as np
from PIL import Image

import psy_enrich.plotting as psyp
from psy_enrich.contour_geometry import ComponentSpec, ContourScheme
from psy_enrich.enrichment import initialize_enriched
from psy_enrich.rcsetup import rcParams


class TestOverlay(bt.EnrichTestCase):
    """Test the overlay images"""

    def render(self, fig):
        fig.canvas.draw()
        return np.asarray(fig.canvas.buffer_rgba())

    def test_size(self):
        fig = psyp.overlay_figure(np.zeros((40, 60)), [[10.0, 20.0]])
        rgba = self.render(fig)
        self.assertEqual(rgba.shape, (40, 60, 4))

    def test_anchor_position(self):
        fig = psyp.overlay_figure(np.zeros((40, 60)), [[10.0, 20.0]], 3)
        rgba = self.render(fig)
        # anchors are red on a black image
        r, g, b = rgba[20, 10, :3]
        self.assertGreater(r, 200)
        self.assertLess(g, 50)
        self.assertEqual(tuple(rgba[5, 50, :3]), (0, 0, 0))

    def test_confidence_cmap(self):
        scheme = ContourScheme(
            "circle", [ComponentSpec("circle", 0, 7, closed=True)]
        )
        anchors = bt.ellipse_points(8, (50.0, 50.0), (30.0, 30.0))
        enriched = initialize_enriched(anchors, scheme, 2)
        x, y = np.round(enriched.points[~enriched.anchor_mask][0])
        pixels = np.zeros((100, 100))
        # unrefined points are drawn with the maximum confidence
        r, g, b = self.render(psyp.overlay_figure(pixels, enriched))[
            int(y), int(x), :3
        ]
        self.assertLess(r, 50)
        self.assertGreater(g, 150)
        rcParams["overlay.cmap"] = "red_yellow_green_r"
        try:
            r, g, b = self.render(psyp.overlay_figure(pixels, enriched))[
                int(y), int(x), :3
            ]
        finally:
            rcParams["overlay.cmap"] = "red_yellow_green"
        self.assertGreater(r, 150)
        self.assertLess(g, 50)

    def test_save(self):
        scheme = self.scheme_68
        anchors = bt.scheme_anchors(scheme) + [30.0, 10.0]
        enriched = initialize_enriched(anchors, scheme, 3)
        refined = enriched.with_points(
            enriched.points, np.linspace(0, 1, len(enriched))
        )
        fname = osp.join(self.test_dir, "overlay.png")
        psyp.save_overlay(fname, np.full((90, 500), 0.5), refined)
        with Image.open(fname) as img:
            self.assertEqual(img.size, (500, 90))
        # unrefined landmarks
        psyp.save_overlay(fname, np.full((90, 500), 0.5), enriched)
        self.assertTrue(osp.exists(fname))


if __name__ == "__main__":
    unittest.main()
