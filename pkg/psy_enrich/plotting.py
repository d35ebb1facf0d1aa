"""Overlay images of enriched landmarks.

The overlays are drawn with the Agg backend of matplotlib on a figure that
has exactly one pixel per image pixel, such that the written file has the
dimensions of the input image.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import inspect
import logging
from typing import Optional, Union

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from psyplot.docstring import docstrings

from psy_enrich.colors import get_cmap
from psy_enrich.enrichment import EnrichedLandmarkSet
from psy_enrich.rcsetup import rcParams

logger = logging.getLogger(__name__)

#: points per inch of matplotlib
_POINTS = 72.0


docstrings.params["overlay_params"] = inspect.cleandoc(
    """
pixels: np.ndarray
    The grayscale image of shape ``(h, w)``
landmarks: EnrichedLandmarkSet or np.ndarray
    The landmarks to draw. Anchors are drawn in the ``overlay.anchor_color``,
    new points are colored by their confidence with ``overlay.cmap``
markersize: float
    The marker diameter in image pixels. If None, the
    ``overlay.markersize`` rcParam is used"""
)


@docstrings.dedent
def overlay_figure(
    pixels: np.ndarray,
    landmarks: Union[EnrichedLandmarkSet, np.ndarray],
    markersize: Optional[float] = None,
) -> Figure:
    """Draw landmarks on top of an image

    Parameters
    ----------
    %(overlay_params)s

    Returns
    -------
    matplotlib.figure.Figure
        The figure (attached to an Agg canvas) with a dpi of 1"""
    pixels = np.asarray(pixels, dtype=float)
    height, width = pixels.shape
    if markersize is None:
        markersize = rcParams["overlay.markersize"]
    fig = Figure(figsize=(width, height), dpi=1)
    FigureCanvasAgg(fig)
    ax = fig.add_axes([0, 0, 1, 1])
    ax.imshow(
        pixels, cmap="gray", vmin=0, vmax=1, interpolation="nearest"
    )
    area = (markersize * _POINTS) ** 2
    if isinstance(landmarks, EnrichedLandmarkSet):
        mask = landmarks.anchor_mask
        new = landmarks.points[~mask]
        if len(new):
            conf = landmarks.confidence
            colors = np.ones(len(new)) if conf is None else conf[~mask]
            ax.scatter(
                new[:, 0],
                new[:, 1],
                s=area,
                c=np.nan_to_num(colors, nan=1.0),
                cmap=get_cmap(rcParams["overlay.cmap"]),
                vmin=0,
                vmax=1,
                linewidths=0,
            )
        anchors = landmarks.points[mask]
    else:
        anchors = np.asarray(landmarks, dtype=float)
    ax.scatter(
        anchors[:, 0],
        anchors[:, 1],
        s=area,
        c=rcParams["overlay.anchor_color"],
        linewidths=0,
    )
    ax.set_xlim(-0.5, width - 0.5)
    ax.set_ylim(height - 0.5, -0.5)
    ax.axis("off")
    return fig


@docstrings.dedent
def save_overlay(
    path,
    pixels: np.ndarray,
    landmarks: Union[EnrichedLandmarkSet, np.ndarray],
    markersize: Optional[float] = None,
) -> None:
    """Save an overlay image

    Parameters
    ----------
    path: str
        The output path (PNG)
    %(overlay_params)s"""
    fig = overlay_figure(pixels, landmarks, markersize)
    fig.savefig(path, dpi=1)
    logger.debug("Saved overlay to %s", path)
