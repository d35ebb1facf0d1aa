# -*- coding: utf-8 -*-
"""colors module of the psy-enrich package.

This module contains the color maps that are used to visualize the
confidence of refined landmarks.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import matplotlib as mpl
from matplotlib.colors import Colormap, LinearSegmentedColormap
from psyplot.docstring import docstrings

_cmapnames = {  # names of self defined colormaps (see get_cmap function below)
    "red_yellow_green": [  # confidence
        (0.8, 0, 0),
        (1, 0.5, 0),
        (1, 1, 0),
        (0.6, 0.9, 0),
        (0, 0.7, 0),
    ],
}
for key, val in list(_cmapnames.items()):
    _cmapnames[key + "_r"] = val[::-1]


docstrings.params[
    "cmap_note"
] = """
        Strings may be any valid colormap name of :attr:`matplotlib.colormaps`
        or one of the color lists defined in this module (including their
        reversed color maps given via the '_r' extension)."""


@docstrings.dedent
def get_cmap(name, lut=None):
    """
    Returns the specified colormap.

    Parameters
    ----------
    name: str or :class:`matplotlib.colors.Colormap`
        If a colormap, it returned unchanged.
        %(cmap_note)s
    lut: int
        An integer giving the number of entries desired in the lookup table

    Returns
    -------
    matplotlib.colors.Colormap
        The colormap specified by `name`"""
    if isinstance(name, Colormap):
        cmap = name
    elif name in _cmapnames:
        colors = _cmapnames[name]
        return LinearSegmentedColormap.from_list(
            name=name, colors=colors, N=lut or 256
        )
    else:
        cmap = mpl.colormaps[name]
    if lut is not None and cmap.N != lut:
        cmap = cmap.resampled(lut)
    return cmap

