"""Configuration of the psy-enrich package.

This module defines the :attr:`rcParams` for psy-enrich, the validation
functions for its keys and the loader for YAML run configuration files.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import logging
import os
import os.path as osp
from typing import Any, Dict, Iterable, Optional, Tuple
from warnings import warn

import yaml
from matplotlib.rcsetup import (
    ValidateInStrings,
    validate_bool,
    validate_color,
    validate_int,
)
from psyplot.config.rcsetup import RcParams

from psy_enrich.errors import ConfigurationError, EnrichWarning

logger = logging.getLogger(__name__)


def try_and_error(*funcs):
    """Apply multiple validation functions

    Parameters
    ----------
    ``*funcs``
        Validation functions to test

    Returns
    -------
    function"""

    def validate(value):
        exc = None
        for func in funcs:
            try:
                return func(value)
            except (ValueError, TypeError) as e:
                exc = e
        raise exc

    return validate


# -----------------------------------------------------------------------------
# ------------------------- validation functions ------------------------------
# -----------------------------------------------------------------------------


def validate_str(s):
    """Validate a string

    Parameters
    ----------
    s: str

    Returns
    -------
    str

    Raises
    ------
    ValueError"""
    if not isinstance(s, str):
        raise ValueError("Did not found string!")
    return str(s)


def validate_float(s):
    """convert `s` to float or raise

    Returns
    -------
    s converted to a float: float

    Raises
    ------
    ValueError"""
    try:
        return float(s)
    except (ValueError, TypeError):
        raise ValueError('Could not convert "%s" to float' % str(s))


def validate_none(b):
    """Validate that None is given

    Parameters
    ----------
    b: {None, 'none'}
        None or string (the case is ignored)

    Returns
    -------
    None

    Raises
    ------
    ValueError"""
    if isinstance(b, str):
        b = b.lower()
    if b is None or b == "none":
        return None
    else:
        raise ValueError('Could not convert "%s" to None' % b)


def validate_probability(val):
    """Validate a probability between 0 and 1"""
    val = validate_float(val)
    if val < 0 or val > 1:
        raise ValueError("Probabilities must lay between 0 and 1!")
    return val


def validate_positive_int(val):
    """Validate an integer that is at least 1"""
    val = validate_int(val)
    if val < 1:
        raise ValueError("Expected a positive integer, not %i" % val)
    return val


def validate_positive_float(val):
    """Validate a float that is strictly larger than 0"""
    val = validate_float(val)
    if not val > 0:
        raise ValueError("Expected a positive number, not %s" % val)
    return val


def validate_patch_size(val):
    """Validate the edge length of a square patch

    The size must be even and at least 8 pixels, such that the offset
    bound ``size / 8`` is at least one pixel."""
    val = validate_int(val)
    if val < 8 or val % 2:
        raise ValueError(
            "Patch sizes must be even and at least 8, not %i" % val
        )
    return val


class ValidateList(object):
    """Validate a list of the specified `dtype`"""

    def __init__(self, dtype=None, length=None):
        """
        Parameters
        ----------
        dtype: object
            A datatype (e.g. :class:`float`) that shall be used for the
            conversion
        length: int
            The expected length of the list
        """
        #: data type (e.g. :class:`float`) used for the conversion
        self.dtype = dtype
        self.length = length

    def __call__(self, sequence):
        """Validate whether `sequence` is a list with contents of :attr:`dtype`

        Parameters
        ----------
        sequence: list-like

        Returns
        -------
        list
            list with values of dtype :attr:`dtype`

        Raises
        ------
        ValueError"""
        if isinstance(sequence, str):
            raise ValueError("Expected a list, not the string %r" % sequence)
        try:
            if self.dtype is None:
                validated = list(sequence)
            else:
                validated = list(map(self.dtype, sequence))
        except TypeError:
            raise ValueError(
                "Could not convert to list of type %s!" % str(self.dtype)
            )
        if self.length is not None and len(validated) != self.length:
            raise ValueError(
                "List with length %i is required! Not %i!"
                % (self.length, len(validated))
            )
        return validated


class ValidateRange(ValidateList):
    """Validate a ``[low, high]`` interval of floats

    Parameters
    ----------
    vmin: float
        The lower bound for `low` (or None)
    vmax: float
        The upper bound for `high` (or None)"""

    def __init__(self, vmin=None, vmax=None):
        super().__init__(validate_float, 2)
        self.vmin = vmin
        self.vmax = vmax

    def __call__(self, sequence):
        low, high = super().__call__(sequence)
        if low > high:
            raise ValueError(
                "Lower bound %s is larger than upper bound %s" % (low, high)
            )
        if self.vmin is not None and low < self.vmin:
            raise ValueError("%s is smaller than %s" % (low, self.vmin))
        if self.vmax is not None and high > self.vmax:
            raise ValueError("%s is larger than %s" % (high, self.vmax))
        return [low, high]


def validate_milestones(value):
    """Validate the learning rate milestones as fractions of the epochs"""
    value = ValidateList(validate_float)(value)
    if any(v <= 0 or v >= 1 for v in value):
        raise ValueError(
            "Milestones must be fractions in (0, 1), not %s" % (value,)
        )
    if sorted(value) != value:
        raise ValueError("Milestones must be sorted, not %s" % (value,))
    return value


validate_str_or_none = try_and_error(validate_none, validate_str)

validate_fit_kind = try_and_error(
    validate_none, ValidateInStrings("fit_kind", ["line", "bspline"], True)
)

validate_mode = ValidateInStrings("mode", ["train", "test", "train+test"])

validate_layout = ValidateInStrings("layout", ["300w-68", "ellipse"])


# -----------------------------------------------------------------------------
# ------------------------------ rcParams -------------------------------------
# -----------------------------------------------------------------------------


defaultParams = {
    # -------------------------------------------------------------------------
    # ----------------------------- schemes -----------------------------------
    # -------------------------------------------------------------------------
    "scheme.default": [
        "300w-68",
        validate_str,
        "The contour scheme that is used if none is specified",
    ],
    "scheme.path": [
        None,
        validate_str_or_none,
        "Additional directory to search for scheme files (`<id>.json`)",
    ],
    # -------------------------------------------------------------------------
    # --------------------------- enrichment ----------------------------------
    # -------------------------------------------------------------------------
    "enrich.density": [
        5,
        validate_positive_int,
        "The enriching density D, i.e. subdivisions per anchor segment",
    ],
    "enrich.fit_kind": [
        None,
        validate_fit_kind,
        "Override the fit kind of all components ('line' or 'bspline'). "
        "If None, the fit kind of the scheme is used",
    ],
    # -------------------------------------------------------------------------
    # ----------------------------- patches -----------------------------------
    # -------------------------------------------------------------------------
    "patch.size": [
        64,
        validate_patch_size,
        "Edge length of the normalized patches in aligned pixels",
    ],
    "patch.reference_size": [
        1024,
        validate_positive_int,
        "Size of the aligned reference face frame in pixels",
    ],
    # -------------------------------------------------------------------------
    # ----------------------------- quality -----------------------------------
    # -------------------------------------------------------------------------
    "quality.epsilon": [
        1e-6,
        validate_float,
        "Variance floor added to both standard deviations of the "
        "directional variance ratio",
    ],
    # -------------------------------------------------------------------------
    # --------------------------- augmentation --------------------------------
    # -------------------------------------------------------------------------
    "augment.gray_prob": [
        0.5,
        validate_probability,
        "Probability of a random global intensity scale and shift",
    ],
    "augment.gray_scale": [
        [0.6, 1.4],
        ValidateRange(0),
        "Range of the random intensity scale",
    ],
    "augment.gray_shift": [
        [-0.1, 0.1],
        ValidateRange(-1, 1),
        "Range of the random intensity shift",
    ],
    "augment.blur_prob": [
        0.5,
        validate_probability,
        "Probability of a random gaussian blur",
    ],
    "augment.blur_sigma": [
        [0.0, 2.0],
        ValidateRange(0),
        "Range of the standard deviation of the random blur in pixels",
    ],
    "augment.occlusion_prob": [
        0.3,
        validate_probability,
        "Probability of a random rectangular occlusion",
    ],
    "augment.occlusion_fraction": [
        [0.0, 0.4],
        ValidateRange(0, 1),
        "Range of the area fraction of the patch that is occluded",
    ],
    "augment.occlusion_fill": [
        None,
        try_and_error(validate_none, validate_probability),
        "Gray value of the occlusion. If None, a random value is drawn",
    ],
    # -------------------------------------------------------------------------
    # ----------------------------- training ----------------------------------
    # -------------------------------------------------------------------------
    "train.batch_size": [
        68,
        validate_positive_int,
        "Number of patches per optimization step",
    ],
    "train.learning_rate": [
        1e-3,
        validate_positive_float,
        "Initial learning rate of the Adam optimizer",
    ],
    "train.lr_milestones": [
        [0.5, 0.75, 0.9],
        validate_milestones,
        "Fractions of the epochs where the learning rate is decayed",
    ],
    "train.lr_gamma": [
        0.1,
        validate_positive_float,
        "Factor of the learning rate decay",
    ],
    "train.epochs": [
        20,
        validate_positive_int,
        "Number of training epochs",
    ],
    "train.seed": [
        0,
        validate_int,
        "Seed for the offsets, augmentations and the initial parameters",
    ],
    "train.channel_multiplier": [
        1,
        validate_positive_int,
        "k in m = k * n channels that enter the index embedding",
    ],
    "train.hidden": [
        128,
        validate_positive_int,
        "Number of hidden units of the heatmap head",
    ],
    "train.temperature": [
        1.0,
        validate_positive_float,
        "Temperature of the soft-argmax",
    ],
    "train.zero_head": [
        False,
        validate_bool,
        "Initialize the output layer of the head with zeros",
    ],
    "train.normalize_patches": [
        True,
        validate_bool,
        "Rotate the patches such that their x-axis is the contour normal",
    ],
    "train.use_quality": [
        True,
        validate_bool,
        "Weight the loss and the refinement by the normalized quality score",
    ],
    "train.use_index_embedding": [
        True,
        validate_bool,
        "Select the feature channels by the soft index of the landmark",
    ],
    "train.workers": [
        1,
        validate_positive_int,
        "Number of threads that prepare the training patches",
    ],
    # -------------------------------------------------------------------------
    # ------------------------- synthetic scenes ------------------------------
    # -------------------------------------------------------------------------
    "synth.layout": [
        "300w-68",
        validate_layout,
        "Layout of the synthetic scenes ('300w-68' or 'ellipse')",
    ],
    "synth.image_size": [
        512,
        validate_positive_int,
        "Width and height of the synthetic images in pixels",
    ],
    "synth.face_size": [
        [340.0, 420.0],
        ValidateRange(1),
        "Range of the size of the synthetic faces in pixels",
    ],
    "synth.blur": [
        [0.7, 1.5],
        ValidateRange(0.1),
        "Range of the edge blur (standard deviation in pixels)",
    ],
    "synth.noise": [
        [0.005, 0.02],
        ValidateRange(0),
        "Range of the standard deviation of the additive pixel noise",
    ],
    "synth.contrast": [
        [0.15, 0.3],
        ValidateRange(0, 0.5),
        "Range of the absolute edge contrast per contour",
    ],
    "synth.density": [
        5,
        validate_positive_int,
        "Enriching density of the dense ground truth of synthetic scenes",
    ],
    # -------------------------------------------------------------------------
    # ---------------------------- evaluation ---------------------------------
    # -------------------------------------------------------------------------
    "eval.sample_step": [
        0.25,
        validate_positive_float,
        "Maximum arc length step in pixels for the point-to-curve distance",
    ],
    "measures.default": [
        "300w-68",
        validate_str,
        "Name of the shipped morphometric measure definitions",
    ],
    # -------------------------------------------------------------------------
    # ----------------------------- overlays ----------------------------------
    # -------------------------------------------------------------------------
    "overlay.anchor_color": [
        "r",
        validate_color,
        "Color of anchor points in overlay images",
    ],
    "overlay.cmap": [
        "red_yellow_green",
        validate_str,
        "Colormap for the confidence of interpolated points",
    ],
    "overlay.markersize": [
        3.0,
        validate_positive_float,
        "Marker diameter in image pixels",
    ],
    # -------------------------------------------------------------------------
    # ------------------------------ misc -------------------------------------
    # -------------------------------------------------------------------------
    "data.root": [
        os.getenv("PSY_ENRICH_DATA", os.curdir),
        validate_str,
        "Root directory of relative dataset paths (default from the "
        "PSY_ENRICH_DATA environment variable)",
    ],
    "data.one_based": [
        False,
        validate_bool,
        "Whether coordinates in pts files are 1-based (Matlab convention)",
    ],
    "cli.workers": [
        1,
        validate_positive_int,
        "Number of threads for per-file work in the command line interface",
    ],
    "cli.baseline": [
        "Baseline",
        validate_str,
        "Name of the baseline network in the run label",
    ],
    "cli.mode": [
        "train",
        validate_mode,
        "Plug mode of the enricher ('train', 'test' or 'train+test')",
    ],
}


#: the :class:`~psyplot.config.rcsetup.RcParams` for psy-enrich
rcParams = RcParams(defaultParams=defaultParams)

rcParams.update_from_defaultParams()


def get_section(prefix: str, rc: Optional[RcParams] = None) -> Dict[str, Any]:
    """Get the items of one key group without its prefix

    Parameters
    ----------
    prefix: str
        The prefix of the group, e.g. ``'train'``
    rc: RcParams
        The parameters to use. If None, the global :attr:`rcParams`

    Returns
    -------
    dict
        A mapping from the key without ``prefix + '.'`` to the value"""
    rc = rcParams if rc is None else rc
    prefix = prefix.rstrip(".") + "."
    return {
        key[len(prefix) :]: val
        for key, val in rc.items()
        if key.startswith(prefix)
    }


def new_rcparams(
    base: Optional[RcParams] = None, **overrides
) -> RcParams:
    """Create an independent copy of the parameters

    Parameters
    ----------
    base: RcParams
        The parameters to copy. If None, the global :attr:`rcParams`
    ``**overrides``
        Keys (with ``'.'`` replaced by ``'__'``) to set in the copy

    Returns
    -------
    RcParams
        The validated copy"""
    base = rcParams if base is None else base
    rc = RcParams(defaultParams=defaultParams)
    rc.update_from_defaultParams()
    for key, val in base.items():
        rc[key] = val
    for key, val in overrides.items():
        rc[key.replace("__", ".")] = val
    return rc


def update_rcparams(
    rc: RcParams, values: Dict[str, Any], source: str = "<dict>"
) -> RcParams:
    """Validate and set `values` in `rc`

    Raises
    ------
    psy_enrich.errors.ConfigurationError
        If a key is unknown or the value is invalid"""
    for key, val in values.items():
        if key not in defaultParams:
            raise ConfigurationError(
                "%s: %r is not a valid configuration key" % (source, key)
            )
        try:
            rc[key] = val
        except ValueError as e:
            raise ConfigurationError("%s: %s" % (source, e))
    return rc


def load_config(
    fname: str, base: Optional[RcParams] = None, **overrides
) -> RcParams:
    """Load a run configuration file

    The file is a flat YAML mapping from configuration keys to values, e.g.::

        enrich.density: 5
        train.epochs: 30
        train.lr_milestones: [0.5, 0.75]

    Keys that are None in `overrides` are ignored, all other overrides win
    over the values in the file.

    Parameters
    ----------
    fname: str
        The path to the YAML file
    base: RcParams
        The parameters to start from (the global :attr:`rcParams` by
        default)
    ``**overrides``
        Keys (with ``'.'`` replaced by ``'__'``) that overwrite the file

    Returns
    -------
    RcParams
        The resolved configuration"""
    rc = new_rcparams(base)
    if fname is not None:
        if not osp.exists(fname):
            raise ConfigurationError("Config file %s does not exist" % fname)
        with open(fname) as f:
            values = yaml.safe_load(f) or {}
        if not isinstance(values, dict):
            raise ConfigurationError(
                "%s must contain a mapping, not %s"
                % (fname, type(values).__name__)
            )
        logger.debug(
            "Loading %i configuration keys from %s", len(values), fname
        )
        update_rcparams(rc, values, fname)
    overrides = {
        key.replace("__", "."): val
        for key, val in overrides.items()
        if val is not None
    }
    return update_rcparams(rc, overrides, "command line")


def dump_config(rc: RcParams, keys: Optional[Iterable[str]] = None) -> str:
    """Dump the configuration as YAML

    Parameters
    ----------
    rc: RcParams
        The parameters to dump
    keys: list of str
        The keys to include. If None, all keys are dumped"""
    keys = sorted(rc) if keys is None else list(keys)
    unknown = [key for key in keys if key not in rc]
    if unknown:
        warn("Ignoring unknown keys %s" % ", ".join(unknown), EnrichWarning)
    return yaml.safe_dump(
        {key: rc[key] for key in keys if key in rc}, default_flow_style=None
    )


def pair(value) -> Tuple[float, float]:
    """Convert a validated range into a tuple"""
    low, high = value
    return float(low), float(high)
