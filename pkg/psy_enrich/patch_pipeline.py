"""Patch generation for psy-enrich.

This module generates the random training offsets, crops the patches that
are aligned with the contour normal and applies the training augmentations.

All lengths of a :class:`PatchSpec` (the patch size and the offsets) are
measured in the aligned reference frame, where the face spans
``reference_size`` pixels. A :class:`FaceImage` knows the size of the face in
image pixels, and the alignment scale is applied within the single
resampling of :func:`extract_normalized_patch`.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import inspect
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from psyplot.docstring import docstrings
from scipy.ndimage import gaussian_filter, map_coordinates

from psy_enrich.errors import (
    ConfigurationError,
    ContractViolation,
    DegenerateAnnotationError,
)
from psy_enrich.rcsetup import pair, rcParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PatchSpec:
    """The geometry of the normalized patches

    Parameters
    ----------
    size: int
        The edge length ``s_patch`` of the square patches (even, >= 8)
    reference_size: int
        The size of the aligned face"""

    size: int = 64
    reference_size: int = 1024

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 8 or self.size % 2:
            raise ConfigurationError(
                "The patch size must be even and at least 8, not %s"
                % (self.size,)
            )
        if self.reference_size < self.size:
            raise ConfigurationError(
                "The reference size %s is smaller than the patch size %s"
                % (self.reference_size, self.size)
            )

    @classmethod
    def from_rcparams(cls, rc=None, **kwargs) -> PatchSpec:
        """Create the spec from the ``patch.*`` rcParams"""
        rc = rcParams if rc is None else rc
        kwargs.setdefault("size", rc["patch.size"])
        kwargs.setdefault("reference_size", rc["patch.reference_size"])
        return cls(**kwargs)

    @property
    def ratio(self) -> Fraction:
        """The patch-face ratio"""
        return Fraction(self.size, self.reference_size)

    @property
    def offset_bound(self) -> float:
        """The bound of the random offsets, ``size / 8``"""
        return self.size / 8


@dataclass
class FaceImage:
    """A grayscale face image

    Parameters
    ----------
    pixels: np.ndarray
        The intensities of shape ``(height, width)`` in ``[0, 1]``
    face_size: float
        The size of the face in image pixels
    reference_size: int
        The size of the face in the aligned frame"""

    pixels: np.ndarray
    face_size: float
    reference_size: int = 1024

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 2 or not self.pixels.size:
            raise ContractViolation(
                "Expected a non-empty 2D grayscale image, got shape %s"
                % (self.pixels.shape,)
            )
        if not np.isfinite(self.pixels).all():
            raise ContractViolation("Image intensities must be finite")
        if self.pixels.min() < 0 or self.pixels.max() > 1:
            raise ContractViolation("Image intensities must be in [0, 1]")
        if not self.face_size > 0:
            raise DegenerateAnnotationError(
                "The face size must be positive, not %s" % (self.face_size,)
            )

    @classmethod
    def from_landmarks(
        cls, pixels: np.ndarray, anchors: np.ndarray, reference_size=None
    ) -> FaceImage:
        """Create an image whose face size is given by the landmarks

        The face size is the larger side of the bounding box of the
        `anchors`"""
        if reference_size is None:
            reference_size = rcParams["patch.reference_size"]
        anchors = np.asarray(anchors, dtype=float)
        face_size = float(np.ptp(anchors, axis=0).max())
        if face_size == 0:
            raise DegenerateAnnotationError(
                "Cannot compute the face size from coincident landmarks"
            )
        return cls(pixels, face_size, reference_size)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def scale(self) -> float:
        """Image pixels per aligned pixel"""
        return self.face_size / self.reference_size


@dataclass
class Patch:
    """A normalized patch, the input of the offset regressor"""

    #: The intensities of shape ``(size, size)``
    pixels: np.ndarray

    #: The soft index of the landmark
    t: float

    #: The normal angle in radians that the x-axis is aligned with
    normal_angle: float

    #: The center in image pixels
    center: np.ndarray

    #: The position of the source landmark in its landmark set
    source: Optional[int] = None

    def transpose(self) -> Patch:
        return Patch(
            self.pixels.T.copy(),
            self.t,
            self.normal_angle,
            self.center,
            self.source,
        )


@dataclass(frozen=True)
class OffsetSample:
    """A landmark that is moved along its normal"""

    #: The offset in aligned pixels along the normal
    offset: float

    #: The distorted center in image pixels
    center: np.ndarray


def generate_offset(rng: np.random.Generator, spec: PatchSpec) -> float:
    """Draw a random offset from the open interval ``(-b, b)``

    ``b`` is the :attr:`~PatchSpec.offset_bound` of `spec`"""
    bound = spec.offset_bound
    while True:
        offset = rng.uniform(-bound, bound)
        if offset != -bound:
            return float(offset)


def generate_offsets(
    rng: np.random.Generator, spec: PatchSpec, size: int
) -> np.ndarray:
    """Vectorized version of :func:`generate_offset`"""
    bound = spec.offset_bound
    ret = rng.uniform(-bound, bound, size)
    while (ret == -bound).any():
        mask = ret == -bound
        ret[mask] = rng.uniform(-bound, bound, mask.sum())
    return ret


def distort(anchor, normal_angle: float, offset: float, scale: float):
    """Move a landmark along its normal

    Parameters
    ----------
    anchor: np.ndarray
        The landmark in image pixels
    normal_angle: float
        The angle of the normal
    offset: float
        The offset in aligned pixels
    scale: float
        Image pixels per aligned pixel (see :attr:`FaceImage.scale`)

    Returns
    -------
    OffsetSample
        The offset and the distorted center"""
    normal = np.array([np.cos(normal_angle), np.sin(normal_angle)])
    center = np.asarray(anchor, dtype=float) + offset * scale * normal
    return OffsetSample(float(offset), center)


def _sampling_grid(centers, angles, size, scale):
    """The image coordinates of the patch pixels

    Returns arrays of shape ``(N, size, size)`` for x and y"""
    offsets = (np.arange(size) - (size - 1) / 2) * scale
    b, a = np.meshgrid(offsets, offsets, indexing="ij")
    cos = np.cos(angles)[:, np.newaxis, np.newaxis]
    sin = np.sin(angles)[:, np.newaxis, np.newaxis]
    x = centers[:, 0, np.newaxis, np.newaxis] + a * cos - b * sin
    y = centers[:, 1, np.newaxis, np.newaxis] + a * sin + b * cos
    return x, y


docstrings.params["patch_extraction_params"] = inspect.cleandoc(
    """
image: FaceImage
    The image to sample from
spec: PatchSpec
    The geometry of the patch
normalize: bool
    If False, the patches are cropped axis-aligned"""
)


@docstrings.dedent
def extract_patches(
    image: FaceImage,
    centers: np.ndarray,
    angles: np.ndarray,
    spec: PatchSpec,
    normalize: bool = True,
) -> np.ndarray:
    """Extract normalized patches

    Parameters
    ----------
    centers: np.ndarray
        The patch centers of shape ``(N, 2)`` in image pixels
    angles: np.ndarray
        The normal angles of shape ``(N, )``
    %(patch_extraction_params)s

    Returns
    -------
    np.ndarray
        The patches of shape ``(N, size, size)``"""
    centers = np.asarray(centers, dtype=float).reshape((-1, 2))
    angles = np.asarray(angles, dtype=float).reshape(-1)
    if len(angles) != len(centers):
        raise ContractViolation(
            "Got %i centers but %i angles" % (len(centers), len(angles))
        )
    if not np.isfinite(centers).all():
        raise ContractViolation("Patch centers must be finite")
    if normalize:
        if not np.isfinite(angles).all():
            raise ContractViolation("Normal angles must be finite")
    else:
        angles = np.zeros_like(angles)
    if image.reference_size != spec.reference_size:
        raise ContractViolation(
            "Image aligned to %i pixels but the patches to %i"
            % (image.reference_size, spec.reference_size)
        )
    x, y = _sampling_grid(centers, angles, spec.size, image.scale)
    values = map_coordinates(
        image.pixels, [y.ravel(), x.ravel()], order=1, mode="nearest"
    )
    return np.clip(values.reshape(x.shape), 0, 1)


@docstrings.dedent
def extract_normalized_patch(
    image: FaceImage,
    center,
    normal_angle: float,
    spec: PatchSpec,
    normalize: bool = True,
    t: float = 0.0,
    source: Optional[int] = None,
) -> Patch:
    """Crop a patch whose x-axis lies along the contour normal

    The rotation, the alignment scale and the crop are fused into a single
    inverse-mapped bilinear resampling. Samples outside of the image
    replicate the border pixels.

    Parameters
    ----------
    center: np.ndarray
        The center of the patch in image pixels
    normal_angle: float
        The angle of the normal in radians
    %(patch_extraction_params)s
    t: float
        The soft index of the landmark
    source: int
        The position of the landmark in its landmark set

    Returns
    -------
    Patch
        The normalized patch"""
    center = np.asarray(center, dtype=float)
    pixels = extract_patches(
        image, center[np.newaxis], [normal_angle], spec, normalize
    )[0]
    return Patch(pixels, t, normal_angle, center, source)


@dataclass(frozen=True)
class AugmentConfig:
    """Probabilities and ranges of the training augmentations"""

    gray_prob: float = 0.5
    gray_scale: Tuple[float, float] = (0.6, 1.4)
    gray_shift: Tuple[float, float] = (-0.1, 0.1)
    blur_prob: float = 0.5
    blur_sigma: Tuple[float, float] = (0.0, 2.0)
    occlusion_prob: float = 0.3
    occlusion_fraction: Tuple[float, float] = (0.0, 0.4)
    occlusion_fill: Optional[float] = None

    def __post_init__(self):
        for attr in ["gray_prob", "blur_prob", "occlusion_prob"]:
            val = getattr(self, attr)
            if not 0 <= val <= 1:
                raise ConfigurationError(
                    "%s must be in [0, 1], not %s" % (attr, val)
                )
        for attr in [
            "gray_scale",
            "gray_shift",
            "blur_sigma",
            "occlusion_fraction",
        ]:
            low, high = getattr(self, attr)
            if low > high:
                raise ConfigurationError(
                    "Invalid range %s for %s" % ((low, high), attr)
                )
            object.__setattr__(self, attr, (float(low), float(high)))
        if self.blur_sigma[0] < 0:
            raise ConfigurationError("Blur sigmas must not be negative")
        low, high = self.occlusion_fraction
        if low < 0 or high > 1:
            raise ConfigurationError("Occlusion fractions must be in [0, 1]")

    @classmethod
    def from_rcparams(cls, rc=None, **kwargs) -> AugmentConfig:
        """Create the config from the ``augment.*`` rcParams"""
        rc = rcParams if rc is None else rc
        for key in ["gray_prob", "blur_prob", "occlusion_prob"]:
            kwargs.setdefault(key, rc["augment." + key])
        for key in [
            "gray_scale",
            "gray_shift",
            "blur_sigma",
            "occlusion_fraction",
        ]:
            kwargs.setdefault(key, pair(rc["augment." + key]))
        kwargs.setdefault("occlusion_fill", rc["augment.occlusion_fill"])
        return cls(**kwargs)

    @classmethod
    def disabled(cls) -> AugmentConfig:
        """A config that leaves patches unchanged"""
        return cls(gray_prob=0, blur_prob=0, occlusion_prob=0)


def augment_pixels(
    pixels: np.ndarray, rng: np.random.Generator, config: AugmentConfig
) -> np.ndarray:
    """Apply random gray, random blur and random occlusion

    Every augmentation is applied with its probability in `config`. The
    result is clipped to ``[0, 1]``."""
    ret = np.array(pixels, dtype=float)
    if rng.random() < config.gray_prob:
        ret = ret * rng.uniform(*config.gray_scale) + rng.uniform(
            *config.gray_shift
        )
    if rng.random() < config.blur_prob:
        sigma = rng.uniform(*config.blur_sigma)
        if sigma > 0:
            ret = gaussian_filter(ret, sigma, mode="nearest")
    if rng.random() < config.occlusion_prob:
        fraction = rng.uniform(*config.occlusion_fraction)
        height, width = ret.shape
        side_y = min(int(round(height * np.sqrt(fraction))), height)
        side_x = min(int(round(width * np.sqrt(fraction))), width)
        if side_x and side_y:
            top = rng.integers(0, height - side_y + 1)
            left = rng.integers(0, width - side_x + 1)
            fill = config.occlusion_fill
            if fill is None:
                fill = rng.random()
            ret[top : top + side_y, left : left + side_x] = fill
    return np.clip(ret, 0, 1)


def augment(
    patch: Patch, rng: np.random.Generator, config: AugmentConfig
) -> Patch:
    """Augment a patch

    See Also
    --------
    augment_pixels"""
    return Patch(
        augment_pixels(patch.pixels, rng, config),
        patch.t,
        patch.normal_angle,
        patch.center,
        patch.source,
    )


def make_training_patch(
    image: FaceImage,
    anchor,
    normal_angle: float,
    t: float,
    spec: PatchSpec,
    rng: np.random.Generator,
    augment_config: Optional[AugmentConfig] = None,
    normalize: bool = True,
) -> Tuple[Patch, OffsetSample]:
    """Create one training sample from an anchor landmark

    The anchor is distorted by a random offset along its normal, the patch
    is cropped at the distorted center and augmented.

    Returns
    -------
    Patch
        The augmented patch
    OffsetSample
        The offset that has been applied"""
    sample = distort(
        anchor, normal_angle, generate_offset(rng, spec), image.scale
    )
    patch = extract_normalized_patch(
        image, sample.center, normal_angle, spec, normalize, t
    )
    if augment_config is not None:
        patch = augment(patch, rng, augment_config)
    return patch, sample
