"""Landmark initializing for psy-enrich.

This module turns sparse anchor landmarks into dense landmarks. For every
component of a :class:`~psy_enrich.contour_geometry.ContourScheme`, a curve
is fitted through the anchors and ``D - 1`` new points are sampled between
two adjacent anchors. Every point carries its soft index ``t = i + j / D``
and the angle of the contour normal.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from psy_enrich.contour_geometry import (
    BaseCurve,
    ContourScheme,
    fit_components,
)
from psy_enrich.errors import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)


#: number of sub-steps per anchor segment for the arc length inversion
ARC_SUBSTEPS = 256


def validate_density(density) -> int:
    """Validate the enriching density ``D``"""
    if isinstance(density, (bool, np.bool_)) or int(density) != density:
        raise ConfigurationError(
            "The density must be an integer, not %r" % (density,)
        )
    if density < 1:
        raise ConfigurationError(
            "The density must be at least 1, not %s" % (density,)
        )
    return int(density)


def soft_index(i: int, j: int, density: int) -> float:
    """The soft index of the ``j``-th point after anchor ``i``

    Parameters
    ----------
    i: int
        The index of the anchor
    j: int
        The position after the anchor, ``0 <= j < density``
    density: int
        The enriching density ``D``

    Returns
    -------
    float
        ``i + j / D``"""
    if not 0 <= j < density:
        raise ContractViolation(
            "Expected 0 <= j < %i, got j=%s" % (density, j)
        )
    return i + j / density


def enriched_count(scheme: ContourScheme, density: int) -> int:
    """The number of landmarks after enriching `scheme` with `density`"""
    density = validate_density(density)
    return sum(comp.enriched_count(density) for comp in scheme.components)


def anchor_successors(scheme: ContourScheme) -> List[int]:
    """The anchor that follows each anchor of `scheme` along its contour

    Soft indices between the last and the first anchor of a closed contour
    blend these two anchors. The last anchor of an open contour and
    isolated anchors are their own successors."""
    ret = list(range(scheme.n_total))
    for comp in scheme.components:
        ret[comp.start : comp.stop] = range(comp.start + 1, comp.stop + 1)
        if comp.closed:
            ret[comp.stop] = comp.start
    return ret


@dataclass
class LandmarkSet:
    """Sparse anchor landmarks of one face

    Parameters
    ----------
    scheme_id: str
        The id of the contour scheme
    points: np.ndarray
        The anchors of shape ``(n_total, 2)`` in image pixels"""

    scheme_id: str
    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ContractViolation(
                "Landmarks must have shape (n, 2), not %s"
                % (self.points.shape,)
            )
        if not np.isfinite(self.points).all():
            raise ContractViolation("Landmark coordinates must be finite")

    def __len__(self):
        return len(self.points)


@dataclass
class EnrichedLandmarkSet:
    """Dense landmarks with their provenance

    The points of every component are stored contiguously in the order of
    the scheme. Within a component, every anchor is followed by the points
    that are interpolated between this anchor and the next one."""

    #: The scheme of the anchor landmarks
    scheme: ContourScheme

    #: The enriching density ``D``
    density: int

    #: The points of shape ``(N, 2)``
    points: np.ndarray

    #: The soft index ``i + j / D`` of every point
    t: np.ndarray

    #: The angle of the normal of every point (NaN for isolated points)
    normal_angle: np.ndarray

    #: The index of the component of every point within :attr:`scheme`
    component: np.ndarray

    #: The global index ``i`` of the preceding anchor
    anchor_index: np.ndarray

    #: The position ``j`` after the anchor (0 for anchors)
    sub_index: np.ndarray

    #: The confidence of every point (None if not refined)
    confidence: Optional[np.ndarray] = None

    #: Free metadata (e.g. the run label)
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        n = len(self.points)
        for attr in [
            "t",
            "normal_angle",
            "component",
            "anchor_index",
            "sub_index",
        ] + (["confidence"] if self.confidence is not None else []):
            arr = np.asarray(getattr(self, attr))
            if arr.shape != (n,):
                raise ContractViolation(
                    "%s must have shape (%i, ), not %s" % (attr, n, arr.shape)
                )
            setattr(self, attr, arr)

    def __len__(self):
        return len(self.points)

    @property
    def scheme_id(self) -> str:
        return self.scheme.scheme_id

    @property
    def anchor_mask(self) -> np.ndarray:
        """Boolean mask of the anchor points (``j = 0``)"""
        return self.sub_index == 0

    @property
    def kind(self) -> np.ndarray:
        """``'anchor'`` or ``'interpolated'`` for every point"""
        return np.where(self.anchor_mask, "anchor", "interpolated")

    @property
    def isolated_mask(self) -> np.ndarray:
        """Boolean mask of the points of isolated components"""
        isolated = np.array([c.isolated for c in self.scheme.components])
        return isolated[self.component]

    @property
    def normals(self) -> np.ndarray:
        """The unit normals of shape ``(N, 2)``"""
        return np.stack(
            [np.cos(self.normal_angle), np.sin(self.normal_angle)], axis=-1
        )

    @property
    def component_slices(self) -> Dict[str, slice]:
        """The slice of the points of each component"""
        ret = {}
        for k, comp in enumerate(self.scheme.components):
            idx = np.where(self.component == k)[0]
            ret[comp.name] = slice(idx[0], idx[-1] + 1)
        return ret

    @property
    def anchors(self) -> np.ndarray:
        """The anchor points ordered by their index"""
        mask = self.anchor_mask
        order = np.argsort(self.anchor_index[mask], kind="stable")
        return self.points[mask][order]

    def anchor_position(self, i: int) -> int:
        """The position of anchor `i` in :attr:`points`"""
        idx = np.where(self.anchor_mask & (self.anchor_index == i))[0]
        if not len(idx):
            raise KeyError("Anchor %i not found" % i)
        return int(idx[0])

    def with_points(
        self, points: np.ndarray, confidence: Optional[np.ndarray] = None
    ) -> EnrichedLandmarkSet:
        """Create a copy with new point positions

        Parameters
        ----------
        points: np.ndarray
            The new points with the shape of :attr:`points`
        confidence: np.ndarray
            The confidence of every point"""
        points = np.asarray(points, dtype=float)
        if points.shape != self.points.shape:
            raise ContractViolation(
                "Expected points of shape %s, not %s"
                % (self.points.shape, points.shape)
            )
        return replace(
            self,
            points=points,
            confidence=confidence,
            meta=dict(self.meta),
        )

    def to_frame(self) -> pd.DataFrame:
        """The points as a :class:`pandas.DataFrame`"""
        names = np.array([c.name for c in self.scheme.components])
        return pd.DataFrame(
            {
                "x": self.points[:, 0],
                "y": self.points[:, 1],
                "t": self.t,
                "kind": self.kind,
                "component": names[self.component],
                "confidence": (
                    self.confidence
                    if self.confidence is not None
                    else np.full(len(self), np.nan)
                ),
            }
        )


def _anchor_array(anchors, scheme: ContourScheme) -> np.ndarray:
    if isinstance(anchors, LandmarkSet):
        if anchors.scheme_id != scheme.scheme_id:
            raise ContractViolation(
                "Landmarks of scheme %s cannot be used with scheme %s"
                % (anchors.scheme_id, scheme.scheme_id)
            )
        anchors = anchors.points
    else:
        anchors = LandmarkSet(scheme.scheme_id, anchors).points
    if len(anchors) != scheme.n_total:
        raise ContractViolation(
            "Scheme %s requires %i landmarks, got %i"
            % (scheme.scheme_id, scheme.n_total, len(anchors))
        )
    return anchors


def _assemble(
    scheme: ContourScheme,
    density: int,
    anchors: np.ndarray,
    curves: Sequence[Optional[BaseCurve]],
    hints: Sequence[np.ndarray],
    params_of_segment,
) -> EnrichedLandmarkSet:
    points: List[np.ndarray] = []
    t: List[np.ndarray] = []
    angles: List[np.ndarray] = []
    component: List[np.ndarray] = []
    anchor_index: List[np.ndarray] = []
    sub_index: List[np.ndarray] = []
    items = zip(scheme.components, curves, hints)
    for ic, (comp, curve, hint) in enumerate(items):
        if comp.isolated:
            points.append(anchors[comp.start : comp.start + 1])
            t.append(np.array([float(comp.start)]))
            angles.append(np.array([np.nan]))
            i_local = np.zeros(1, dtype=int)
            j = np.zeros(1, dtype=int)
        else:
            n_seg = comp.n_anchors if comp.closed else comp.n_anchors - 1
            i_local = np.repeat(np.arange(comp.n_anchors), density)
            j = np.tile(np.arange(density), comp.n_anchors)
            if not comp.closed:
                # the last anchor of an open contour has no successor
                i_local = i_local[: n_seg * density + 1]
                j = j[: n_seg * density + 1]
            u = params_of_segment(curve, i_local, j)
            pts = curve.eval(u)
            # anchors are copied, not evaluated
            pts[j == 0] = anchors[comp.start + i_local[j == 0]]
            points.append(pts)
            t.append(comp.start + i_local + j / density)
            angles.append(curve.normal_angle(u, hint))
        component.append(np.full(len(j), ic))
        anchor_index.append(comp.start + i_local)
        sub_index.append(j)
    return EnrichedLandmarkSet(
        scheme=scheme,
        density=density,
        points=np.concatenate(points),
        t=np.concatenate(t),
        normal_angle=np.concatenate(angles),
        component=np.concatenate(component),
        anchor_index=np.concatenate(anchor_index),
        sub_index=np.concatenate(sub_index),
    )


def _uniform_params(density):
    def params(curve, i, j):
        # linear interpolation between the anchor parameters u_i = i
        return ((density - j) / density) * i + (j / density) * (i + 1)

    return params


def initialize_enriched(
    anchors: Union[LandmarkSet, np.ndarray],
    scheme: ContourScheme,
    density: int,
    fit_kind: Optional[str] = None,
) -> EnrichedLandmarkSet:
    """Enrich sparse anchors into dense landmarks

    Parameters
    ----------
    anchors: LandmarkSet or np.ndarray
        The anchor landmarks of shape ``(scheme.n_total, 2)``
    scheme: ContourScheme
        The scheme of the landmarks
    density: int
        The enriching density ``D >= 1``
    fit_kind: {None, 'line', 'bspline'}
        Override the fit kind of all components of `scheme`

    Returns
    -------
    EnrichedLandmarkSet
        The initialized landmarks with
        :func:`enriched_count(scheme, density) <enriched_count>` points"""
    density = validate_density(density)
    anchors = _anchor_array(anchors, scheme)
    fitted = fit_components(anchors, scheme, fit_kind)
    logger.debug(
        "Enriching %i anchors of scheme %s with density %i",
        len(anchors),
        scheme.scheme_id,
        density,
    )
    return _assemble(
        scheme,
        density,
        anchors,
        [fc.curve for fc in fitted],
        [fc.hint for fc in fitted],
        _uniform_params(density),
    )


def _arc_length_params(density):
    def params(curve, i, j):
        ret = i.astype(float)
        for k in np.unique(i[j > 0]):
            u_fine = np.linspace(k, k + 1, ARC_SUBSTEPS + 1)
            pts = curve.eval(u_fine)
            cum = np.concatenate(
                [[0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))]
            )
            mask = (i == k) & (j > 0)
            ret[mask] = np.interp(j[mask] / density * cum[-1], cum, u_fine)
        return ret

    return params


def enrich_dense_truth(
    anchors,
    curves: Sequence[Optional[BaseCurve]],
    scheme: ContourScheme,
    density: int,
    hints: Optional[Sequence[np.ndarray]] = None,
) -> EnrichedLandmarkSet:
    """Dense ground truth on known contours

    Other than :func:`initialize_enriched`, the new points are sampled
    uniformly by arc length between two adjacent anchors on the given
    curves. This is how dense benchmark annotations are built from a
    contour that is known in full.

    Parameters
    ----------
    anchors: np.ndarray
        The anchor landmarks of shape ``(scheme.n_total, 2)``. They must lie
        on `curves` at the integer parameters
    curves: list of BaseCurve
        One curve per component of `scheme` (None for isolated components)
    scheme: ContourScheme
        The scheme of the landmarks
    density: int
        The enriching density ``D >= 1``
    hints: list of np.ndarray
        The orientation hints of the normals. If None, the component
        centroid (closed) or face centroid (open) is used

    Returns
    -------
    EnrichedLandmarkSet
        The dense ground truth"""
    density = validate_density(density)
    anchors = _anchor_array(anchors, scheme)
    if len(curves) != len(scheme.components):
        raise ContractViolation(
            "Expected %i curves, got %i"
            % (len(scheme.components), len(curves))
        )
    if hints is None:
        centroid = anchors.mean(axis=0)
        hints = [
            anchors[c.start : c.stop + 1].mean(axis=0)
            if c.closed
            else centroid
            for c in scheme.components
        ]
    return _assemble(
        scheme, density, anchors, curves, hints, _arc_length_params(density)
    )
