"""Contour geometry of psy-enrich.

This module defines the contour schemes (which anchor landmarks form which
facial component) and the parametric curves that are fitted through the
anchors of each component. Every curve is parameterized such that the
``i``-th anchor of a component sits at ``u = i``.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from psyplot.docstring import docstrings
from scipy.interpolate import make_interp_spline
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from psy_enrich.errors import (
    ConfigurationError,
    ContractViolation,
    CurveDomainError,
    DegenerateGeometryError,
    SchemeValidationError,
)

logger = logging.getLogger(__name__)

#: tolerance for parameters slightly outside the domain of an open curve
DOMAIN_TOL = 1e-9

#: tangents with a norm below this value are considered degenerate
TANGENT_TOL = 1e-12


@dataclass(frozen=True)
class ComponentSpec:
    """The layout of one facial component within a landmark scheme

    Parameters
    ----------
    name: str
        The name of the component (e.g. ``'eye right'``)
    start: int
        The index of the first anchor of the component
    stop: int
        The index of the last anchor of the component (inclusive)
    closed: bool
        Whether the component is a closed loop (eyes, lips)
    isolated: bool
        Whether the component is a single point without a contour (pupils)
    fit_kind: {'bspline', 'line'}
        The curve that is fitted through the anchors
    degree: int
        The degree of the b-spline"""

    name: str
    start: int
    stop: int
    closed: bool = False
    isolated: bool = False
    fit_kind: str = "bspline"
    degree: int = 3

    def __post_init__(self):
        if self.stop < self.start:
            raise SchemeValidationError(
                "Component %s has an empty anchor range %i-%i"
                % (self.name, self.start, self.stop)
            )
        if self.closed and self.isolated:
            raise SchemeValidationError(
                "Component %s cannot be closed and isolated" % self.name
            )
        if self.isolated and self.n_anchors != 1:
            raise SchemeValidationError(
                "Isolated component %s must have exactly one anchor, not %i"
                % (self.name, self.n_anchors)
            )
        if not self.isolated and self.n_anchors < 2:
            raise SchemeValidationError(
                "Component %s needs at least two anchors" % self.name
            )
        if self.fit_kind not in ("bspline", "line"):
            raise SchemeValidationError(
                "Unknown fit kind %r of component %s"
                % (self.fit_kind, self.name)
            )
        if self.degree < 1:
            raise SchemeValidationError(
                "Degree of component %s must be positive" % self.name
            )
        if (
            self.fit_kind == "bspline"
            and not self.isolated
            and self.degree >= self.n_anchors
        ):
            raise SchemeValidationError(
                "Degree %i of component %s requires more than %i anchors"
                % (self.degree, self.name, self.n_anchors)
            )

    @property
    def n_anchors(self) -> int:
        """The number of anchor landmarks of this component"""
        return self.stop - self.start + 1

    @property
    def indices(self) -> np.ndarray:
        """The anchor indices of this component"""
        return np.arange(self.start, self.stop + 1)

    def enriched_count(self, density: int) -> int:
        """The number of points of this component after enrichment"""
        if self.isolated:
            return 1
        if self.closed:
            return self.n_anchors * density
        return (self.n_anchors - 1) * density + 1


@dataclass(frozen=True)
class ContourScheme:
    """The declarative layout of a landmark set

    Parameters
    ----------
    scheme_id: str
        The name of the scheme, e.g. ``'300w-68'``
    components: list of ComponentSpec
        The components in the order of the enriched landmarks
    outer_eye_corners: tuple of int
        The anchor indices of the outer eye corners (inter-ocular distance)
    inner_eye_corners: tuple of int
        The anchor indices of the inner eye corners (unit length of the
        morphometric measures)"""

    scheme_id: str
    components: Tuple[ComponentSpec, ...]
    outer_eye_corners: Optional[Tuple[int, int]] = None
    inner_eye_corners: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise SchemeValidationError(
                "Scheme %s has no components" % self.scheme_id
            )
        names = [comp.name for comp in self.components]
        if len(set(names)) != len(names):
            raise SchemeValidationError(
                "Duplicate component names in scheme %s" % self.scheme_id
            )
        covered = np.zeros(self.n_total, dtype=int)
        for comp in self.components:
            if comp.start < 0:
                raise SchemeValidationError(
                    "Negative anchor index in component %s" % comp.name
                )
            covered[comp.start : comp.stop + 1] += 1
        if (covered > 1).any():
            raise SchemeValidationError(
                "Overlapping component ranges in scheme %s at anchors %s"
                % (self.scheme_id, np.where(covered > 1)[0].tolist())
            )
        if (covered == 0).any():
            raise SchemeValidationError(
                "Anchors %s are not covered by any component of scheme %s"
                % (np.where(covered == 0)[0].tolist(), self.scheme_id)
            )
        for attr in ["outer_eye_corners", "inner_eye_corners"]:
            corners = getattr(self, attr)
            if corners is None:
                continue
            corners = tuple(int(i) for i in corners)
            if len(corners) != 2 or not all(
                0 <= i < self.n_total for i in corners
            ):
                raise SchemeValidationError(
                    "Invalid %s %s for scheme %s"
                    % (attr, corners, self.scheme_id)
                )
            object.__setattr__(self, attr, corners)

    @property
    def n_total(self) -> int:
        """The number of anchor landmarks"""
        return max(comp.stop for comp in self.components) + 1

    def component(self, name: str) -> ComponentSpec:
        """Get a component by its name"""
        for comp in self.components:
            if comp.name == name:
                return comp
        raise KeyError(
            "Scheme %s has no component %r" % (self.scheme_id, name)
        )

    def component_of(self, index: int) -> ComponentSpec:
        """Get the component that contains the anchor `index`"""
        for comp in self.components:
            if comp.start <= index <= comp.stop:
                return comp
        raise KeyError(
            "Anchor %i is not part of scheme %s" % (index, self.scheme_id)
        )

    def enriched_ranges(self, density: int) -> Dict[str, Tuple[int, int]]:
        """The inclusive index ranges of the components after enrichment"""
        ret = {}
        start = 0
        for comp in self.components:
            n = comp.enriched_count(density)
            ret[comp.name] = (start, start + n - 1)
            start += n
        return ret


class BaseCurve(ABC):
    """Abstract base class for an evaluable 2D contour

    Subclasses implement :meth:`_eval` and :meth:`_derivative` for
    parameters within :attr:`domain`. Closed curves are periodic over their
    domain."""

    #: Whether the curve is a closed loop
    closed: bool = False

    @property
    @abstractmethod
    def domain(self) -> Tuple[float, float]:
        """The interval ``(u_min, u_max)`` of valid parameters"""

    @abstractmethod
    def _eval(self, u: np.ndarray) -> np.ndarray:
        """Evaluate the curve at the parameters `u` within the domain"""

    @abstractmethod
    def _derivative(self, u: np.ndarray) -> np.ndarray:
        """Evaluate the first derivative at the parameters `u`"""

    def check_domain(self, u) -> np.ndarray:
        """Validate the curve parameters

        Closed curves wrap `u` into their domain, open curves raise a
        :class:`~psy_enrich.errors.CurveDomainError` for parameters outside
        of it."""
        u = np.asarray(u, dtype=float)
        if not np.isfinite(u).all():
            raise CurveDomainError("Curve parameters must be finite")
        umin, umax = self.domain
        if self.closed:
            return umin + np.mod(u - umin, umax - umin)
        if (u < umin - DOMAIN_TOL).any() or (u > umax + DOMAIN_TOL).any():
            raise CurveDomainError(
                "Parameter %s outside the domain [%s, %s] of an open curve"
                % (u.min() if u.min() < umin else u.max(), umin, umax)
            )
        return np.clip(u, umin, umax)

    def eval(self, u) -> np.ndarray:
        """Evaluate the curve

        Parameters
        ----------
        u: float or np.ndarray
            The curve parameter(s)

        Returns
        -------
        np.ndarray
            The point of shape ``(2, )`` for scalar `u`, else of shape
            ``(N, 2)``"""
        u = self.check_domain(u)
        return self._eval(u)

    def derivative(self, u) -> np.ndarray:
        """The tangent vector(s) of the curve at `u`

        Raises
        ------
        psy_enrich.errors.DegenerateGeometryError
            If the tangent vanishes"""
        u = self.check_domain(u)
        tangent = self._derivative(u)
        norm = np.linalg.norm(tangent, axis=-1)
        if not (norm >= TANGENT_TOL).all():
            raise DegenerateGeometryError(
                "Zero-length tangent at u=%s" % (np.ravel(u)[np.argmin(norm)],)
            )
        return tangent

    @docstrings.get_sections(base="BaseCurve.unit_normal")
    def unit_normal(self, u, orientation_hint) -> np.ndarray:
        """The unit normal of the curve

        The normal is the tangent rotated by 90 degrees. Its sign is chosen
        such that it points away from the `orientation_hint`.

        Parameters
        ----------
        u: float or np.ndarray
            The curve parameter(s)
        orientation_hint: np.ndarray
            The reference point of shape ``(2, )`` (usually the component or
            face centroid)

        Returns
        -------
        np.ndarray
            The unit normal(s) with the same shape as :meth:`eval`"""
        tangent = self.derivative(u)
        normal = np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)
        normal = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
        away = self.eval(u) - np.asarray(orientation_hint, dtype=float)
        sign = np.where((normal * away).sum(axis=-1) < 0, -1.0, 1.0)
        return normal * sign[..., np.newaxis]

    @docstrings.dedent
    def normal_angle(self, u, orientation_hint):
        """The angle of the unit normal in radians

        Parameters
        ----------
        %(BaseCurve.unit_normal.parameters)s

        Returns
        -------
        float or np.ndarray
            The angle ``atan2(n_y, n_x)`` in image coordinates"""
        normal = self.unit_normal(u, orientation_hint)
        return np.arctan2(normal[..., 1], normal[..., 0])

    def max_speed(self, per_unit: int = 32) -> float:
        """Estimate the maximum of ``|C'(u)|`` over the domain"""
        umin, umax = self.domain
        n = max(int(np.ceil((umax - umin) * per_unit)), 2) + 1
        u = np.linspace(umin, umax, n)
        # adjacent chords are a lower bound, tangents catch the rest
        pts = self._eval(u)
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=-1) / np.diff(u)
        speeds = np.linalg.norm(self._derivative(u), axis=-1)
        return float(max(chords.max(), speeds.max()))

    def sample(self, step: float = 0.25) -> Tuple[np.ndarray, np.ndarray]:
        """Sample the curve densely

        Parameters
        ----------
        step: float
            The maximum arc length between two consecutive samples

        Returns
        -------
        np.ndarray
            The parameters of the samples
        np.ndarray
            The points of shape ``(N, 2)``"""
        if step <= 0:
            raise ConfigurationError("Sampling step must be positive")
        cache = self.__dict__.setdefault("_sample_cache", {})
        if step not in cache:
            umin, umax = self.domain
            length = (umax - umin) * self.max_speed() * 1.05
            n = max(int(np.ceil(length / step)), 1) + 1
            u = np.linspace(umin, umax, n)
            cache[step] = (u, self._eval(u))
        return cache[step]

    def _kdtree(self, step: float) -> cKDTree:
        cache = self.__dict__.setdefault("_tree_cache", {})
        if step not in cache:
            cache[step] = cKDTree(self.sample(step)[1])
        return cache[step]

    def closest(self, points, step: float = 0.25, refine: bool = True):
        """Find the closest curve points

        Parameters
        ----------
        points: np.ndarray
            The query point(s) of shape ``(2, )`` or ``(N, 2)``
        step: float
            The maximum arc step of the dense sampling
        refine: bool
            If True, refine the closest sample by a bounded scalar
            minimization between its neighbours

        Returns
        -------
        np.ndarray
            The curve parameters of the closest points
        np.ndarray
            The distances"""
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        points = np.atleast_2d(points)
        u, _ = self.sample(step)
        dist, idx = self._kdtree(step).query(points)
        params = u[idx]
        if refine:
            du = u[1] - u[0] if len(u) > 1 else 0.0
            umin, umax = self.domain
            for k, (p, u0, d0) in enumerate(zip(points, params, dist)):
                lo, hi = u0 - du, u0 + du
                if not self.closed:
                    lo, hi = max(lo, umin), min(hi, umax)
                if hi <= lo:
                    continue
                res = minimize_scalar(
                    lambda x: np.sum((self.eval(x) - p) ** 2),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-10},
                )
                d1 = np.sqrt(res.fun)
                if d1 < d0:
                    dist[k] = d1
                    params[k] = float(self.check_domain(res.x))
        if single:
            return params[0], dist[0]
        return params, dist

    def distance(self, points, step: float = 0.25):
        """The point-to-curve distance

        Parameters
        ----------
        points: np.ndarray
            The query point(s) of shape ``(2, )`` or ``(N, 2)``
        step: float
            The maximum arc step of the dense sampling

        Returns
        -------
        float or np.ndarray
            The euclidean distance to the closest curve point"""
        return self.closest(points, step)[1]


class Curve(BaseCurve):
    """A curve fitted through anchor landmarks

    Use :func:`fit_curve` to create an instance.

    Parameters
    ----------
    kind: {'polyline', 'bspline'}
        The type of the curve
    anchors: np.ndarray
        The anchors of shape ``(n, 2)``, located at ``u = 0, ..., n - 1``
    closed: bool
        Whether the curve is periodic
    degree: int
        The degree of the b-spline (1 for polylines)"""

    def __init__(
        self, kind: str, anchors: np.ndarray, closed: bool, degree: int = 3
    ):
        self.kind = kind
        self.anchors = np.array(anchors, dtype=float)
        self.anchors.flags.writeable = False
        self.closed = closed
        n = len(self.anchors)
        if kind == "polyline":
            self.degree = 1
            vertices = self.anchors
            if closed:
                vertices = np.vstack([vertices, vertices[:1]])
            self._vertices = vertices
            self._segments = np.diff(vertices, axis=0)
            self._spline = None
        elif kind == "bspline":
            self.degree = degree
            if closed:
                self._spline = make_interp_spline(
                    np.arange(n + 1),
                    np.vstack([self.anchors, self.anchors[:1]]),
                    k=degree,
                    bc_type="periodic",
                )
            else:
                self._spline = make_interp_spline(
                    np.arange(n), self.anchors, k=degree
                )
            self._dspline = self._spline.derivative(1)
        else:
            raise ConfigurationError("Unknown curve kind %r" % (kind,))

    def __repr__(self):
        return "%s(kind=%r, n_anchors=%i, closed=%s)" % (
            self.__class__.__name__,
            self.kind,
            len(self.anchors),
            self.closed,
        )

    @property
    def domain(self) -> Tuple[float, float]:
        n = len(self.anchors)
        return (0.0, float(n if self.closed else n - 1))

    @property
    def control_points(self) -> np.ndarray:
        """The control points ``q_i`` of the curve"""
        if self._spline is None:
            return self.anchors
        return self._spline.c

    def _segment_index(self, u):
        n_seg = len(self._segments)
        i = np.clip(np.floor(u).astype(int), 0, n_seg - 1)
        return i, np.asarray(u - i)

    def _eval(self, u):
        if self._spline is not None:
            return self._spline(u)
        i, frac = self._segment_index(u)
        return self._vertices[i] + frac[..., np.newaxis] * self._segments[i]

    def _derivative(self, u):
        if self._spline is not None:
            return self._dspline(u)
        segs = self._segments
        n_seg = len(segs)
        i, frac = self._segment_index(u)
        ret = segs[i].copy()
        # vertices average the directions of both adjacent segments
        on_vertex = np.atleast_1d(frac == 0)
        k = np.atleast_1d(i)[on_vertex]
        if self.closed:
            prev = segs[(k - 1) % n_seg]
            has_prev = np.ones_like(k, dtype=bool)
        else:
            prev = segs[np.maximum(k - 1, 0)]
            has_prev = k > 0
        nxt = segs[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            lp = np.linalg.norm(prev, axis=-1, keepdims=True)
            ln = np.linalg.norm(nxt, axis=-1, keepdims=True)
            avg = 0.5 * (prev / lp + nxt / ln) * 0.5 * (lp + ln)
        avg = np.where(has_prev[:, np.newaxis], avg, nxt)
        ret = np.atleast_2d(ret)
        ret[on_vertex] = avg
        return ret.reshape(np.shape(u) + (2,))


def fit_curve(anchors, spec: ComponentSpec, fit_kind=None) -> Curve:
    """Fit an interpolating curve through the anchors of a component

    Parameters
    ----------
    anchors: np.ndarray
        The ordered anchors of shape ``(n, 2)``
    spec: ComponentSpec
        The specification of the component
    fit_kind: {None, 'line', 'bspline'}
        Override the fit kind of `spec`

    Returns
    -------
    Curve
        A polyline (``fit_kind='line'``) or an interpolating b-spline
        through the anchors

    Raises
    ------
    psy_enrich.errors.ConfigurationError
        If there are too few anchors
    psy_enrich.errors.DegenerateGeometryError
        If all anchors are identical"""
    anchors = np.asarray(anchors, dtype=float)
    if anchors.ndim != 2 or anchors.shape[1] != 2:
        raise ContractViolation(
            "Anchors must have shape (n, 2), not %s" % (anchors.shape,)
        )
    if not np.isfinite(anchors).all():
        raise ContractViolation("Anchors of %s are not finite" % spec.name)
    fit_kind = fit_kind or spec.fit_kind
    n = len(anchors)
    if n < 2:
        raise ConfigurationError(
            "Component %s needs at least 2 anchors, got %i" % (spec.name, n)
        )
    if fit_kind == "bspline" and n <= spec.degree:
        raise ConfigurationError(
            "A b-spline of degree %i through %s needs at least %i anchors, "
            "got %i" % (spec.degree, spec.name, spec.degree + 1, n)
        )
    if np.ptp(anchors, axis=0).max() == 0:
        raise DegenerateGeometryError(
            "All anchors of component %s are identical" % spec.name
        )
    logger.debug(
        "Fitting %s with %i anchors (%s)", spec.name, n, fit_kind
    )
    kind = "polyline" if fit_kind == "line" else fit_kind
    return Curve(kind, anchors, spec.closed, spec.degree)


@dataclass
class FittedComponent:
    """A component of a scheme with its fitted curve"""

    #: The specification of the component
    spec: ComponentSpec

    #: The fitted curve (None for isolated components)
    curve: Optional[BaseCurve]

    #: The reference point the normals point away from
    hint: np.ndarray = field(repr=False)


def fit_components(
    anchors, scheme: ContourScheme, fit_kind: Optional[str] = None
) -> List[FittedComponent]:
    """Fit the curves of all components of a scheme

    Normals of closed components point away from the component centroid,
    normals of open components away from the centroid of the whole face.

    Parameters
    ----------
    anchors: np.ndarray
        All anchor landmarks of shape ``(scheme.n_total, 2)``
    scheme: ContourScheme
        The scheme of the landmarks
    fit_kind: {None, 'line', 'bspline'}
        Override the fit kind of every component

    Returns
    -------
    list of FittedComponent
        One item per component in the order of `scheme`"""
    anchors = np.asarray(anchors, dtype=float)
    if anchors.shape != (scheme.n_total, 2):
        raise ContractViolation(
            "Scheme %s requires %i anchors, got an array of shape %s"
            % (scheme.scheme_id, scheme.n_total, anchors.shape)
        )
    face_centroid = anchors.mean(axis=0)
    ret = []
    for comp in scheme.components:
        pts = anchors[comp.start : comp.stop + 1]
        if comp.isolated:
            ret.append(FittedComponent(comp, None, pts[0]))
            continue
        curve = fit_curve(pts, comp, fit_kind)
        hint = pts.mean(axis=0) if comp.closed else face_centroid
        ret.append(FittedComponent(comp, curve, hint))
    return ret


def polygon_area(points: Sequence) -> float:
    """The signed area of a polygon by the shoelace formula"""
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
