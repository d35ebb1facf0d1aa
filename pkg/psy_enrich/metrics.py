"""Evaluation metrics of psy-enrich.

Point-based errors (:func:`mean_error`, :func:`nme_point`), the
point-to-curve error :func:`nme_edge` and the morphometric measures that
are derived from facial landmarks.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Union
from warnings import warn

import numpy as np
import pandas as pd
from shapely.geometry import LinearRing

from psy_enrich.contour_geometry import (
    BaseCurve,
    ContourScheme,
    fit_curve,
    polygon_area,
)
from psy_enrich.enrichment import EnrichedLandmarkSet
from psy_enrich.errors import (
    ConfigurationError,
    ContractViolation,
    DegenerateAnnotationError,
    MetricWarning,
    MorphometryWarning,
)
from psy_enrich.patch_pipeline import FaceImage, PatchSpec, extract_patches
from psy_enrich.quality import raw_scores
from psy_enrich.rcsetup import rcParams

logger = logging.getLogger(__name__)

#: the columns of the per component evaluation table
REPORT_COLUMNS = ["ME", "NME_point", "NME_edge", "N_P"]


def _points(points) -> np.ndarray:
    if isinstance(points, EnrichedLandmarkSet):
        return points.points
    return np.asarray(points, dtype=float)


def _check_shapes(P, P_hat):
    P, P_hat = _points(P), _points(P_hat)
    if P.shape != P_hat.shape or P.ndim != 2 or P.shape[-1] != 2:
        raise ContractViolation(
            "Landmarks must have equal shapes (n, 2), got %s and %s"
            % (P.shape, P_hat.shape)
        )
    return P, P_hat


def point_errors(P, P_hat) -> np.ndarray:
    """The euclidean distance of every predicted point to its truth"""
    P, P_hat = _check_shapes(P, P_hat)
    return np.linalg.norm(P - P_hat, axis=-1)


def mean_error(P, P_hat) -> float:
    """The mean euclidean distance between predictions and truth

    Parameters
    ----------
    P: np.ndarray
        The predicted points of shape ``(n, 2)``
    P_hat: np.ndarray
        The ground truth of the same shape

    Returns
    -------
    float
        The mean error in pixels"""
    errors = point_errors(P, P_hat)
    if not len(errors):
        raise ContractViolation("Cannot compute the error of no points")
    return float(errors.mean())


def _check_distance(d: float) -> float:
    if not np.isfinite(d) or d <= 0:
        raise DegenerateAnnotationError(
            "The normalization distance must be positive, not %s" % (d,)
        )
    return float(d)


def nme_point(P, P_hat, d: float) -> float:
    """The mean error normalized by the distance `d`"""
    d = _check_distance(d)
    return mean_error(P, P_hat) / d


def inter_ocular_distance(
    landmarks, scheme: Optional[ContourScheme] = None
) -> float:
    """The distance between the outer eye corners

    Parameters
    ----------
    landmarks: np.ndarray or EnrichedLandmarkSet
        The anchors of shape ``(scheme.n_total, 2)`` or an enriched set,
        whose anchors are looked up through their provenance
    scheme: ContourScheme
        The scheme that defines the eye corners. Can be omitted for enriched
        sets

    Returns
    -------
    float
        The inter-ocular distance

    Raises
    ------
    psy_enrich.errors.DegenerateAnnotationError
        If the eye corners coincide"""
    if isinstance(landmarks, EnrichedLandmarkSet):
        scheme = landmarks.scheme
        anchors = landmarks.anchors
    else:
        anchors = np.asarray(landmarks, dtype=float)
    if scheme is None:
        raise ConfigurationError("A scheme is required for plain arrays")
    if scheme.outer_eye_corners is None:
        raise ConfigurationError(
            "Scheme %s does not define outer eye corners" % scheme.scheme_id
        )
    i, j = scheme.outer_eye_corners
    d = float(np.linalg.norm(anchors[i] - anchors[j]))
    if d == 0:
        raise DegenerateAnnotationError(
            "The outer eye corners %i and %i coincide" % (i, j)
        )
    return d


def edge_distances(
    P,
    P_hat,
    curves: Sequence[Optional[BaseCurve]],
    isolated=None,
    step: Optional[float] = None,
) -> np.ndarray:
    """The per point distances of the edge error

    Points with a curve contribute the distance to their curve, points
    without a curve contribute the point-to-point distance.

    The curve distance is capped at the distance to the ground truth point.
    If the ground truth lies on its curve, as for the curves of
    :func:`edge_curves`, the cap does not change the distance but makes it
    exactly zero for predictions on the ground truth points. For ground
    truth points off their curve, the cap bounds the edge error by the
    point error.

    Parameters
    ----------
    P: np.ndarray
        The predictions of shape ``(n, 2)``
    P_hat: np.ndarray
        The ground truth of shape ``(n, 2)``
    curves: list of BaseCurve
        The ground truth curve of every point (None for isolated points)
    isolated: np.ndarray
        Boolean mask of the isolated points. If given, a missing curve for
        a point that is not isolated raises a
        :class:`~psy_enrich.errors.ConfigurationError`
    step: float
        The maximum arc step of the dense curve sampling. If None, the
        ``eval.sample_step`` rcParam is used"""
    P, P_hat = _check_shapes(P, P_hat)
    if len(curves) != len(P):
        raise ContractViolation(
            "Got %i curves for %i points" % (len(curves), len(P))
        )
    if step is None:
        step = rcParams["eval.sample_step"]
    ret = np.linalg.norm(P - P_hat, axis=-1)
    groups: Dict[int, List[int]] = {}
    objects: Dict[int, BaseCurve] = {}
    for i, curve in enumerate(curves):
        if curve is None:
            if isolated is not None and not isolated[i]:
                raise ConfigurationError(
                    "Landmark %i is not isolated but has no curve" % i
                )
            continue
        groups.setdefault(id(curve), []).append(i)
        objects[id(curve)] = curve
    for key, idx in groups.items():
        dist = np.atleast_1d(objects[key].distance(P[idx], step))
        ret[idx] = np.minimum(ret[idx], dist)
    return ret


def nme_edge(
    P,
    P_hat,
    curves: Sequence[Optional[BaseCurve]],
    d: float,
    isolated=None,
    step: Optional[float] = None,
) -> float:
    """The mean point-to-curve error normalized by `d`

    See :func:`edge_distances` for the parameters. The point-to-curve
    distances are capped at the point-to-point distances, so
    ``nme_edge <= nme_point`` holds for any ground truth."""
    d = _check_distance(d)
    distances = edge_distances(P, P_hat, curves, isolated, step)
    if not len(distances):
        raise ContractViolation("Cannot compute the error of no points")
    return float(distances.mean()) / d


def edge_curves(
    truth: EnrichedLandmarkSet, fit_kind: Optional[str] = None
) -> List[Optional[BaseCurve]]:
    """Fit the ground truth edges through dense ground truth

    Every component that is not isolated gets one curve through all of its
    points.

    Returns
    -------
    list of BaseCurve
        The curve of every point (None for isolated points)"""
    ret: List[Optional[BaseCurve]] = [None] * len(truth)
    for name, sl in truth.component_slices.items():
        comp = truth.scheme.component(name)
        if comp.isolated:
            continue
        dense = replace(comp, start=0, stop=sl.stop - sl.start - 1)
        curve = fit_curve(truth.points[sl], dense, fit_kind)
        ret[sl] = [curve] * (sl.stop - sl.start)
    return ret


@dataclass
class EvalReport:
    """Evaluation results of one or more faces

    The :attr:`table` has one row per component plus a row ``'face'`` for
    the whole face, and the columns ``ME``, ``NME_point``, ``NME_edge``,
    ``N_P`` (and ``S`` for the mean confidence of refined predictions)."""

    #: The per component results
    table: pd.DataFrame

    #: The normalization distance
    d: float

    #: The number of evaluated faces
    n_samples: int = 1

    #: The morphometric measures with their MAPE (optional)
    morphometry: Optional[pd.DataFrame] = None

    #: Free metadata such as the run label
    meta: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        ret = {
            "d": self.d,
            "n_samples": self.n_samples,
            "components": {
                name: {
                    key: (None if pd.isnull(val) else float(val))
                    for key, val in row.items()
                }
                for name, row in self.table.iterrows()
            },
        }
        if self.morphometry is not None:
            ret["morphometry"] = {
                name: {
                    key: (None if pd.isnull(val) else float(val))
                    for key, val in row.items()
                }
                for name, row in self.morphometry.iterrows()
            }
        if self.meta:
            ret["meta"] = self.meta
        return ret

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def to_table(self) -> str:
        """A human readable table"""
        table = self.table.copy()
        for col in ["NME_point", "NME_edge"]:
            table[col] = table[col] * 100
        table = table.rename(
            columns={"NME_point": "NME_point [%]", "NME_edge": "NME_edge [%]"}
        )
        table["N_P"] = table["N_P"].astype(int)
        fmt = "{:.4f}".format
        lines = [table.to_string(float_format=fmt)]
        if self.morphometry is not None:
            lines.extend(["", self.morphometry.to_string(float_format=fmt)])
        return "\n".join(lines)

    @classmethod
    def combine(cls, reports: Sequence[EvalReport]) -> EvalReport:
        """Average several reports, weighted by the number of points"""
        if not len(reports):
            raise ContractViolation("Cannot combine zero reports")
        stacked = pd.concat(
            [r.table for r in reports], keys=range(len(reports))
        )
        weights = stacked["N_P"]
        grouped = stacked.drop(columns="N_P").mul(weights, axis=0)
        sums = grouped.groupby(level=1, sort=False).sum(min_count=1)
        n_p = weights.groupby(level=1, sort=False).sum()
        table = sums.div(n_p, axis=0)
        table["N_P"] = n_p
        table = table.loc[reports[0].table.index, reports[0].table.columns]
        morph = None
        if all(r.morphometry is not None for r in reports):
            morph = (
                pd.concat([r.morphometry for r in reports])
                .groupby(level=0, sort=False)
                .mean()
            )
        return cls(
            table,
            float(np.mean([r.d for r in reports])),
            sum(r.n_samples for r in reports),
            morph,
            dict(reports[0].meta),
        )


def evaluate(
    prediction: EnrichedLandmarkSet,
    truth: EnrichedLandmarkSet,
    step: Optional[float] = None,
    fit_kind: Optional[str] = None,
) -> EvalReport:
    """Evaluate dense predictions against dense ground truth

    Parameters
    ----------
    prediction: EnrichedLandmarkSet
        The predicted landmarks
    truth: EnrichedLandmarkSet
        The ground truth with the same layout
    step: float
        The maximum arc step for the point-to-curve distances
    fit_kind: {None, 'line', 'bspline'}
        The kind of the ground truth edges

    Returns
    -------
    EvalReport
        The errors per component and for the whole face"""
    if (
        prediction.scheme_id != truth.scheme_id
        or prediction.density != truth.density
        or len(prediction) != len(truth)
    ):
        raise ContractViolation(
            "Prediction (%s, D=%i, %i points) and truth (%s, D=%i, %i "
            "points) differ"
            % (
                prediction.scheme_id,
                prediction.density,
                len(prediction),
                truth.scheme_id,
                truth.density,
                len(truth),
            )
        )
    d = inter_ocular_distance(truth)
    point_err = point_errors(prediction, truth)
    edge_err = edge_distances(
        prediction.points,
        truth.points,
        edge_curves(truth, fit_kind),
        truth.isolated_mask,
        step,
    )
    rows = {}
    slices = dict(truth.component_slices)
    slices["face"] = slice(0, len(truth))
    for name, sl in slices.items():
        row = {
            "ME": point_err[sl].mean(),
            "NME_point": point_err[sl].mean() / d,
            "NME_edge": edge_err[sl].mean() / d,
            "N_P": sl.stop - sl.start,
        }
        if prediction.confidence is not None:
            conf = prediction.confidence[sl]
            row["S"] = (
                float(np.nanmean(conf)) if np.isfinite(conf).any() else np.nan
            )
        rows[name] = row
    table = pd.DataFrame.from_dict(rows, orient="index")
    table = table[[col for col in REPORT_COLUMNS + ["S"] if col in table]]
    return EvalReport(table, d, meta=dict(prediction.meta))


def component_scores(
    landmarks: EnrichedLandmarkSet,
    image: FaceImage,
    spec: Optional[PatchSpec] = None,
    epsilon: Optional[float] = None,
) -> pd.Series:
    """The average raw quality score of the patches of every component"""
    spec = PatchSpec.from_rcparams() if spec is None else spec
    active = ~landmarks.isolated_mask
    patches = extract_patches(
        image,
        landmarks.points[active],
        landmarks.normal_angle[active],
        spec,
    )
    scores = raw_scores(patches, epsilon)
    names = np.array([c.name for c in landmarks.scheme.components])
    return (
        pd.Series(scores, index=names[landmarks.component[active]])
        .groupby(level=0, sort=False)
        .mean()
        .rename("S")
    )


# -----------------------------------------------------------------------------
# -------------------------- morphometric measures ----------------------------
# -----------------------------------------------------------------------------


class _LandmarkView:
    """Uniform access to sparse and enriched landmarks"""

    def __init__(self, landmarks, scheme: Optional[ContourScheme]):
        if isinstance(landmarks, EnrichedLandmarkSet):
            self.scheme = landmarks.scheme
            self.points = landmarks.points
            self.slices = landmarks.component_slices
            self.position = landmarks.anchor_position
        else:
            if scheme is None:
                raise ConfigurationError(
                    "A scheme is required for plain arrays"
                )
            self.scheme = scheme
            self.points = np.asarray(landmarks, dtype=float)
            if len(self.points) != scheme.n_total:
                raise ContractViolation(
                    "Scheme %s requires %i landmarks, got %i"
                    % (scheme.scheme_id, scheme.n_total, len(self.points))
                )
            self.slices = {
                c.name: slice(c.start, c.stop + 1) for c in scheme.components
            }
            self.position = int

    def anchor(self, i: int) -> np.ndarray:
        return self.points[self.position(i)]

    def span(self, start: int, stop: int, direction: str = "forward"):
        """The points from anchor `start` to anchor `stop`"""
        comp = self.scheme.component_of(start)
        if self.scheme.component_of(stop) != comp:
            raise ConfigurationError(
                "Anchors %i and %i belong to different components"
                % (start, stop)
            )
        sl = self.slices[comp.name]
        n = sl.stop - sl.start
        first = self.position(start) - sl.start
        last = self.position(stop) - sl.start
        sign = 1 if direction == "forward" else -1
        count = (sign * (last - first)) % n if comp.closed else None
        if count is None:
            count = sign * (last - first)
            if count < 0:
                raise ConfigurationError(
                    "Cannot walk %s from %i to %i on the open component %s"
                    % (direction, start, stop, comp.name)
                )
        idx = sl.start + (first + sign * np.arange(count + 1)) % n
        return self.points[idx]


def _unit_length(view: _LandmarkView, unit) -> float:
    if unit is None:
        unit = view.scheme.inner_eye_corners
    if unit is None:
        return 1.0
    i, j = unit
    d = float(np.linalg.norm(view.anchor(i) - view.anchor(j)))
    if d == 0:
        raise DegenerateAnnotationError(
            "The unit landmarks %i and %i coincide" % (i, j)
        )
    return d


def chin_angle(apex, ray1, ray2) -> float:
    """The angle at `apex` between the rays to `ray1` and `ray2` in
    degrees"""
    v1 = np.asarray(ray1, dtype=float) - apex
    v2 = np.asarray(ray2, dtype=float) - apex
    cos = np.dot(v1, v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    return float(np.degrees(np.arccos(np.clip(cos, -1, 1))))


def morphometrics(
    landmarks: Union[np.ndarray, EnrichedLandmarkSet],
    definitions: Dict,
    scheme: Optional[ContourScheme] = None,
) -> pd.DataFrame:
    """Compute morphometric measures

    Parameters
    ----------
    landmarks: np.ndarray or EnrichedLandmarkSet
        Sparse anchors or dense landmarks
    definitions: dict
        The measure definitions (see :func:`psy_enrich.data_io.load_measures`)
    scheme: ContourScheme
        The scheme of sparse `landmarks`

    Returns
    -------
    pandas.DataFrame
        The ``value`` of every measure and a ``self_intersecting`` flag for
        areas"""
    view = _LandmarkView(landmarks, scheme)
    unit = _unit_length(view, definitions.get("unit"))
    values: Dict[str, float] = {}
    flags: Dict[str, bool] = {}
    for measure in definitions["measures"]:
        name = measure["name"]
        kind = measure["type"]
        flags[name] = False
        if kind == "angle":
            apex = view.anchor(measure["apex"])
            r1, r2 = (view.anchor(i) for i in measure["rays"])
            values[name] = chin_angle(apex, r1, r2)
        elif kind == "length":
            i, j = measure["between"]
            values[name] = (
                float(np.linalg.norm(view.anchor(i) - view.anchor(j))) / unit
            )
        elif kind == "area":
            polygon = np.concatenate(
                [
                    view.span(
                        span["from"],
                        span["to"],
                        span.get("direction", "forward"),
                    )
                    for span in measure["spans"]
                ]
            )
            if len(polygon) >= 3 and not LinearRing(polygon).is_simple:
                flags[name] = True
                warn(
                    "The polygon of %s intersects itself" % name,
                    MorphometryWarning,
                )
            values[name] = abs(polygon_area(polygon)) / unit**2
        elif kind == "ratio":
            num, den = measure["of"]
            values[name] = values[num] / values[den]
        else:
            raise ConfigurationError("Unknown measure type %r" % (kind,))
    return pd.DataFrame(
        {
            "value": pd.Series(values, dtype=float),
            "self_intersecting": pd.Series(flags, dtype=bool),
        }
    )


def mape(predicted, reference) -> float:
    """The mean absolute percentage error

    References that are zero are excluded with a warning.

    Parameters
    ----------
    predicted: np.ndarray
        The predicted measures
    reference: np.ndarray
        The reference measures

    Returns
    -------
    float
        ``mean(|pred - ref| / |ref|) * 100``"""
    predicted = np.asarray(predicted, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if predicted.shape != reference.shape:
        raise ContractViolation(
            "Shapes differ: %s and %s" % (predicted.shape, reference.shape)
        )
    zero = reference == 0
    if zero.any():
        warn(
            "Excluding %i zero reference values" % zero.sum(), MetricWarning
        )
    if zero.all():
        return float("nan")
    pred, ref = predicted[~zero], reference[~zero]
    return float(np.mean(np.abs(pred - ref) / np.abs(ref)) * 100)


def morphometry_table(predicted, reference, definitions: Dict, scheme=None):
    """Compare the measures of predicted and reference landmarks

    Returns
    -------
    pandas.DataFrame
        The ``predicted`` and ``reference`` values and the ``MAPE`` of every
        measure"""
    pred = morphometrics(predicted, definitions, scheme)["value"]
    ref = morphometrics(reference, definitions, scheme)["value"]
    table = pd.DataFrame({"predicted": pred, "reference": ref})
    table["MAPE"] = [
        mape([p], [r]) for p, r in zip(table.predicted, table.reference)
    ]
    return table
