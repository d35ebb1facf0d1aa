"""Input and output of psy-enrich.

This module contains

- the reader and writer of the ``pts`` landmark format
  (:func:`parse_pts`, :func:`format_pts`),
- image input and output (:func:`read_image`, :func:`write_image`,
  :func:`write_pgm`),
- the contour scheme and measure definition files (:func:`load_scheme`,
  :func:`load_measures`),
- the JSON format of enriched landmarks (:func:`write_enriched`,
  :func:`read_enriched`),
- the generator of synthetic faces with exactly known contours
  (:func:`generate_scene`) and
- the discovery of datasets on disk (:class:`Dataset`).
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import glob
import json
import logging
import os
import os.path as osp
import re
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from matplotlib.path import Path
from PIL import Image
from scipy.spatial import cKDTree
from scipy.special import ndtr

from psy_enrich.contour_geometry import (
    BaseCurve,
    ComponentSpec,
    ContourScheme,
)
from psy_enrich.enrichment import (
    EnrichedLandmarkSet,
    enrich_dense_truth,
    enriched_count,
)
from psy_enrich.errors import (
    ConfigurationError,
    ParseError,
    SchemeValidationError,
)
from psy_enrich.patch_pipeline import FaceImage
from psy_enrich.rcsetup import pair, rcParams

logger = logging.getLogger(__name__)

#: version of the enriched landmark files
ENRICHED_FORMAT_VERSION = 1

#: version of the scheme files
SCHEME_FORMAT_VERSION = 1

#: luma weights of the grayscale conversion
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

#: image file extensions that are recognized in datasets
IMAGE_EXTENSIONS = (".png", ".pgm")

_data_dir = osp.dirname(__file__)


# -----------------------------------------------------------------------------
# ------------------------------ pts files ------------------------------------
# -----------------------------------------------------------------------------


@dataclass
class PtsAnnotation:
    """The content of a ``pts`` file"""

    #: The version in the header
    version: str

    #: The points of shape ``(n_points, 2)``
    points: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.points)


_header_patt = re.compile(r"^(\w+)\s*:\s*(\S+)$")


def parse_pts(text: str) -> PtsAnnotation:
    """Parse the content of a ``pts`` file

    The format is::

        version: 1
        n_points: 68
        {
        x y
        ...
        }

    Blank lines and surrounding whitespace are ignored. Coordinates are
    returned exactly as written, see :func:`load_landmarks` for the
    conversion of 1-based coordinates.

    Raises
    ------
    psy_enrich.errors.ParseError
        For malformed lines or a wrong number of points"""
    lines = [
        (i, line.strip())
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip()
    ]
    header: Dict[str, str] = {}
    pos = 0
    while pos < len(lines) and lines[pos][1] != "{":
        lineno, line = lines[pos]
        m = _header_patt.match(line)
        if m is None:
            raise ParseError("Malformed header line %r" % line, lineno)
        header[m.group(1)] = m.group(2)
        pos += 1
    if pos == len(lines):
        raise ParseError("Missing opening brace", lines[-1][0] if lines else 1)
    if "n_points" not in header:
        raise ParseError("Missing n_points header", lines[pos][0])
    try:
        n_points = int(header["n_points"])
    except ValueError:
        raise ParseError(
            "Invalid number of points %r" % header["n_points"], lines[0][0]
        )
    points = []
    pos += 1
    while pos < len(lines) and lines[pos][1] != "}":
        lineno, line = lines[pos]
        values = line.split()
        if len(values) != 2:
            raise ParseError("Expected two coordinates, got %r" % line, lineno)
        try:
            point = [float(v) for v in values]
        except ValueError:
            raise ParseError("Invalid coordinates %r" % line, lineno)
        if not np.isfinite(point).all():
            raise ParseError("Coordinates must be finite", lineno)
        points.append(point)
        pos += 1
    if pos == len(lines):
        raise ParseError("Missing closing brace", lines[-1][0])
    if pos != len(lines) - 1:
        raise ParseError(
            "Unexpected content after the closing brace", lines[pos + 1][0]
        )
    if len(points) != n_points:
        raise ParseError(
            "Expected %i points, found %i" % (n_points, len(points)),
            lines[pos][0],
        )
    points = np.array(points, dtype=float).reshape(-1, 2)
    return PtsAnnotation(header.get("version", "1"), points)


def format_pts(points, version="1") -> str:
    """Format points in the ``pts`` format

    The shortest representation that reproduces every coordinate exactly is
    written."""
    points = np.asarray(points, dtype=float)
    lines = ["version: %s" % version, "n_points: %i" % len(points), "{"]
    lines.extend("%r %r" % (float(x), float(y)) for x, y in points)
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_landmarks(path, one_based: Optional[bool] = None) -> np.ndarray:
    """Load landmarks from a ``pts`` file

    Parameters
    ----------
    path: str
        The path to the file
    one_based: bool
        If True, the coordinates are 1-based (the Matlab convention of the
        300W annotations) and 1 is subtracted. If None, the
        ``data.one_based`` rcParam is used

    Returns
    -------
    np.ndarray
        The 0-based points of shape ``(n, 2)``"""
    if one_based is None:
        one_based = rcParams["data.one_based"]
    with open(path) as f:
        try:
            points = parse_pts(f.read()).points
        except ParseError as e:
            raise ParseError("%s: %s" % (path, e))
    return points - 1 if one_based else points


def save_landmarks(path, points, one_based: bool = False) -> None:
    """Save 0-based landmarks as a ``pts`` file"""
    points = np.asarray(points, dtype=float)
    with open(path, "w") as f:
        f.write(format_pts(points + 1 if one_based else points))


# -----------------------------------------------------------------------------
# -------------------------------- images -------------------------------------
# -----------------------------------------------------------------------------


def to_grayscale(pixels: np.ndarray) -> np.ndarray:
    """Convert RGB(A) pixels with values in ``[0, 1]`` to grayscale"""
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim == 2:
        return pixels
    return pixels[..., :3] @ np.array(LUMA_WEIGHTS)


def read_image(path) -> np.ndarray:
    """Read a PNG or PGM image as grayscale float in ``[0, 1]``"""
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB", "I", "I;16", "I;16B", "F"):
            img = img.convert("RGB")
        mode = img.mode
        pixels = np.asarray(img).astype(float)
    if mode.startswith("I"):
        pixels /= 65535.0
    elif mode != "F":
        pixels /= 255.0
    return np.clip(to_grayscale(pixels), 0, 1)


def _to_uint8(pixels) -> np.ndarray:
    pixels = np.asarray(pixels, dtype=float)
    return np.round(np.clip(pixels, 0, 1) * 255).astype(np.uint8)


def write_image(path, pixels) -> None:
    """Write grayscale pixels in ``[0, 1]`` as 8-bit image

    The format is determined by the file extension"""
    fmt = "PPM" if str(path).lower().endswith(".pgm") else None
    Image.fromarray(_to_uint8(pixels), mode="L").save(path, format=fmt)


def write_pgm(path, pixels) -> None:
    """Write grayscale pixels in ``[0, 1]`` as binary 8-bit PGM"""
    Image.fromarray(_to_uint8(pixels), mode="L").save(path, format="PPM")


def dump_patches(directory, patches, prefix: str = "patch") -> List[str]:
    """Dump patches as PGM files for debugging

    Returns
    -------
    list of str
        The paths of the written files"""
    os.makedirs(directory, exist_ok=True)
    ret = []
    for i, patch in enumerate(patches):
        fname = osp.join(directory, "%s-%04i.pgm" % (prefix, i))
        write_pgm(fname, getattr(patch, "pixels", patch))
        ret.append(fname)
    logger.debug("Dumped %i patches to %s", len(ret), directory)
    return ret


# -----------------------------------------------------------------------------
# ----------------------- schemes and measures --------------------------------
# -----------------------------------------------------------------------------


def scheme_from_dict(d: Dict, source: str = "<dict>") -> ContourScheme:
    """Create a contour scheme from its JSON representation

    Raises
    ------
    psy_enrich.errors.SchemeValidationError
        If the content is invalid"""
    try:
        version = d.get("format_version", SCHEME_FORMAT_VERSION)
        if version != SCHEME_FORMAT_VERSION:
            raise SchemeValidationError(
                "Unsupported scheme format version %s" % (version,)
            )
        components = []
        for comp in d["components"]:
            start, stop = comp["anchors"]
            components.append(
                ComponentSpec(
                    name=str(comp["name"]),
                    start=int(start),
                    stop=int(stop),
                    closed=bool(comp.get("closed", False)),
                    isolated=bool(comp.get("isolated", False)),
                    fit_kind=comp.get("fit_kind", "bspline"),
                    degree=int(comp.get("degree", 3)),
                )
            )
        return ContourScheme(
            str(d["scheme_id"]),
            tuple(components),
            d.get("outer_eye_corners"),
            d.get("inner_eye_corners"),
        )
    except SchemeValidationError as e:
        raise SchemeValidationError("%s: %s" % (source, e))
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemeValidationError(
            "%s: invalid scheme definition (%s: %s)"
            % (source, e.__class__.__name__, e)
        )


def scheme_to_dict(scheme: ContourScheme) -> Dict:
    """The JSON representation of a scheme"""
    ret = {
        "format_version": SCHEME_FORMAT_VERSION,
        "scheme_id": scheme.scheme_id,
        "components": [
            {
                "name": c.name,
                "anchors": [c.start, c.stop],
                "closed": c.closed,
                "isolated": c.isolated,
                "fit_kind": c.fit_kind,
                "degree": c.degree,
            }
            for c in scheme.components
        ],
    }
    for attr in ["outer_eye_corners", "inner_eye_corners"]:
        if getattr(scheme, attr) is not None:
            ret[attr] = list(getattr(scheme, attr))
    return ret


def _search_path(kind: str) -> List[str]:
    ret = []
    if kind == "schemes" and rcParams["scheme.path"]:
        ret.append(rcParams["scheme.path"])
    ret.append(osp.join(_data_dir, kind))
    return ret


def _find_definition(name_or_path: str, kind: str) -> str:
    if osp.exists(name_or_path):
        return name_or_path
    for directory in _search_path(kind):
        fname = osp.join(directory, name_or_path + ".json")
        if osp.exists(fname):
            return fname
    raise ConfigurationError(
        "Unknown %s %r. Available are %s"
        % (kind[:-1], name_or_path, ", ".join(available(kind)))
    )


def available(kind: str = "schemes") -> List[str]:
    """The names of the shipped (and configured) schemes or measures"""
    ret = set()
    for directory in _search_path(kind):
        ret.update(
            osp.splitext(osp.basename(f))[0]
            for f in glob.glob(osp.join(directory, "*.json"))
        )
    return sorted(ret)


def load_scheme(name_or_path: Optional[str] = None) -> ContourScheme:
    """Load a contour scheme

    Parameters
    ----------
    name_or_path: str
        The path to a scheme file or the id of a shipped scheme (e.g.
        ``'300w-68'``). If None, the ``scheme.default`` rcParam is used

    Returns
    -------
    ContourScheme
        The validated scheme"""
    if name_or_path is None:
        name_or_path = rcParams["scheme.default"]
    fname = _find_definition(name_or_path, "schemes")
    with open(fname) as f:
        try:
            content = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemeValidationError("%s: invalid JSON (%s)" % (fname, e))
    return scheme_from_dict(content, fname)


_measure_types = {
    "angle": ["apex", "rays"],
    "length": ["between"],
    "area": ["spans"],
    "ratio": ["of"],
}


def validate_measures(d: Dict, source: str = "<dict>") -> Dict:
    """Validate morphometric measure definitions

    Raises
    ------
    psy_enrich.errors.ConfigurationError
        If a measure is invalid"""
    if not isinstance(d, dict) or not isinstance(d.get("measures"), list):
        raise ConfigurationError("%s: missing list of measures" % source)
    names = set()
    for measure in d["measures"]:
        name = measure.get("name")
        kind = measure.get("type")
        if kind not in _measure_types:
            raise ConfigurationError(
                "%s: unknown type %r of measure %s" % (source, kind, name)
            )
        missing = [key for key in _measure_types[kind] if key not in measure]
        if missing:
            raise ConfigurationError(
                "%s: measure %s misses %s" % (source, name, ", ".join(missing))
            )
        if kind == "ratio" and not set(measure["of"]) <= names:
            raise ConfigurationError(
                "%s: ratio %s refers to undefined measures" % (source, name)
            )
        if kind == "area":
            for span in measure["spans"]:
                if span.get("direction", "forward") not in (
                    "forward",
                    "backward",
                ):
                    raise ConfigurationError(
                        "%s: invalid span direction in %s" % (source, name)
                    )
        names.add(name)
    return d


def load_measures(name_or_path: Optional[str] = None) -> Dict:
    """Load morphometric measure definitions

    Parameters
    ----------
    name_or_path: str
        The path to a definition file or the name of shipped definitions.
        If None, the ``measures.default`` rcParam is used"""
    if name_or_path is None:
        name_or_path = rcParams["measures.default"]
    fname = _find_definition(name_or_path, "measures")
    with open(fname) as f:
        try:
            content = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError("%s: invalid JSON (%s)" % (fname, e))
    return validate_measures(content, fname)


# -----------------------------------------------------------------------------
# -------------------------- enriched landmarks -------------------------------
# -----------------------------------------------------------------------------


def _float_or_none(val):
    val = float(val)
    return None if np.isnan(val) else val


def enriched_to_dict(enriched: EnrichedLandmarkSet, label=None) -> Dict:
    """The JSON representation of enriched landmarks"""
    names = [c.name for c in enriched.scheme.components]
    conf = enriched.confidence
    kinds = enriched.kind
    points = []
    for k in range(len(enriched)):
        points.append(
            {
                "x": float(enriched.points[k, 0]),
                "y": float(enriched.points[k, 1]),
                "t": float(enriched.t[k]),
                "kind": str(kinds[k]),
                "component": names[enriched.component[k]],
                "i": int(enriched.anchor_index[k]),
                "j": int(enriched.sub_index[k]),
                "normal_angle": _float_or_none(enriched.normal_angle[k]),
                "confidence": (
                    None if conf is None else _float_or_none(conf[k])
                ),
            }
        )
    ret = {
        "format_version": ENRICHED_FORMAT_VERSION,
        "scheme_id": enriched.scheme_id,
        "density": enriched.density,
        "n_points": len(enriched),
        "refined": conf is not None,
    }
    if label is not None:
        ret["label"] = label
    if enriched.meta:
        ret["meta"] = enriched.meta
    ret["points"] = points
    return ret


def enriched_from_dict(
    d: Dict, scheme: Optional[ContourScheme] = None, source="<dict>"
) -> EnrichedLandmarkSet:
    """Create enriched landmarks from their JSON representation

    Raises
    ------
    psy_enrich.errors.ParseError
        If the content does not match the format"""
    try:
        if d["format_version"] != ENRICHED_FORMAT_VERSION:
            raise ParseError(
                "%s: unsupported format version %s"
                % (source, d["format_version"])
            )
        if scheme is None:
            scheme = load_scheme(d["scheme_id"])
        elif scheme.scheme_id != d["scheme_id"]:
            raise ParseError(
                "%s: landmarks of scheme %s, expected %s"
                % (source, d["scheme_id"], scheme.scheme_id)
            )
        density = int(d["density"])
        points = d["points"]
        expected = enriched_count(scheme, density)
        if len(points) != expected or d.get("n_points", expected) != expected:
            raise ParseError(
                "%s: expected %i points for scheme %s with density %i, got %i"
                % (source, expected, scheme.scheme_id, density, len(points))
            )
        names = {c.name: k for k, c in enumerate(scheme.components)}

        def column(key, dtype=float):
            return np.array(
                [np.nan if p[key] is None else p[key] for p in points],
                dtype=dtype,
            )

        confidence = column("confidence") if d.get("refined") else None
        return EnrichedLandmarkSet(
            scheme=scheme,
            density=density,
            points=np.stack([column("x"), column("y")], axis=-1),
            t=column("t"),
            normal_angle=column("normal_angle"),
            component=np.array([names[p["component"]] for p in points]),
            anchor_index=column("i", int),
            sub_index=column("j", int),
            confidence=confidence,
            meta=dict(d.get("meta", {})),
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(
            "%s: invalid enriched landmarks (%s: %s)"
            % (source, e.__class__.__name__, e)
        )


def write_enriched(path, enriched: EnrichedLandmarkSet, label=None) -> None:
    """Write enriched landmarks as JSON"""
    with open(path, "w") as f:
        json.dump(enriched_to_dict(enriched, label), f, indent=1)
        f.write("\n")


def read_enriched(
    path, scheme: Optional[ContourScheme] = None
) -> EnrichedLandmarkSet:
    """Read enriched landmarks written by :func:`write_enriched`"""
    with open(path) as f:
        try:
            content = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError("%s: invalid JSON (%s)" % (path, e), e.lineno)
    return enriched_from_dict(content, scheme, path)


# -----------------------------------------------------------------------------
# --------------------------- synthetic scenes --------------------------------
# -----------------------------------------------------------------------------


class EllipseArc(BaseCurve):
    """An elliptic arc (or a full ellipse)

    The anchors are located at the integer parameters. For a closed ellipse
    with ``n`` anchors, ``u`` runs from 0 to ``n``, for an open arc from
    0 to ``n - 1``.

    Parameters
    ----------
    center: np.ndarray
        The center of the ellipse
    axes: tuple of float
        The semi-axes along the rotated x- and y-axes
    rotation: float
        The rotation of the ellipse in radians
    phi0: float
        The ellipse angle of the first anchor
    phi1: float
        The ellipse angle of the last anchor (ignored for closed ellipses)
    n_anchors: int
        The number of anchors
    closed: bool
        Whether the curve is the full ellipse"""

    def __init__(
        self,
        center,
        axes,
        rotation: float,
        phi0: float,
        phi1: float,
        n_anchors: int,
        closed: bool = False,
    ):
        self.center = np.asarray(center, dtype=float)
        self.axes = tuple(float(a) for a in axes)
        self.rotation = float(rotation)
        self.phi0 = float(phi0)
        self.phi1 = float(phi0 + 2 * np.pi if closed else phi1)
        self.n_anchors = n_anchors
        self.closed = closed
        cos, sin = np.cos(self.rotation), np.sin(self.rotation)
        self._rot = np.array([[cos, -sin], [sin, cos]])

    @property
    def domain(self) -> Tuple[float, float]:
        n = self.n_anchors
        return (0.0, float(n if self.closed else n - 1))

    @property
    def _dphi(self) -> float:
        return (self.phi1 - self.phi0) / self.domain[1]

    def _eval(self, u):
        phi = self.phi0 + np.asarray(u)[..., np.newaxis] * self._dphi
        a, b = self.axes
        local = np.concatenate([a * np.cos(phi), b * np.sin(phi)], axis=-1)
        return self.center + local @ self._rot.T

    def _derivative(self, u):
        phi = self.phi0 + np.asarray(u)[..., np.newaxis] * self._dphi
        a, b = self.axes
        local = np.concatenate([-a * np.sin(phi), b * np.cos(phi)], axis=-1)
        return (local * self._dphi) @ self._rot.T

    def transformed(self, scale, rotation, translation) -> EllipseArc:
        """Apply a similarity transform"""
        cos, sin = np.cos(rotation), np.sin(rotation)
        rot = np.array([[cos, -sin], [sin, cos]])
        return EllipseArc(
            translation + scale * rot @ self.center,
            (scale * self.axes[0], scale * self.axes[1]),
            self.rotation + rotation,
            self.phi0,
            self.phi1,
            self.n_anchors,
            self.closed,
        )


class LineSegment(BaseCurve):
    """A straight open contour with equidistant anchors"""

    closed = False

    def __init__(self, start, stop, n_anchors: int):
        self.start = np.asarray(start, dtype=float)
        self.stop = np.asarray(stop, dtype=float)
        self.n_anchors = n_anchors

    @property
    def domain(self) -> Tuple[float, float]:
        return (0.0, float(self.n_anchors - 1))

    def _eval(self, u):
        frac = np.asarray(u)[..., np.newaxis] / (self.n_anchors - 1)
        return self.start + frac * (self.stop - self.start)

    def _derivative(self, u):
        vec = (self.stop - self.start) / (self.n_anchors - 1)
        return np.broadcast_to(vec, np.shape(u) + (2,)).copy()

    def transformed(self, scale, rotation, translation) -> LineSegment:
        """Apply a similarity transform"""
        cos, sin = np.cos(rotation), np.sin(rotation)
        rot = np.array([[cos, -sin], [sin, cos]])
        return LineSegment(
            translation + scale * rot @ self.start,
            translation + scale * rot @ self.stop,
            self.n_anchors,
        )


def _deg(val):
    return np.deg2rad(val)


def _face_layout(rng) -> List[BaseCurve]:
    """The contours of a synthetic face in unit coordinates (y down)"""

    def jitter(center, axes):
        center = np.asarray(center) + rng.uniform(-0.01, 0.01, 2)
        axes = np.asarray(axes) * rng.uniform(0.92, 1.08, 2)
        return center, axes

    def arc(center, axes, phi0, phi1, n, closed=False):
        center, axes = jitter(center, axes)
        return EllipseArc(
            center, axes, 0.0, _deg(phi0), _deg(phi1), n, closed
        )

    nose_top = np.array([0, -0.17]) + rng.uniform(-0.01, 0.01, 2)
    return [
        arc((0, 0), (0.42, 0.5), 170, 10, 17),  # facial contour
        arc((-0.2, -0.2), (0.13, 0.06), 200, 340, 5),  # brow right
        arc((0.2, -0.2), (0.13, 0.06), 200, 340, 5),  # brow left
        LineSegment(nose_top, nose_top + [0, 0.22], 4),  # nose middle
        arc((0, 0.04), (0.09, 0.05), 160, 20, 5),  # nose bottom
        arc((-0.18, -0.1), (0.08, 0.035), 180, None, 6, True),  # eye right
        arc((0.18, -0.1), (0.08, 0.035), 180, None, 6, True),  # eye left
        arc((0, 0.25), (0.17, 0.07), 180, None, 12, True),  # lip outer
        arc((0, 0.25), (0.11, 0.025), 180, None, 8, True),  # lip inner
    ]


def _ellipse_layout(rng) -> List[BaseCurve]:
    phi0 = rng.uniform(0, 360)
    return [
        EllipseArc(
            rng.uniform(-0.02, 0.02, 2),
            np.array([0.35, 0.28]) * rng.uniform(0.9, 1.1, 2),
            0.0,
            _deg(phi0),
            None,
            8,
            True,
        ),
        EllipseArc(
            rng.uniform(-0.02, 0.02, 2),
            np.array([0.45, 0.42]) * rng.uniform(0.95, 1.05, 2),
            0.0,
            _deg(200),
            _deg(340),
            5,
        ),
    ]


#: the synthetic layouts and their schemes
LAYOUTS = {
    "300w-68": ("300w-68", _face_layout),
    "ellipse": ("synth-ellipse", _ellipse_layout),
}


@dataclass(frozen=True)
class SceneConfig:
    """The parameters of :func:`generate_scene`"""

    layout: str = "300w-68"
    image_size: int = 512
    face_size: Tuple[float, float] = (340.0, 420.0)
    blur: Tuple[float, float] = (0.7, 1.5)
    noise: Tuple[float, float] = (0.005, 0.02)
    contrast: Tuple[float, float] = (0.15, 0.3)
    density: int = 5

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ConfigurationError(
                "Unknown layout %r. Available are %s"
                % (self.layout, ", ".join(LAYOUTS))
            )
        if self.face_size[1] > self.image_size:
            raise ConfigurationError(
                "Faces of %s pixels do not fit into an image of %s pixels"
                % (self.face_size[1], self.image_size)
            )
        for attr in ["face_size", "blur", "noise", "contrast"]:
            object.__setattr__(
                self, attr, tuple(float(v) for v in getattr(self, attr))
            )

    @classmethod
    def from_rcparams(cls, rc=None, **kwargs) -> SceneConfig:
        """Create the config from the ``synth.*`` rcParams"""
        rc = rcParams if rc is None else rc
        kwargs.setdefault("layout", rc["synth.layout"])
        kwargs.setdefault("image_size", rc["synth.image_size"])
        kwargs.setdefault("density", rc["synth.density"])
        for key in ["face_size", "blur", "noise", "contrast"]:
            kwargs.setdefault(key, pair(rc["synth." + key]))
        return cls(**kwargs)

    @property
    def scheme_id(self) -> str:
        return LAYOUTS[self.layout][0]


@dataclass
class SyntheticScene:
    """A rendered synthetic face with exactly known contours"""

    #: The seed of the scene
    seed: int

    #: The configuration
    config: SceneConfig

    #: The scheme of the landmarks
    scheme: ContourScheme

    #: The grayscale pixels
    pixels: np.ndarray

    #: The contour of every component (None for isolated components)
    curves: List[Optional[BaseCurve]]

    #: The anchor landmarks of shape ``(n_total, 2)``
    anchors: np.ndarray

    #: The rendering parameters
    params: Dict = field(default_factory=dict)

    def oracle(self, component: int, u) -> np.ndarray:
        """The exact contour points of a component"""
        curve = self.curves[component]
        if curve is None:
            comp = self.scheme.components[component]
            return self.anchors[comp.start]
        return curve.eval(u)

    def dense_truth(self, density: Optional[int] = None):
        """Exact dense landmarks (arc length uniform between anchors)"""
        if density is None:
            density = self.config.density
        return enrich_dense_truth(
            self.anchors, self.curves, self.scheme, density
        )

    def face_image(self, reference_size=None) -> FaceImage:
        return FaceImage.from_landmarks(
            self.pixels, self.anchors, reference_size
        )

    @property
    def face(self) -> AnnotatedFace:
        return AnnotatedFace(
            self.face_image(), self.anchors, "scene-%i" % self.seed
        )


def _render_contour(img, curve, hint, contrast, sigma, band, xx, yy):
    """Add the edge of one contour to `img`"""
    u, pts = curve.sample(0.25)
    margin = 4 * sigma + 2 + (0 if curve.closed else 5 * band)
    height, width = img.shape
    x0, y0 = np.floor(pts.min(axis=0) - margin).astype(int)
    x1, y1 = np.ceil(pts.max(axis=0) + margin).astype(int)
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, width - 1), min(y1, height - 1)
    if x1 < x0 or y1 < y0:
        return
    region = np.stack(
        [xx[y0 : y1 + 1, x0 : x1 + 1], yy[y0 : y1 + 1, x0 : x1 + 1]], -1
    ).reshape(-1, 2)
    dist, idx = cKDTree(pts).query(region)
    if curve.closed:
        inside = Path(pts).contains_points(region)
        values = ndtr(np.where(inside, dist, -dist) / sigma)
    else:
        normals = curve.unit_normal(u, hint)[idx]
        side = -np.sign(((region - pts[idx]) * normals).sum(axis=-1))
        s = side * dist
        umin, umax = curve.domain
        taper = np.clip(np.minimum(u[idx] - umin, umax - u[idx]) / 0.25, 0, 1)
        taper = taper**2 * (3 - 2 * taper)
        values = ndtr(s / sigma) * np.exp(-np.maximum(s, 0) / band) * taper
    img[y0 : y1 + 1, x0 : x1 + 1] += contrast * values.reshape(
        y1 - y0 + 1, x1 - x0 + 1
    )


def generate_scene(
    seed: int, config: Optional[SceneConfig] = None, scheme=None
) -> SyntheticScene:
    """Render a synthetic face

    Every contour is rendered as a blurred intensity edge with a random
    contrast. Closed contours change the intensity of their interior, open
    contours of a band on the side of the face centroid that fades out at
    the ends of the contour.

    Parameters
    ----------
    seed: int
        The seed of the scene
    config: SceneConfig
        The parameters (from the rcParams by default)
    scheme: ContourScheme
        The scheme of the layout (loaded from the shipped schemes by
        default)

    Returns
    -------
    SyntheticScene
        The deterministic scene for `seed`"""
    config = SceneConfig.from_rcparams() if config is None else config
    if scheme is None:
        scheme = load_scheme(config.scheme_id)
    rng = np.random.default_rng(seed)
    unit_curves = LAYOUTS[config.layout][1](rng)
    if len(unit_curves) != len(scheme.components):
        raise ConfigurationError(
            "Layout %s does not match scheme %s"
            % (config.layout, scheme.scheme_id)
        )
    face_size = rng.uniform(*config.face_size)
    rotation = rng.uniform(-0.15, 0.15)
    size = config.image_size
    translation = size / 2 + rng.uniform(-0.04, 0.04, 2) * size
    # unit faces span about 0.85 units
    scale = face_size / 0.85
    curves = [
        c.transformed(scale, rotation, translation) for c in unit_curves
    ]
    anchors = np.concatenate(
        [
            c.eval(np.arange(comp.n_anchors))
            for c, comp in zip(curves, scheme.components)
        ]
    )
    sigma = rng.uniform(*config.blur)
    noise = rng.uniform(*config.noise)
    contrasts = rng.uniform(*config.contrast, len(curves)) * rng.choice(
        [-1, 1], len(curves)
    )
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    img = np.full((size, size), 0.5)
    centroid = anchors.mean(axis=0)
    for comp, curve, contrast in zip(scheme.components, curves, contrasts):
        hint = (
            anchors[comp.start : comp.stop + 1].mean(axis=0)
            if comp.closed
            else centroid
        )
        _render_contour(
            img, curve, hint, contrast, sigma, 0.03 * scale, xx, yy
        )
    img += rng.normal(0, noise, img.shape)
    logger.debug(
        "Generated scene %i (face size %.1f, blur %.2f, noise %.3f)",
        seed,
        face_size,
        sigma,
        noise,
    )
    return SyntheticScene(
        seed,
        config,
        scheme,
        np.clip(img, 0, 1),
        list(curves),
        anchors,
        {
            "face_size": float(face_size),
            "rotation": float(rotation),
            "blur": float(sigma),
            "noise": float(noise),
            "contrasts": [float(c) for c in contrasts],
        },
    )


def save_scene(scene: SyntheticScene, directory, stem: str) -> Dict[str, str]:
    """Write a scene as dataset item

    Writes ``<stem>.png`` (image), ``<stem>.pts`` (anchors),
    ``<stem>.dense.json`` (dense ground truth) and ``<stem>.scene.json``
    (the rendering parameters).

    Returns
    -------
    dict
        The paths of the written files"""
    os.makedirs(directory, exist_ok=True)
    base = osp.join(directory, stem)
    paths = {
        "image": base + ".png",
        "pts": base + ".pts",
        "dense": base + ".dense.json",
        "scene": base + ".scene.json",
    }
    write_image(paths["image"], scene.pixels)
    save_landmarks(paths["pts"], scene.anchors)
    write_enriched(paths["dense"], scene.dense_truth())
    with open(paths["scene"], "w") as f:
        json.dump(
            {
                "seed": scene.seed,
                "scheme_id": scene.scheme.scheme_id,
                "config": asdict(scene.config),
                "params": scene.params,
            },
            f,
            indent=1,
        )
        f.write("\n")
    return paths


# -----------------------------------------------------------------------------
# ------------------------------- datasets ------------------------------------
# -----------------------------------------------------------------------------


@dataclass
class AnnotatedFace:
    """An image with its anchor landmarks"""

    #: The image
    image: FaceImage

    #: The anchors of shape ``(n_total, 2)``
    anchors: np.ndarray

    #: The name of the sample
    name: str = ""


@dataclass(frozen=True)
class DatasetItem:
    """The files of one sample of a :class:`Dataset`"""

    stem: str
    image: str
    pts: str
    dense: Optional[str] = None


class Dataset(Sequence):
    """A directory of images with ``pts`` annotations

    Every sample consists of ``<stem>.png`` or ``<stem>.pgm``, the anchors
    ``<stem>.pts`` and optionally the dense ground truth
    ``<stem>.dense.json``. Relative directories are resolved against the
    ``data.root`` rcParam.

    Parameters
    ----------
    directory: str
        The directory of the dataset
    require_images: bool
        If False, annotations without image are accepted"""

    def __init__(self, directory: str, require_images: bool = True):
        if not osp.isabs(directory) and not osp.exists(directory):
            directory = osp.join(rcParams["data.root"], directory)
        if not osp.isdir(directory):
            raise ConfigurationError(
                "Dataset directory %s does not exist" % directory
            )
        self.directory = directory
        items = []
        for pts in sorted(glob.glob(osp.join(directory, "*.pts"))):
            stem = osp.splitext(osp.basename(pts))[0]
            image = next(
                (
                    osp.join(directory, stem + ext)
                    for ext in IMAGE_EXTENSIONS
                    if osp.exists(osp.join(directory, stem + ext))
                ),
                None,
            )
            if image is None and require_images:
                logger.debug("Skipping %s without image", pts)
                continue
            dense = osp.join(directory, stem + ".dense.json")
            items.append(
                DatasetItem(
                    stem, image, pts, dense if osp.exists(dense) else None
                )
            )
        self.items = items
        logger.debug("Found %i samples in %s", len(items), directory)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, index):
        return self.items[index]

    def load_face(self, item: DatasetItem, reference_size=None):
        """Load the image and anchors of a sample"""
        anchors = load_landmarks(item.pts)
        return AnnotatedFace(
            FaceImage.from_landmarks(
                read_image(item.image), anchors, reference_size
            ),
            anchors,
            item.stem,
        )

    def load_faces(self, reference_size=None) -> List[AnnotatedFace]:
        return [self.load_face(item, reference_size) for item in self.items]
