"""Quality scores of normalized patches.

A patch that is cropped across a sharp contour shows a vertical boundary
after normalization: the sums of its columns vary a lot, the sums of its
rows hardly. The ratio of both standard deviations is mapped to a raw score
and then, through the empirical distribution of the raw scores of the
training corpus, to a normalized score in ``[0, 1]``.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats

from psy_enrich.errors import ConfigurationError, ContractViolation
from psy_enrich.patch_pipeline import Patch
from psy_enrich.rcsetup import rcParams

logger = logging.getLogger(__name__)


def _pixels(patch: Union[Patch, np.ndarray]) -> np.ndarray:
    pixels = patch.pixels if isinstance(patch, Patch) else patch
    pixels = np.asarray(pixels, dtype=float)
    if pixels.ndim < 2 or not pixels.size:
        raise ContractViolation(
            "Expected non-empty patches, got shape %s" % (pixels.shape,)
        )
    return pixels


def variance_ratio(patch, epsilon: Optional[float] = None):
    """The directional variance ratio ``V`` of a patch

    Parameters
    ----------
    patch: Patch or np.ndarray
        The patch or an array of patches of shape ``(..., h, w)``
    epsilon: float
        The variance floor. If None, the ``quality.epsilon`` rcParam is used

    Returns
    -------
    float or np.ndarray
        The standard deviation of the column sums divided by the standard
        deviation of the row sums, both stabilized by `epsilon`"""
    if epsilon is None:
        epsilon = rcParams["quality.epsilon"]
    pixels = _pixels(patch)
    columns = pixels.sum(axis=-2)
    rows = pixels.sum(axis=-1)
    return (columns.std(axis=-1) + epsilon) / (rows.std(axis=-1) + epsilon)


def raw_score(V):
    """Map a variance ratio to the raw score

    ``S = V - 1`` for ``V >= 1``, else ``S = 1 - 1 / V``"""
    V = np.asarray(V, dtype=float)
    if (V <= 0).any():
        raise ContractViolation("Variance ratios must be positive")
    with np.errstate(divide="ignore"):
        ret = np.where(V >= 1, V - 1, 1 - 1 / V)
    return ret if ret.ndim else float(ret)


def raw_scores(patches, epsilon: Optional[float] = None) -> np.ndarray:
    """The raw scores of an array of patches of shape ``(N, h, w)``"""
    return np.atleast_1d(raw_score(variance_ratio(patches, epsilon)))


@dataclass(frozen=True)
class QualityModel:
    """The empirical distribution of the raw scores of a training corpus

    Parameters
    ----------
    scores: np.ndarray
        The raw scores (sorted at construction)
    epsilon: float
        The variance floor used for the scores"""

    scores: np.ndarray
    epsilon: float = 1e-6

    def __post_init__(self):
        scores = np.sort(np.asarray(self.scores, dtype=float).ravel())
        if not len(scores):
            raise ConfigurationError(
                "Cannot fit a quality model on an empty corpus"
            )
        if not np.isfinite(scores).all():
            raise ConfigurationError("Raw scores must be finite")
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return len(self.scores)

    def normalize(self, S):
        """Map raw scores to normalized scores

        The normalized score is the fraction of corpus scores that are
        strictly smaller than `S`."""
        ret = np.searchsorted(self.scores, S, side="left") / len(self.scores)
        return ret if np.ndim(ret) else float(ret)

    def score(self, patch):
        """The normalized score of a patch (or an array of patches)"""
        return self.normalize(raw_score(variance_ratio(patch, self.epsilon)))


def fit_quality_model(scores, epsilon: Optional[float] = None) -> QualityModel:
    """Fit the quality model on the raw scores of a training corpus

    Parameters
    ----------
    scores: np.ndarray
        The raw scores of all training patches
    epsilon: float
        The variance floor that was used for the scores

    Returns
    -------
    QualityModel
        The fitted model"""
    if epsilon is None:
        epsilon = rcParams["quality.epsilon"]
    model = QualityModel(scores, epsilon)
    logger.debug(
        "Fitted quality model on %i scores (median %s)",
        len(model),
        np.median(model.scores),
    )
    return model


def normalize_score(model: QualityModel, S):
    """Map the raw score `S` to ``[0, 1]``

    See Also
    --------
    QualityModel.normalize"""
    return model.normalize(S)


def score_patch(model: QualityModel, patch):
    """The normalized quality score of a patch"""
    return model.score(patch)


def uniformity_statistic(model: QualityModel, scores) -> float:
    """Kolmogorov-Smirnov statistic of the normalized scores

    Normalized scores of a corpus drawn from the same distribution as the
    corpus of `model` are approximately uniform in ``[0, 1]``."""
    values = np.atleast_1d(model.normalize(np.asarray(scores, dtype=float)))
    return float(stats.kstest(values, "uniform").statistic)
