"""Exceptions and warnings of the psy-enrich package.

All errors derive from :class:`ValueError` so that they integrate with the
validation functions in :mod:`psy_enrich.rcsetup`, which signal invalid
input by raising :class:`ValueError`.
"""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only

from __future__ import annotations

from typing import Any, Dict, Optional

from psyplot.warning import PsyPlotRuntimeWarning


class EnrichError(ValueError):
    """Base class for all errors raised by psy-enrich"""


class ConfigurationError(EnrichError):
    """Invalid parameters, such as a density of 0 or too few anchors"""


class DegenerateGeometryError(EnrichError):
    """Coincident anchors or zero-length tangents"""


class CurveDomainError(EnrichError):
    """A curve parameter outside the domain of an open curve"""


class ContractViolation(EnrichError):
    """A precondition of an operation is not met (e.g. shape mismatch)"""


class SchemeValidationError(EnrichError):
    """An invalid contour scheme file"""


class DegenerateAnnotationError(EnrichError):
    """An annotation that cannot be used for normalization"""


class UsageError(EnrichError):
    """Wrong usage of the command line interface"""


class ParseError(EnrichError):
    """A malformed input file

    Parameters
    ----------
    msg: str
        The error message
    lineno: int
        The 1-based line number where the error occured (if known)"""

    def __init__(self, msg: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            msg = "line %i: %s" % (lineno, msg)
        super().__init__(msg)


class TrainingFailure(EnrichError):
    """The training diverged

    The :attr:`diagnostics` hold the state of the training loop at the time
    of the failure."""

    def __init__(self, msg: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            msg += " (%s)" % ", ".join(
                "%s=%s" % item for item in sorted(self.diagnostics.items())
            )
        super().__init__(msg)


class EnrichWarning(PsyPlotRuntimeWarning):
    """Base class for runtime warnings of psy-enrich"""


class MorphometryWarning(EnrichWarning):
    """Warning for questionable morphometric measures"""


class MetricWarning(EnrichWarning):
    """Warning for values excluded from an evaluation metric"""
