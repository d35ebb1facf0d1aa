"""Base test setup for the psy-enrich test suite."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import contextlib
import io
import os
import shutil
import tempfile
from unittest import TestCase

import numpy as np

from psy_enrich.data_io import SceneConfig, generate_scene, load_scheme
from psy_enrich.patch_pipeline import PatchSpec

test_dir = os.path.dirname(__file__)

#: True if the long acceptance runs are enabled (``pytest --acceptance``)
acceptance = False


def ellipse_points(n, center=(64.0, 64.0), axes=(40.0, 25.0), phi0=0.0):
    """`n` points on an ellipse, counter-clockwise in image coordinates"""
    phi = phi0 + 2 * np.pi * np.arange(n) / n
    return np.stack(
        [center[0] + axes[0] * np.cos(phi), center[1] + axes[1] * np.sin(phi)],
        axis=-1,
    )


def scheme_anchors(scheme):
    """Non-degenerate anchors for every component of `scheme`"""
    anchors = []
    for k, comp in enumerate(scheme.components):
        center = (60.0 * k, 50.0 + 10 * (k % 3))
        if comp.isolated:
            anchors.append([center])
        elif comp.closed:
            anchors.append(ellipse_points(comp.n_anchors, center))
        else:
            phi = np.linspace(0.2, 0.8 * np.pi, comp.n_anchors)
            anchors.append(
                np.stack(
                    [
                        center[0] + 25 * np.cos(phi),
                        center[1] + 20 * np.sin(phi),
                    ],
                    -1,
                )
            )
    return np.concatenate(anchors)


def small_scene_config(**kwargs):
    """A scene configuration for fast tests"""
    kwargs.setdefault("layout", "ellipse")
    kwargs.setdefault("image_size", 128)
    kwargs.setdefault("face_size", (80.0, 96.0))
    kwargs.setdefault("blur", (0.8, 1.2))
    kwargs.setdefault("noise", (0.005, 0.01))
    kwargs.setdefault("contrast", (0.2, 0.3))
    return SceneConfig(**kwargs)


#: patch geometry that matches :func:`small_scene_config`
small_patch_spec = PatchSpec(16, 128)

#: command line configuration of the small synthetic ellipse scenes
small_cli_config = {
    "synth.layout": "ellipse",
    "synth.image_size": 128,
    "synth.face_size": [80.0, 96.0],
    "synth.blur": [0.8, 1.2],
    "synth.noise": [0.005, 0.01],
    "synth.contrast": [0.2, 0.3],
    "scheme.default": "synth-ellipse",
    "patch.size": 16,
    "patch.reference_size": 128,
    "train.epochs": 1,
    "train.batch_size": 13,
    "train.hidden": 16,
}


def run_cli(*argv):
    """Run the command line and capture its output

    Returns
    -------
    int
        The exit code
    str
        The standard output
    str
        The standard error"""
    from psy_enrich.cli import main

    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(arg) for arg in argv])
    return code, out.getvalue(), err.getvalue()


def synthetic_faces(seeds, config=None, reference_size=128):
    """Annotated faces of synthetic scenes"""
    config = small_scene_config() if config is None else config
    scheme = load_scheme(config.scheme_id)
    faces = []
    for seed in seeds:
        scene = generate_scene(seed, config, scheme)
        face = scene.face
        face.image = scene.face_image(reference_size)
        faces.append(face)
    return faces


class EnrichTestCase(TestCase):
    """Base class for testing the psy-enrich package. It provides a
    temporary directory and array comparisons"""

    longMessage = True

    @classmethod
    def tearDownClass(cls):
        from psy_enrich.rcsetup import defaultParams, rcParams

        rcParams.update(**{key: val[0] for key, val in defaultParams.items()})

    def setUp(self):
        self.test_dir = tempfile.mkdtemp(prefix="psy_enrich_")

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    @property
    def scheme_68(self):
        return load_scheme("300w-68")

    @property
    def scheme_98(self):
        return load_scheme("wflw-98")

    def assertAlmostArrayEqual(
        self, actual, desired, rtol=1e-07, atol=1e-10, msg=None, **kwargs
    ):
        """Asserts that the two given arrays are almost the same

        This method uses the :func:`numpy.testing.assert_allclose` function
        to compare the two given arrays.

        Parameters
        ----------
        actual : array_like
            Array obtained.
        desired : array_like
            Array desired.
        rtol : float, optional
            Relative tolerance.
        atol : float, optional
            Absolute tolerance.
        equal_nan : bool, optional.
            If True, NaNs will compare equal.
        err_msg : str, optional
            The error message to be printed in case of failure.
        verbose : bool, optional
            If True, the conflicting values are appended to the error message.
        """
        try:
            np.testing.assert_allclose(
                actual,
                desired,
                rtol=rtol,
                atol=atol,
                err_msg=msg or "",
                **kwargs,
            )
        except AssertionError as e:
            self.fail(str(e))
