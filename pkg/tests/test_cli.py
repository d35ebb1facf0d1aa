"""Test the command line interface of psy-enrich."""

# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


import glob
import json
import os.path as osp
import shutil
import tempfile
import unittest

import _base_testing as bt
import numpy as np
import yaml
from PIL import Image

import psy_enrich.cli as cli
from psy_enrich.data_io import read_enriched
from psy_enrich.errors import UsageError
from psy_enrich.rcsetup import new_rcparams, rcParams


class TestHelpers(bt.EnrichTestCase):
    """Test the helper functions of the command line interface"""

    def test_run_label(self):
        self.assertEqual(
            cli.run_label("Baseline", 5, "test"), "Baseline-FE5_test"
        )
        self.assertEqual(cli.run_label("HRNet", 3, "train"), "HRNet-FE3")
        self.assertEqual(
            cli.run_label("HRNet", 3, "train+test"), "HRNet-FE3_train+test"
        )
        with self.assertRaises(UsageError):
            cli.run_label("HRNet", 3, "eval")

    def test_using(self):
        density = rcParams["enrich.density"]
        with cli.using(new_rcparams(enrich__density=density + 2)):
            self.assertEqual(rcParams["enrich.density"], density + 2)
        self.assertEqual(rcParams["enrich.density"], density)
        with self.assertRaises(RuntimeError):
            with cli.using(new_rcparams(enrich__density=density + 2)):
                raise RuntimeError()
        self.assertEqual(rcParams["enrich.density"], density)

    def test_ordered_map(self):
        items = list(range(20))
        for workers in [1, 4]:
            ret = cli.ordered_map(lambda i: i**2, items, workers, "", False)
            self.assertEqual(ret, [i**2 for i in items])


class TestPlugMode(unittest.TestCase):
    """Test the plug modes of the subcommands"""

    def mode(self, *argv):
        args = cli.get_parser().parse_args(list(argv))
        return cli._plug_mode(args), args

    def test_preprocess(self):
        base = ["preprocess", "data", "--model", "m.pt", "-o", "out"]
        self.assertEqual(self.mode(*base)[0], "train")
        self.assertEqual(self.mode(*base, "--mode", "train")[0], "train")
        with self.assertRaises(UsageError):
            self.mode(*base, "--mode", "test")

    def test_enrich(self):
        base = ["enrich", "data", "--model", "m.pt", "-o", "out"]
        self.assertEqual(self.mode(*base)[0], "test")
        mode, args = self.mode(*base, "--refine-only")
        self.assertEqual(mode, "train+test")
        mode, args = self.mode(*base, "--mode", "train+test")
        self.assertEqual(mode, "train+test")
        self.assertTrue(args.refine_only)
        with self.assertRaises(UsageError):
            self.mode(*base, "--mode", "train")

    def test_other(self):
        self.assertIsNone(self.mode("synth", "out")[0])
        mode = self.mode("eval", "a", "b", "--mode", "test")[0]
        self.assertEqual(mode, "test")


class TestExitCodes(bt.EnrichTestCase):
    """Test the exit codes of :func:`psy_enrich.cli.main`"""

    def test_usage(self):
        self.assertEqual(bt.run_cli()[0], 2)
        self.assertEqual(bt.run_cli("synth")[0], 2)
        code, out, err = bt.run_cli(
            "eval", osp.join(self.test_dir, "a"), self.test_dir
        )
        self.assertEqual(code, 2)
        self.assertIn("No ground truth", err)

    def test_missing_model(self):
        code, out, err = bt.run_cli(
            "score",
            self.test_dir,
            "--model",
            osp.join(self.test_dir, "m.pt"),
        )
        self.assertEqual(code, 2)
        self.assertIn("does not exist", err)

    def test_failure(self):
        code, out, err = bt.run_cli(
            "synth",
            osp.join(self.test_dir, "out"),
            "--config",
            osp.join(self.test_dir, "missing.yaml"),
        )
        self.assertEqual(code, 1)
        self.assertIn("missing.yaml", err)

    def test_invalid_config(self):
        fname = osp.join(self.test_dir, "config.yaml")
        with open(fname, "w") as f:
            yaml.safe_dump({"enrich.density": 0}, f)
        code, out, err = bt.run_cli(
            "synth", self.test_dir, "--config", fname
        )
        self.assertEqual(code, 1)

    def test_version(self):
        self.assertEqual(bt.run_cli("--version")[0], 0)


class TestPipeline(bt.EnrichTestCase):
    """Run the subcommands on a small synthetic dataset"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.root = tempfile.mkdtemp(prefix="psy_enrich_cli_")
        cls.config = osp.join(cls.root, "config.yaml")
        with open(cls.config, "w") as f:
            yaml.safe_dump(bt.small_cli_config, f)
        cls.scenes = osp.join(cls.root, "scenes")
        cls.model = osp.join(cls.root, "model.pt")
        cls.check_run("synth", cls.scenes, "-n", 3, "--seed", 7)
        cls.check_run("train", cls.scenes, "-o", cls.model)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.root, ignore_errors=True)
        super().tearDownClass()

    @classmethod
    def check_run(cls, *argv):
        code, out, err = bt.run_cli(
            *argv, "--config", cls.config, "--no-progress"
        )
        if code:
            raise AssertionError(
                "psy-enrich %s failed with %i: %s" % (argv[0], code, err)
            )
        return out

    def test_synth(self):
        files = [osp.basename(f) for f in glob.glob(self.scenes + "/*")]
        self.assertIn("scene-0002.png", files)
        self.assertIn("scene-0000.dense.json", files)
        self.assertIn("synth.yaml", files)
        with open(osp.join(self.scenes, "synth.yaml")) as f:
            dumped = yaml.safe_load(f)
        self.assertEqual(dumped["synth.layout"], "ellipse")

    def test_synth_deterministic(self):
        other = osp.join(self.test_dir, "scenes")
        self.check_run("synth", other, "-n", 3, "--seed", 7, "--workers", 2)
        for fname in glob.glob(osp.join(self.scenes, "scene-*")):
            with open(fname, "rb") as f1, open(
                osp.join(other, osp.basename(fname)), "rb"
            ) as f2:
                self.assertEqual(f1.read(), f2.read(), msg=fname)

    def test_eval_identical(self):
        out = self.check_run("eval", self.scenes, self.scenes, "--json")
        report = json.loads(out)
        self.assertEqual(report["n_samples"], 3)
        face = report["components"]["face"]
        self.assertAlmostEqual(face["ME"], 0)
        self.assertAlmostEqual(face["NME_edge"], 0)
        table = self.check_run("eval", self.scenes, self.scenes)
        self.assertIn("NME_edge [%]", table)

    def test_preprocess(self):
        output = osp.join(self.test_dir, "dense")
        self.check_run(
            "preprocess", self.scenes, "--model", self.model, "-o", output
        )
        refined = read_enriched(osp.join(output, "scene-0001.json"))
        self.assertEqual(refined.meta["label"], "Baseline-FE5")
        self.assertEqual(refined.meta["mode"], "train")
        self.assertEqual(len(refined), 61)
        self.assertTrue(np.isfinite(refined.confidence).all())

    def test_enrich_eval_score(self):
        output = osp.join(self.test_dir, "enriched")
        patches = osp.join(self.test_dir, "patches")
        self.check_run(
            "enrich",
            self.scenes,
            "--model",
            self.model,
            "-o",
            output,
            "--baseline",
            "HRNet",
            "--density",
            5,
            "--dump-patches",
            patches,
        )
        refined = read_enriched(osp.join(output, "scene-0000.json"))
        self.assertEqual(refined.meta["label"], "HRNet-FE5_test")
        with Image.open(osp.join(output, "scene-0000.overlay.png")) as img:
            self.assertEqual(img.size, (128, 128))
        self.assertEqual(
            len(glob.glob(osp.join(patches, "scene-0000-*.pgm"))), 61
        )

        report = json.loads(
            self.check_run("eval", output, self.scenes, "--json")
        )
        face = report["components"]["face"]
        self.assertLessEqual(face["NME_edge"], face["NME_point"])
        self.assertIn("S", face)

        scores = json.loads(
            self.check_run("score", patches, "--model", self.model, "--json")
        )
        self.assertEqual(len(scores), 183)
        normalized = [val["normalized"] for val in scores.values()]
        self.assertTrue(all(0 <= val <= 1 for val in normalized))

    def test_refine_only_without_images(self):
        output = osp.join(self.test_dir, "enriched")
        self.check_run(
            "enrich", self.scenes, "--model", self.model, "-o", output
        )
        code, out, err = bt.run_cli(
            "enrich",
            output,
            "--refine-only",
            "--model",
            self.model,
            "-o",
            osp.join(self.test_dir, "refined"),
            "--config",
            self.config,
        )
        self.assertEqual(code, 2)
        self.assertIn("No image found", err)


if __name__ == "__main__":
    unittest.main()
