"""Command line interface of psy-enrich.

The subcommands wire the library into a pipeline::

    psy-enrich synth scenes/ --count 100 --seed 7
    psy-enrich train scenes/ -o model.pt
    psy-enrich preprocess scenes/ --model model.pt -o dense/
    psy-enrich enrich predictions/ --model model.pt -o enriched/
    psy-enrich eval enriched/ scenes/ --json
    psy-enrich score patches/ --model model.pt

Every subcommand accepts a YAML configuration file (``--config``) whose keys
are the rcParams of :mod:`psy_enrich.rcsetup`. Command line flags win over
the file.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import os.path as osp
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

import psy_enrich
from psy_enrich import data_io
from psy_enrich.enrichment import initialize_enriched
from psy_enrich.errors import EnrichError, UsageError
from psy_enrich.metrics import EvalReport, evaluate, morphometry_table
from psy_enrich.patch_pipeline import FaceImage, PatchSpec, extract_patches
from psy_enrich.plotting import save_overlay
from psy_enrich.quality import raw_scores
from psy_enrich.rcsetup import dump_config, get_section, load_config, rcParams
from psy_enrich.regressor import (
    TrainingConfig,
    load_model,
    refine,
    save_model,
    train,
    unit_verification,
)

logger = logging.getLogger(__name__)

#: suffix of the run label per plug mode
_STAGES = {"train": "", "test": "_test", "train+test": "_train+test"}


def run_label(baseline: str, density: int, mode: str) -> str:
    """The name of a run, e.g. ``BaselineNet-FE5_test``"""
    if mode not in _STAGES:
        raise UsageError("Unknown plug mode %r" % (mode,))
    return "%s-FE%i%s" % (baseline, density, _STAGES[mode])


@contextmanager
def using(rc):
    """Temporarily apply the resolved configuration `rc` to the global
    rcParams"""
    saved = dict(rcParams)
    rcParams.update(rc)
    try:
        yield rc
    finally:
        rcParams.update(saved)


def ordered_map(
    func: Callable, items: Sequence, workers: int, desc: str, progress: bool
) -> List:
    """Process `items` with a thread pool, preserving the input order"""
    items = list(items)
    kws = dict(total=len(items), desc=desc, disable=not progress)
    if workers <= 1:
        return [func(item) for item in tqdm(items, **kws)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, items), **kws))


def _require_file(path: Optional[str], what: str) -> str:
    if not path or not osp.isfile(path):
        raise UsageError("%s %s does not exist" % (what, path))
    return path


def _dataset(path: str, require_images: bool = True) -> data_io.Dataset:
    if not osp.isdir(path) and not osp.isdir(
        osp.join(rcParams["data.root"], path)
    ):
        raise UsageError("Dataset directory %s does not exist" % path)
    dataset = data_io.Dataset(path, require_images)
    if not len(dataset):
        raise UsageError("No annotated samples found in %s" % path)
    return dataset


def _load_model(path):
    """Load a model and the scheme it was trained for"""
    model = load_model(_require_file(path, "Model"))
    scheme = data_io.load_scheme()
    if scheme.scheme_id != model.scheme_id:
        logger.info(
            "Using scheme %s of the model instead of %s",
            model.scheme_id,
            scheme.scheme_id,
        )
        scheme = data_io.load_scheme(model.scheme_id)
    return model, scheme


# -----------------------------------------------------------------------------
# ------------------------------ subcommands ----------------------------------
# -----------------------------------------------------------------------------


def cmd_synth(args) -> int:
    """Render synthetic scenes into a dataset directory"""
    config = data_io.SceneConfig.from_rcparams()
    scheme = data_io.load_scheme(config.scheme_id)
    seed = rcParams["train.seed"]

    def render(k):
        scene = data_io.generate_scene(seed + k, config, scheme)
        return data_io.save_scene(scene, args.output, "scene-%04i" % k)

    os.makedirs(args.output, exist_ok=True)
    workers = rcParams["cli.workers"]
    ordered_map(render, range(args.count), workers, "Synth", args.progress)
    keys = ["synth." + key for key in get_section("synth")]
    with open(osp.join(args.output, "synth.yaml"), "w") as f:
        f.write(dump_config(rcParams, keys))
    logger.info("Wrote %i scenes to %s", args.count, args.output)
    return 0


def cmd_train(args) -> int:
    """Train the offset regressor on a dataset"""
    scheme = data_io.load_scheme()
    spec = PatchSpec.from_rcparams()
    faces = _dataset(args.dataset).load_faces(spec.reference_size)
    config = TrainingConfig.from_rcparams()
    model = train(faces, scheme, spec, config, progress=args.progress)
    save_model(model, args.output)
    if args.holdout:
        holdout = _dataset(args.holdout).load_faces(spec.reference_size)
        result = unit_verification(model, holdout, scheme, config.seed + 1)
        if args.json:
            print(json.dumps(result, indent=2))
        else:
            print(
                pd.Series(result, name="ME").to_string(
                    float_format="{:.4f}".format
                )
            )
    return 0


def _refine_dataset(args, sources: Iterable, load) -> int:
    """Refine every item of `sources` and write one JSON file each"""
    mode = rcParams["cli.mode"]
    model, scheme = _load_model(args.model)
    density = rcParams["enrich.density"]
    label = run_label(rcParams["cli.baseline"], density, mode)
    spec = model.patch_spec
    os.makedirs(args.output, exist_ok=True)

    def process(item):
        face, enriched = load(item, scheme, density, spec)
        if args.dump_patches:
            active = ~enriched.isolated_mask
            data_io.dump_patches(
                args.dump_patches,
                extract_patches(
                    face.image,
                    enriched.points[active],
                    enriched.normal_angle[active],
                    spec,
                    model.config.normalize_patches,
                ),
                face.name,
            )
        refined = refine(enriched, face.image, model)
        refined.meta.update({"label": label, "mode": mode})
        base = osp.join(args.output, face.name)
        data_io.write_enriched(base + ".json", refined, label)
        if getattr(args, "overlay", False):
            save_overlay(base + ".overlay.png", face.image.pixels, refined)
        return base + ".json"

    written = ordered_map(
        process, sources, rcParams["cli.workers"], label, args.progress
    )
    logger.info("Wrote %i files to %s", len(written), args.output)
    return 0


def _from_pts(dataset):
    def load(item, scheme, density, spec):
        face = dataset.load_face(item, spec.reference_size)
        return face, initialize_enriched(face.anchors, scheme, density)

    return load


def cmd_preprocess(args) -> int:
    """Enrich and refine the ground truth of a training dataset"""
    dataset = _dataset(args.dataset)
    return _refine_dataset(args, dataset.items, _from_pts(dataset))


def cmd_enrich(args) -> int:
    """Enrich and refine predicted landmarks"""
    if not args.refine_only:
        dataset = _dataset(args.predictions)
        return _refine_dataset(args, dataset.items, _from_pts(dataset))
    # dense predictions next to their images
    directory = args.predictions
    if not osp.isdir(directory):
        raise UsageError("Prediction directory %s does not exist" % directory)
    files = sorted(
        f
        for f in glob.glob(osp.join(directory, "*.json"))
        if not f.endswith((".dense.json", ".scene.json"))
    )
    if not files:
        raise UsageError("No dense predictions found in %s" % directory)

    def load(fname, scheme, density, spec):
        stem = osp.splitext(osp.basename(fname))[0]
        enriched = data_io.read_enriched(fname, scheme)
        image = next(
            (
                osp.join(directory, stem + ext)
                for ext in data_io.IMAGE_EXTENSIONS
                if osp.exists(osp.join(directory, stem + ext))
            ),
            None,
        )
        if image is None:
            raise UsageError("No image found for %s" % fname)
        pixels = data_io.read_image(image)
        face = data_io.AnnotatedFace(
            FaceImage.from_landmarks(
                pixels, enriched.anchors, spec.reference_size
            ),
            enriched.anchors,
            stem,
        )
        return face, enriched

    return _refine_dataset(args, files, load)


def cmd_eval(args) -> int:
    """Evaluate dense predictions against dense ground truth"""
    truth_files = sorted(glob.glob(osp.join(args.truth, "*.dense.json")))
    if not truth_files:
        raise UsageError("No ground truth found in %s" % args.truth)
    measures = (
        data_io.load_measures(args.measures) if args.measures else None
    )
    step = rcParams["eval.sample_step"]
    fit_kind = rcParams["enrich.fit_kind"]

    def process(truth_file):
        stem = osp.basename(truth_file)[: -len(".dense.json")]
        candidates = [
            osp.join(args.predictions, stem + suffix)
            for suffix in [".json", ".dense.json"]
        ]
        pred_file = next((f for f in candidates if osp.exists(f)), None)
        if pred_file is None:
            raise UsageError("No prediction for %s" % stem)
        truth = data_io.read_enriched(truth_file)
        prediction = data_io.read_enriched(pred_file, truth.scheme)
        report = evaluate(prediction, truth, step, fit_kind)
        if measures is not None:
            report.morphometry = morphometry_table(
                prediction, truth, measures
            )
        return report

    reports = ordered_map(
        process, truth_files, rcParams["cli.workers"], "Eval", args.progress
    )
    report = EvalReport.combine(reports)
    print(report.to_json() if args.json else report.to_table())
    return 0


def cmd_score(args) -> int:
    """Quality scores of a directory of dumped patches"""
    model = _load_model(args.model)[0]
    files = sorted(glob.glob(osp.join(args.patches, "*.pgm")))
    if not files:
        raise UsageError("No PGM patches found in %s" % args.patches)
    pixels = np.stack([data_io.read_image(f) for f in files])
    raw = raw_scores(pixels, model.quality.epsilon)
    table = pd.DataFrame(
        {"raw": raw, "normalized": model.quality.normalize(raw)},
        index=pd.Index([osp.basename(f) for f in files], name="patch"),
    )
    if args.json:
        print(json.dumps(table.to_dict(orient="index"), indent=2))
    else:
        print(table.to_string(float_format="{:.4f}".format))
    return 0


# -----------------------------------------------------------------------------
# -------------------------------- parser -------------------------------------
# -----------------------------------------------------------------------------


def get_parser() -> argparse.ArgumentParser:
    """The argument parser of the ``psy-enrich`` command"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", help="YAML file with configuration keys"
    )
    common.add_argument("--seed", type=int, help="The random seed")
    common.add_argument(
        "--scheme", help="Id or path of the contour scheme"
    )
    common.add_argument(
        "--density", type=int, help="The enriching density D"
    )
    common.add_argument(
        "--workers", type=int, help="Number of parallel workers"
    )
    common.add_argument(
        "--mode",
        choices=list(_STAGES),
        help="The plug mode of the enricher",
    )
    common.add_argument(
        "--baseline", help="Name of the baseline network in the run label"
    )
    common.add_argument(
        "--no-progress",
        dest="progress",
        action="store_false",
        help="Do not show progress bars",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug messages"
    )
    verbosity.add_argument(
        "-q", "--quiet", action="store_true", help="Log only errors"
    )

    parser = argparse.ArgumentParser(
        "psy-enrich",
        description="Enrich sparse facial landmarks into dense contours",
    )
    parser.add_argument(
        "-V", "--version", action="version", version=psy_enrich.__version__
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser(
        "synth", parents=[common], help=cmd_synth.__doc__
    )
    p.add_argument("output", help="The output directory")
    p.add_argument(
        "-n", "--count", type=int, default=10, help="Number of scenes"
    )
    p.add_argument("--layout", help="The synthetic layout")
    p.set_defaults(func=cmd_synth)

    p = subparsers.add_parser(
        "train", parents=[common], help=cmd_train.__doc__
    )
    p.add_argument("dataset", help="The training dataset")
    p.add_argument(
        "-o", "--output", required=True, help="The model file to write"
    )
    p.add_argument("--epochs", type=int, help="Number of epochs")
    p.add_argument(
        "--holdout", help="Held-out dataset for the unit verification"
    )
    p.add_argument("--json", action="store_true", help="Print JSON")
    p.set_defaults(func=cmd_train)

    for name, func, source in [
        ("preprocess", cmd_preprocess, "dataset"),
        ("enrich", cmd_enrich, "predictions"),
    ]:
        p = subparsers.add_parser(name, parents=[common], help=func.__doc__)
        p.add_argument(source, help="Directory of images and pts files")
        p.add_argument("--model", required=True, help="The model file")
        p.add_argument(
            "-o", "--output", required=True, help="The output directory"
        )
        p.add_argument(
            "--dump-patches", help="Directory to dump the patches as PGM"
        )
        p.set_defaults(func=func)
    p.add_argument(
        "--refine-only",
        action="store_true",
        help="Refine dense predictions (JSON files) without initializing",
    )
    p.add_argument(
        "--no-overlay",
        dest="overlay",
        action="store_false",
        help="Do not write overlay images",
    )

    p = subparsers.add_parser("eval", parents=[common], help=cmd_eval.__doc__)
    p.add_argument("predictions", help="Directory of dense predictions")
    p.add_argument("truth", help="Directory of dense ground truth")
    p.add_argument("--measures", help="Morphometric measure definitions")
    p.add_argument("--json", action="store_true", help="Print JSON")
    p.set_defaults(func=cmd_eval)

    p = subparsers.add_parser(
        "score", parents=[common], help=cmd_score.__doc__
    )
    p.add_argument("patches", help="Directory of PGM patches")
    p.add_argument("--model", required=True, help="The model file")
    p.add_argument("--json", action="store_true", help="Print JSON")
    p.set_defaults(func=cmd_score)
    return parser


def _setup_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    logger = logging.getLogger("psy_enrich")
    logger.setLevel(level)
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(
            logging.Formatter("%(levelname)s %(name)s: %(message)s")
        )
        logger.addHandler(handler)


def _plug_mode(args) -> Optional[str]:
    if args.command == "preprocess":
        if args.mode not in (None, "train"):
            raise UsageError("preprocess runs in plug mode 'train'")
        return "train"
    if args.command == "enrich":
        if args.mode == "train":
            raise UsageError(
                "enrich runs in plug mode 'test' or 'train+test'"
            )
        if args.refine_only or args.mode == "train+test":
            args.refine_only = True
            return "train+test"
        return "test"
    return args.mode


def resolve_config(args):
    """Load the configuration file of `args` with the flags on top"""
    mode = _plug_mode(args)
    return load_config(
        args.config,
        enrich__density=args.density,
        train__seed=args.seed,
        scheme__default=args.scheme,
        cli__workers=args.workers,
        cli__baseline=args.baseline,
        cli__mode=mode,
        train__epochs=getattr(args, "epochs", None),
        synth__layout=getattr(args, "layout", None),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the ``psy-enrich`` command

    Returns
    -------
    int
        0 on success, 1 for failures and 2 for usage errors"""
    parser = get_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _setup_logging(args)
    try:
        with using(resolve_config(args)):
            return args.func(args)
    except UsageError as e:
        print("psy-enrich %s: error: %s" % (args.command, e), file=sys.stderr)
        return 2
    except (EnrichError, OSError) as e:
        print("psy-enrich %s: %s" % (args.command, e), file=sys.stderr)
        return 1
