"""The offset regressor of psy-enrich.

The regressor maps a normalized patch and the soft index of its landmark to
a one-dimensional heatmap along the contour normal. The soft-argmax of the
heatmap is the offset that moves the landmark onto the contour.

Training distorts the anchor landmarks by random offsets along their
normals and learns to regress the displacement back to the anchor, weighted
by the quality score of the patch. :func:`refine` applies the trained model
to enriched landmarks.
"""


# SPDX-FileCopyrightText: 2021-2024 Helmholtz-Zentrum hereon GmbH
#
# SPDX-License-Identifier: LGPL-3.0-only


from __future__ import annotations

import copy
import hashlib
import json
import logging
import pickle
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from tqdm import tqdm

from psy_enrich.contour_geometry import ContourScheme
from psy_enrich.enrichment import (
    EnrichedLandmarkSet,
    anchor_successors,
    initialize_enriched,
)
from psy_enrich.errors import (
    ConfigurationError,
    ContractViolation,
    ParseError,
    TrainingFailure,
)
from psy_enrich.patch_pipeline import (
    AugmentConfig,
    FaceImage,
    PatchSpec,
    extract_patches,
    make_training_patch,
)
from psy_enrich.quality import QualityModel, fit_quality_model, raw_scores
from psy_enrich.rcsetup import rcParams

logger = logging.getLogger(__name__)

#: version of the model artifact files written by :func:`save_model`
MODEL_FORMAT_VERSION = 1

#: number of patches that are passed through the network at once
PREDICTION_CHUNK = 256


@dataclass(frozen=True)
class IndexEmbeddingSpec:
    """The channel layout of the index embedding

    Parameters
    ----------
    m: int
        The number of input feature channels
    n: int
        The number of anchor landmarks of the scheme
    successors: tuple of int, optional
        The anchor that follows each anchor along its contour. The last
        anchor of a closed contour is followed by the first anchor of the
        same contour. Defaults to ``i + 1`` modulo ``n``"""

    m: int
    n: int
    successors: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigurationError(
                "Channel counts must be positive, got m=%s, n=%s"
                % (self.m, self.n)
            )
        if self.m % self.n:
            raise ConfigurationError(
                "The number of channels %i is not a multiple of the number "
                "of anchors %i" % (self.m, self.n)
            )
        if self.successors is not None:
            successors = tuple(int(i) for i in self.successors)
            if len(successors) != self.n or not all(
                0 <= i < self.n for i in successors
            ):
                raise ConfigurationError(
                    "Expected %i successor indices in [0, %i), got %s"
                    % (self.n, self.n, self.successors)
                )
            object.__setattr__(self, "successors", successors)

    @property
    def k(self) -> int:
        """The number of output channels ``m / n``"""
        return self.m // self.n


def index_embed(
    features: torch.Tensor, t, spec: IndexEmbeddingSpec
) -> torch.Tensor:
    """Select and blend feature channels by the soft index

    For ``t = i + l`` with integer ``i`` and ``0 <= l < 1``, the output
    blends the channels ``i, n + i, ..., m - n + i`` with weight ``1 - l``
    and the channels of the successor of anchor ``i`` with weight ``l``. The
    successor is ``i + 1`` (wrapping within each block of ``n``) unless
    :attr:`IndexEmbeddingSpec.successors` says otherwise.

    Parameters
    ----------
    features: torch.Tensor
        The input of shape ``(B, m, h, w)`` or ``(m, h, w)``
    t: float or torch.Tensor
        The soft index (one per batch item). It is wrapped modulo ``n``
    spec: IndexEmbeddingSpec
        The channel layout

    Returns
    -------
    torch.Tensor
        The output of shape ``(B, k, h, w)`` (or ``(k, h, w)``)"""
    single = features.ndim == 3
    if single:
        features = features.unsqueeze(0)
    if features.ndim != 4 or features.shape[1] != spec.m:
        raise ContractViolation(
            "Expected features with %i channels, got shape %s"
            % (spec.m, tuple(features.shape))
        )
    batch, _, height, width = features.shape
    t = torch.as_tensor(t, dtype=features.dtype).reshape(-1)
    if t.numel() == 1 and batch > 1:
        t = t.expand(batch)
    elif t.numel() != batch:
        raise ContractViolation(
            "Got %i soft indices for %i feature maps" % (t.numel(), batch)
        )
    t = torch.remainder(t, spec.n)
    lower = torch.floor(t).long().clamp(max=spec.n - 1)
    lam = (t - lower.to(t.dtype)).reshape(batch, 1, 1, 1)
    blocks = spec.n * torch.arange(spec.k)
    first = lower[:, None] + blocks
    if spec.successors is None:
        upper = torch.remainder(lower + 1, spec.n)
    else:
        upper = torch.as_tensor(spec.successors)[lower]
    second = upper[:, None] + blocks

    def select(idx):
        idx = idx.reshape(batch, spec.k, 1, 1).expand(
            batch, spec.k, height, width
        )
        return torch.gather(features, 1, idx)

    ret = (1 - lam) * select(first) + lam * select(second)
    return ret[0] if single else ret


def soft_argmax(heatmap, temperature: float = 1.0):
    """Differentiable expectation of the position in a heatmap

    Parameters
    ----------
    heatmap: torch.Tensor
        The heatmap of shape ``(..., W)``
    temperature: float
        The heatmap is multiplied with this value before the softmax

    Returns
    -------
    torch.Tensor
        The expected position relative to the center ``(W - 1) / 2``"""
    heatmap = torch.as_tensor(heatmap)
    width = heatmap.shape[-1]
    positions = (
        torch.arange(width, dtype=heatmap.dtype) - (width - 1) / 2
    )
    probs = torch.softmax(temperature * heatmap, dim=-1)
    return (probs * positions).sum(dim=-1)


def loss(offsets, targets, weights) -> torch.Tensor:
    """The quality weighted smooth L1 loss

    Parameters
    ----------
    offsets: torch.Tensor
        The regressed offsets of shape ``(B, )``
    targets: torch.Tensor
        The target offsets of shape ``(B, )``
    weights: torch.Tensor
        The normalized quality scores of shape ``(B, )``

    Returns
    -------
    torch.Tensor
        ``mean(weights * smooth_l1(offsets, targets))``"""
    offsets = torch.as_tensor(offsets)
    targets = torch.as_tensor(targets, dtype=offsets.dtype)
    weights = torch.as_tensor(weights, dtype=offsets.dtype)
    if not offsets.shape == targets.shape == weights.shape:
        raise ContractViolation(
            "Batch shapes differ: %s, %s, %s"
            % (
                tuple(offsets.shape),
                tuple(targets.shape),
                tuple(weights.shape),
            )
        )
    errors = F.smooth_l1_loss(offsets, targets, reduction="none", beta=1.0)
    return (weights * errors).mean()


def _feature_size(size: int) -> int:
    for _ in range(3):
        size = (size - 1) // 2 + 1
    return size


class OffsetNet(nn.Module):
    """Compact heatmap network

    Three stride-2 convolutions (``n``, ``2 n`` and ``k n`` channels), the
    index embedding and a head that averages over the rows of the feature
    maps and maps the columns to a heatmap of ``size`` positions.

    Parameters
    ----------
    n_anchors: int
        The number of anchor landmarks ``n`` of the scheme
    size: int
        The patch size
    channel_multiplier: int
        ``k`` in ``m = k n``
    hidden: int
        The number of hidden units of the head
    use_index_embedding: bool
        If False, the soft index is ignored (fixed to 0)
    zero_head: bool
        Initialize the output layer with zeros
    successors: list of int, optional
        The successor of each anchor in the index embedding, see
        :func:`psy_enrich.enrichment.anchor_successors`"""

    def __init__(
        self,
        n_anchors: int,
        size: int,
        channel_multiplier: int = 1,
        hidden: int = 128,
        use_index_embedding: bool = True,
        zero_head: bool = False,
        successors: Optional[Sequence[int]] = None,
    ):
        super().__init__()
        n = n_anchors
        self.size = size
        self.use_index_embedding = use_index_embedding
        self.embedding = IndexEmbeddingSpec(
            channel_multiplier * n,
            n,
            None if successors is None else tuple(successors),
        )
        self.encoder = nn.Sequential(
            nn.Conv2d(1, n, 3, stride=2, padding=1),
            nn.ELU(),
            nn.Conv2d(n, 2 * n, 3, stride=2, padding=1),
            nn.ELU(),
            nn.Conv2d(2 * n, self.embedding.m, 3, stride=2, padding=1),
            nn.ELU(),
        )
        width = _feature_size(size)
        self.head = nn.Sequential(
            nn.Linear(self.embedding.k * width, hidden),
            nn.ELU(),
            nn.Linear(hidden, size),
        )
        if zero_head:
            nn.init.zeros_(self.head[-1].weight)
            nn.init.zeros_(self.head[-1].bias)

    def forward(self, patches: torch.Tensor, t: torch.Tensor):
        if patches.ndim == 3:
            patches = patches.unsqueeze(1)
        if patches.shape[-2:] != (self.size, self.size):
            raise ContractViolation(
                "Expected patches of size %i, got shape %s"
                % (self.size, tuple(patches.shape))
            )
        features = self.encoder(patches)
        if not self.use_index_embedding:
            t = torch.zeros_like(t)
        features = index_embed(features, t, self.embedding)
        columns = features.mean(dim=2).flatten(1)
        return self.head(columns)


@dataclass(frozen=True)
class TrainingConfig:
    """The parameters of :func:`train`"""

    batch_size: int = 68
    learning_rate: float = 1e-3
    lr_milestones: Tuple[float, ...] = (0.5, 0.75, 0.9)
    lr_gamma: float = 0.1
    epochs: int = 20
    seed: int = 0
    channel_multiplier: int = 1
    hidden: int = 128
    temperature: float = 1.0
    zero_head: bool = False
    normalize_patches: bool = True
    use_quality: bool = True
    use_index_embedding: bool = True
    workers: int = 1
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("The batch size must be positive")
        if not self.learning_rate > 0 or not self.lr_gamma > 0:
            raise ConfigurationError("Learning rates must be positive")
        if self.epochs < 1:
            raise ConfigurationError("At least one epoch is required")
        if self.workers < 1:
            raise ConfigurationError("At least one worker is required")
        object.__setattr__(
            self, "lr_milestones", tuple(float(f) for f in self.lr_milestones)
        )

    @classmethod
    def from_rcparams(cls, rc=None, **kwargs) -> TrainingConfig:
        """Create the config from the ``train.*`` and ``augment.*``
        rcParams"""
        rc = rcParams if rc is None else rc
        for f in cls.__dataclass_fields__:
            if f != "augment":
                kwargs.setdefault(f, rc["train." + f])
        kwargs.setdefault("augment", AugmentConfig.from_rcparams(rc))
        return cls(**kwargs)

    @property
    def milestone_epochs(self) -> List[int]:
        """The epochs after which the learning rate is decayed"""
        return [
            max(int(round(f * self.epochs)), 1) for f in self.lr_milestones
        ]

    def to_dict(self) -> Dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical JSON representation"""
        dumped = json.dumps(
            self.to_dict(), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(dumped.encode("utf-8")).hexdigest()


class OffsetRegressor:
    """A trained offset regressor

    Parameters
    ----------
    net: OffsetNet
        The network
    patch_spec: PatchSpec
        The geometry of the patches
    quality: QualityModel
        The quality model of the training corpus
    scheme_id: str
        The scheme of the training landmarks
    config: TrainingConfig
        The training parameters
    history: dict
        The loss history of the training"""

    def __init__(
        self,
        net: OffsetNet,
        patch_spec: PatchSpec,
        quality: QualityModel,
        scheme_id: str,
        config: TrainingConfig,
        history: Optional[Dict[str, List[float]]] = None,
    ):
        self.net = net.eval()
        self.patch_spec = patch_spec
        self.quality = quality
        self.scheme_id = scheme_id
        self.config = config
        self.history = history or {"epoch_loss": [], "step_loss": []}

    @property
    def embedding(self) -> IndexEmbeddingSpec:
        return self.net.embedding

    @property
    def config_hash(self) -> str:
        return self.config.hash

    @property
    def seed(self) -> int:
        return self.config.seed

    def describe(self) -> str:
        """A human readable summary of the model"""
        n_params = sum(p.numel() for p in self.net.parameters())
        lines = [
            "Offset regressor for scheme %s" % self.scheme_id,
            "  patch size:      %i (reference %i)"
            % (self.patch_spec.size, self.patch_spec.reference_size),
            "  index embedding: m=%i, n=%i, k=%i"
            % (self.embedding.m, self.embedding.n, self.embedding.k),
            "  parameters:      %i" % n_params,
            "  quality corpus:  %i scores" % len(self.quality),
            "  seed:            %i" % self.seed,
            "  config hash:     %s" % self.config_hash,
        ]
        if self.history["epoch_loss"]:
            lines.append(
                "  loss:            %.5f -> %.5f (%i epochs)"
                % (
                    self.history["epoch_loss"][0],
                    self.history["epoch_loss"][-1],
                    len(self.history["epoch_loss"]),
                )
            )
        return "\n".join(lines)

    def forward(self, patches, t) -> Tuple[torch.Tensor, torch.Tensor]:
        """Regress the offsets of patches

        Parameters
        ----------
        patches: np.ndarray or torch.Tensor
            The patches of shape ``(B, s, s)``
        t: np.ndarray or torch.Tensor
            The soft indices of shape ``(B, )``

        Returns
        -------
        torch.Tensor
            The offsets in aligned pixels
        torch.Tensor
            The heatmaps of shape ``(B, s)``"""
        dtype = next(self.net.parameters()).dtype
        patches = torch.as_tensor(patches, dtype=dtype)
        t = torch.as_tensor(t, dtype=dtype).reshape(-1)
        heatmaps = self.net(patches, t)
        return soft_argmax(heatmaps, self.config.temperature), heatmaps

    def predict(self, patches, t) -> Tuple[np.ndarray, np.ndarray]:
        """Regress the offsets without gradients

        Returns
        -------
        np.ndarray
            The offsets
        np.ndarray
            The heatmaps"""
        patches = np.asarray(patches)
        t = np.asarray(t, dtype=float)
        t = np.array(np.broadcast_to(t, len(patches)))
        offsets, heatmaps = [], []
        with torch.no_grad():
            for start in range(0, len(patches), PREDICTION_CHUNK):
                sl = slice(start, start + PREDICTION_CHUNK)
                o, h = self.forward(patches[sl], t[sl])
                offsets.append(o.double().numpy())
                heatmaps.append(h.double().numpy())
        if not offsets:
            size = self.patch_spec.size
            return np.zeros(0), np.zeros((0, size))
        return np.concatenate(offsets), np.concatenate(heatmaps)

    def confidence(self, patches) -> np.ndarray:
        """The normalized quality scores (ones if quality is disabled)"""
        patches = np.asarray(patches)
        if not self.config.use_quality:
            return np.ones(len(patches))
        return np.atleast_1d(self.quality.score(patches))


def forward(model: OffsetRegressor, patch, t):
    """Regress the offset of a single patch

    Returns
    -------
    float
        The offset in aligned pixels
    np.ndarray
        The heatmap"""
    pixels = getattr(patch, "pixels", patch)
    pixels = np.asarray(pixels)
    size = model.patch_spec.size
    if pixels.shape != (size, size):
        raise ContractViolation(
            "Expected a patch of shape %s, got %s"
            % ((size, size), pixels.shape)
        )
    offsets, heatmaps = model.predict(pixels[np.newaxis], [t])
    return float(offsets[0]), heatmaps[0]


@dataclass
class _TrainingItem:
    face: int
    anchor: np.ndarray
    angle: float
    t: float


def _training_items(corpus, scheme: ContourScheme) -> List[_TrainingItem]:
    items = []
    for iface, face in enumerate(corpus):
        enriched = initialize_enriched(face.anchors, scheme, 1)
        for pos in np.where(~enriched.isolated_mask)[0]:
            items.append(
                _TrainingItem(
                    iface,
                    enriched.points[pos],
                    float(enriched.normal_angle[pos]),
                    float(enriched.t[pos]),
                )
            )
    return items


class _BatchMaker:
    """Prepare the training patches of a batch with independent seeds"""

    def __init__(self, corpus, items, spec, config, augment):
        self.corpus = corpus
        self.items = items
        self.spec = spec
        self.config = config
        self.augment = augment

    def make(self, key: Tuple[int, int, int]):
        stream, epoch, idx = key
        item = self.items[idx]
        rng = np.random.default_rng([self.config.seed, stream, epoch, idx])
        patch, sample = make_training_patch(
            self.corpus[item.face].image,
            item.anchor,
            item.angle,
            item.t,
            self.spec,
            rng,
            self.augment,
            self.config.normalize_patches,
        )
        return patch.pixels, item.t, sample.offset

    def __call__(self, keys, pool=None):
        mapped = pool.map(self.make, keys) if pool else map(self.make, keys)
        pixels, t, offsets = zip(*mapped)
        return np.stack(pixels), np.array(t), np.array(offsets)


def train(
    corpus: Sequence,
    scheme: ContourScheme,
    spec: Optional[PatchSpec] = None,
    config: Optional[TrainingConfig] = None,
    quality: Optional[QualityModel] = None,
    progress: bool = False,
) -> OffsetRegressor:
    """Train an offset regressor

    Parameters
    ----------
    corpus: list of AnnotatedFace
        The training faces (objects with an ``image`` attribute, a
        :class:`~psy_enrich.patch_pipeline.FaceImage`, and the ``anchors``)
    scheme: ContourScheme
        The scheme of the anchors
    spec: PatchSpec
        The geometry of the patches (from the rcParams by default)
    config: TrainingConfig
        The training parameters (from the rcParams by default)
    quality: QualityModel
        The quality model. If None, it is fitted on one dedicated pass of
        distorted and augmented patches over the corpus
    progress: bool
        Show a progress bar

    Returns
    -------
    OffsetRegressor
        The trained model

    Raises
    ------
    psy_enrich.errors.TrainingFailure
        If the loss becomes non-finite"""
    spec = PatchSpec.from_rcparams() if spec is None else spec
    config = TrainingConfig.from_rcparams() if config is None else config
    if not len(corpus):
        raise ConfigurationError("Cannot train on an empty corpus")
    items = _training_items(corpus, scheme)
    if not items:
        raise ConfigurationError("The corpus has no contour landmarks")
    logger.info(
        "Training on %i landmarks of %i faces", len(items), len(corpus)
    )
    maker = _BatchMaker(corpus, items, spec, config, config.augment)
    pool = (
        ThreadPoolExecutor(max_workers=config.workers)
        if config.workers > 1
        else None
    )
    try:
        if quality is None:
            scores = []
            for start in range(0, len(items), PREDICTION_CHUNK):
                keys = [
                    (1, 0, idx)
                    for idx in range(
                        start, min(start + PREDICTION_CHUNK, len(items))
                    )
                ]
                scores.append(raw_scores(maker(keys, pool)[0]))
            quality = fit_quality_model(np.concatenate(scores))

        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(config.seed)
            net = OffsetNet(
                scheme.n_total,
                spec.size,
                config.channel_multiplier,
                config.hidden,
                config.use_index_embedding,
                config.zero_head,
                anchor_successors(scheme),
            )
        model = OffsetRegressor(net, spec, quality, scheme.scheme_id, config)
        optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
        scheduler = torch.optim.lr_scheduler.MultiStepLR(
            optimizer, config.milestone_epochs, gamma=config.lr_gamma
        )
        net.train()
        for epoch in tqdm(
            range(config.epochs), desc="Training", disable=not progress
        ):
            order = np.random.default_rng([config.seed, 2, epoch]).permutation(
                len(items)
            )
            losses = []
            for step, start in enumerate(
                range(0, len(order), config.batch_size)
            ):
                keys = [
                    (0, epoch, int(idx))
                    for idx in order[start : start + config.batch_size]
                ]
                pixels, t, offsets = maker(keys, pool)
                weights = model.confidence(pixels)
                predicted, _ = model.forward(pixels, t)
                targets = torch.as_tensor(-offsets, dtype=predicted.dtype)
                value = loss(predicted, targets, weights)
                if not torch.isfinite(value):
                    raise TrainingFailure(
                        "The training diverged",
                        {
                            "epoch": epoch,
                            "step": step,
                            "loss": float(value),
                            "lr": optimizer.param_groups[0]["lr"],
                        },
                    )
                optimizer.zero_grad()
                value.backward()
                optimizer.step()
                losses.append(float(value))
            scheduler.step()
            model.history["step_loss"].extend(losses)
            model.history["epoch_loss"].append(float(np.mean(losses)))
            logger.info(
                "Epoch %i/%i: loss %.5f",
                epoch + 1,
                config.epochs,
                model.history["epoch_loss"][-1],
            )
    finally:
        if pool is not None:
            pool.shutdown()
    net.eval()
    return model


def refine(
    enriched: EnrichedLandmarkSet,
    image: FaceImage,
    model: OffsetRegressor,
) -> EnrichedLandmarkSet:
    """Move enriched landmarks onto the contour

    Every landmark that is not isolated is moved by ``S * O`` along its
    normal, where ``O`` is the regressed offset and ``S`` the normalized
    quality score of its patch. Isolated landmarks are passed through.

    Parameters
    ----------
    enriched: EnrichedLandmarkSet
        The landmarks to refine (initialized or already dense predictions)
    image: FaceImage
        The image of the face
    model: OffsetRegressor
        The trained model

    Returns
    -------
    EnrichedLandmarkSet
        The refined landmarks with their confidence"""
    if enriched.scheme_id != model.scheme_id:
        raise ContractViolation(
            "Model trained for scheme %s cannot refine scheme %s"
            % (model.scheme_id, enriched.scheme_id)
        )
    active = np.where(~enriched.isolated_mask)[0]
    points = enriched.points.copy()
    confidence = np.full(len(enriched), np.nan)
    if len(active):
        centers = enriched.points[active]
        angles = enriched.normal_angle[active]
        patches = extract_patches(
            image,
            centers,
            angles,
            model.patch_spec,
            model.config.normalize_patches,
        )
        offsets, _ = model.predict(patches, enriched.t[active])
        scores = model.confidence(patches)
        normals = enriched.normals[active]
        moved = centers + (
            (scores * offsets * image.scale)[:, np.newaxis] * normals
        )
        points[active] = np.where(
            (scores == 0)[:, np.newaxis], centers, moved
        )
        confidence[active] = scores
        logger.debug(
            "Refined %i landmarks, mean confidence %.3f",
            len(active),
            scores.mean(),
        )
    ret = enriched.with_points(points, confidence)
    ret.meta["model_config_hash"] = model.config_hash
    return ret


def unit_verification(
    model: OffsetRegressor,
    corpus: Sequence,
    scheme: ContourScheme,
    seed: int = 1,
) -> Dict[str, float]:
    """Compare random offsets with the regressed offsets

    Every contour anchor of the held-out `corpus` is distorted by a random
    offset (without augmentation). The random baseline is the mean absolute
    offset, the regressed error is the mean absolute difference between the
    regressed offset and the displacement back to the anchor.

    Returns
    -------
    dict
        ``'random'`` and ``'regressed'`` mean errors in aligned pixels and
        the number of samples ``'n'``"""
    items = _training_items(corpus, scheme)
    config = replace(model.config, seed=seed)
    maker = _BatchMaker(corpus, items, model.patch_spec, config, None)
    errors = []
    offsets = []
    for start in range(0, len(items), PREDICTION_CHUNK):
        keys = [
            (3, 0, idx)
            for idx in range(start, min(start + PREDICTION_CHUNK, len(items)))
        ]
        pixels, t, sampled = maker(keys)
        predicted, _ = model.predict(pixels, t)
        errors.append(np.abs(predicted + sampled))
        offsets.append(np.abs(sampled))
    return {
        "random": float(np.concatenate(offsets).mean()),
        "regressed": float(np.concatenate(errors).mean()),
        "n": len(items),
    }


def gradient_check(
    net: OffsetNet,
    patches,
    t,
    targets,
    weights,
    temperature: float = 1.0,
    rtol: float = 1e-4,
    atol: float = 1e-8,
) -> bool:
    """Compare analytic and finite difference gradients of the loss

    The gradients of the loss with respect to all parameters of `net` are
    checked in double precision with central differences.

    Returns
    -------
    bool
        True if the gradients match within `rtol` and `atol`"""
    net = copy.deepcopy(net).double()
    names, params = zip(
        *[
            (name, p.detach().clone().requires_grad_(True))
            for name, p in net.named_parameters()
        ]
    )
    patches = torch.as_tensor(patches, dtype=torch.float64)
    t = torch.as_tensor(t, dtype=torch.float64)
    targets = torch.as_tensor(targets, dtype=torch.float64)
    weights = torch.as_tensor(weights, dtype=torch.float64)

    def func(*values):
        heatmaps = torch.func.functional_call(
            net, dict(zip(names, values)), (patches, t)
        )
        return loss(soft_argmax(heatmaps, temperature), targets, weights)

    return torch.autograd.gradcheck(
        func, params, eps=1e-6, atol=atol, rtol=rtol, raise_exception=False
    )


def save_model(model: OffsetRegressor, path) -> None:
    """Save a model artifact

    The artifact is a :func:`torch.save` container of tensors and plain
    python objects, see :func:`load_model`."""
    net = model.net
    state = {
        "format_version": MODEL_FORMAT_VERSION,
        "scheme_id": model.scheme_id,
        "network": {
            "n_anchors": net.embedding.n,
            "size": net.size,
            "channel_multiplier": net.embedding.k,
            "hidden": net.head[0].out_features,
            "use_index_embedding": net.use_index_embedding,
            "successors": (
                None
                if net.embedding.successors is None
                else list(net.embedding.successors)
            ),
        },
        "state_dict": {
            key: val.detach().clone() for key, val in net.state_dict().items()
        },
        "patch_spec": asdict(model.patch_spec),
        "quality_scores": torch.from_numpy(model.quality.scores.copy()),
        "quality_epsilon": float(model.quality.epsilon),
        "config": model.config.to_dict(),
        "config_hash": model.config_hash,
        "history": {
            key: [float(v) for v in val]
            for key, val in model.history.items()
        },
    }
    torch.save(state, path)
    logger.info("Saved model to %s", path)


def load_model(path) -> OffsetRegressor:
    """Load a model artifact written by :func:`save_model`

    Raises
    ------
    psy_enrich.errors.ParseError
        If the file is not a model artifact of a supported version"""
    try:
        state = torch.load(path, weights_only=True)
    except (
        RuntimeError,
        EOFError,
        ValueError,
        pickle.UnpicklingError,
    ) as e:
        raise ParseError("%s is not a model artifact: %s" % (path, e))
    if not isinstance(state, dict) or "format_version" not in state:
        raise ParseError("%s is not a model artifact" % (path,))
    if state["format_version"] != MODEL_FORMAT_VERSION:
        raise ParseError(
            "Unsupported model format version %s in %s"
            % (state["format_version"], path)
        )
    config = dict(state["config"])
    config["augment"] = AugmentConfig(**config["augment"])
    config = TrainingConfig(**config)
    if config.hash != state["config_hash"]:
        raise ParseError("Config hash mismatch in %s" % (path,))
    net = OffsetNet(**state["network"])
    net.load_state_dict(state["state_dict"])
    quality = QualityModel(
        state["quality_scores"].numpy(), state["quality_epsilon"]
    )
    return OffsetRegressor(
        net,
        PatchSpec(**state["patch_spec"]),
        quality,
        state["scheme_id"],
        config,
        {key: list(val) for key, val in state["history"].items()},
    )
