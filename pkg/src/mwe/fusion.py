"""Two-branch model assembly, loss, training loop, and prediction.

The image latent and location latent are concatenated (image first)
into the final vector and classified by a single linear layer. Modes:
"image-only" and "location-only" build just their branch; the classifier
input width always equals the sum of active latent widths.

Training is mini-batch SGD with optional momentum. L1/L2 penalties hit
weight matrices and embedding tables only; biases, layer norms, the
class token, and positional embeddings are exempt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .location import LocationCode, LocConfig, init_loc_params, location_forward
from .vision import ViTConfig, init_vit_params, vit_forward

CANONICAL_CLASSES = ("D", "P", "S", "V", "N", "BG")
MODES = ("image-only", "location-only", "image+location")


@dataclass(frozen=True)
class ClassScheme:
    """Ordered label subset; order is always canonical D,P,S,V,N,BG."""

    classes: tuple

    def __post_init__(self):
        cls = tuple(self.classes)
        unknown = [c for c in cls if c not in CANONICAL_CLASSES]
        if unknown:
            raise ValueError(f"unknown classes {unknown}, "
                             f"valid: {CANONICAL_CLASSES}")
        if len(set(cls)) != len(cls):
            raise ValueError(f"duplicate classes in {cls}")
        if not 2 <= len(cls) <= 6:
            raise ValueError(f"scheme needs 2..6 classes, got {len(cls)}")
        ordered = tuple(c for c in CANONICAL_CLASSES if c in cls)
        object.__setattr__(self, "classes", ordered)

    @property
    def k(self) -> int:
        return len(self.classes)

    def index_of(self, label: str) -> int:
        return self.classes.index(label)


@dataclass(frozen=True)
class FusionConfig:
    vit: ViTConfig = field(default_factory=ViTConfig)
    loc: LocConfig = field(default_factory=lambda: LocConfig(d_model=32, depth=2, heads=4))
    scheme: ClassScheme = field(default_factory=lambda: ClassScheme(("D", "P", "S", "V")))
    mode: str = "image+location"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got '{self.mode}'")

    @property
    def uses_image(self) -> bool:
        return self.mode in ("image-only", "image+location")

    @property
    def uses_location(self) -> bool:
        return self.mode in ("location-only", "image+location")

    @property
    def classifier_in_width(self) -> int:
        width = 0
        if self.uses_image:
            width += self.vit.embed_dim
        if self.uses_location:
            width += self.loc.d_model
        return width


@dataclass
class FusionModel:
    cfg: FusionConfig
    vit_params: object = None
    loc_params: object = None
    clf_w: Tensor = None   # [classifier_in_width, k]
    clf_b: Tensor = None   # [k]

    def named(self):
        if self.vit_params is not None:
            yield from self.vit_params.named("vit")
        if self.loc_params is not None:
            yield from self.loc_params.named("loc")
        yield "clf.w", self.clf_w, True
        yield "clf.b", self.clf_b, False

    def parameters(self):
        return [t for _, t, _ in self.named()]


def init_fusion_model(cfg: FusionConfig, seed: int = 0,
                      scale: float = 0.02) -> FusionModel:
    rng = np.random.default_rng(seed)
    model = FusionModel(cfg=cfg)
    if cfg.uses_image:
        model.vit_params = init_vit_params(cfg.vit, rng, scale)
    if cfg.uses_location:
        model.loc_params = init_loc_params(cfg.loc, rng, scale)
    model.clf_w = Tensor(
        rng.standard_normal((cfg.classifier_in_width, cfg.scheme.k)) * scale,
        requires_grad=True)
    model.clf_b = Tensor(np.zeros(cfg.scheme.k), requires_grad=True)
    return model


def fuse(v: Tensor, t: Tensor) -> Tensor:
    """Final vector: image latent then location latent."""
    return ad.concat([v, t], axis=0)


def latent(model: FusionModel, image=None,
           loc_code: LocationCode = None) -> Tensor:
    """Fused representation for one sample, before the classifier head;
    modalities must match the mode."""
    cfg = model.cfg
    if cfg.uses_image and image is None:
        raise ValueError(f"mode '{cfg.mode}' requires an image input")
    if cfg.uses_location and loc_code is None:
        raise ValueError(f"mode '{cfg.mode}' requires a location input")
    if cfg.mode == "image-only":
        return vit_forward(image, model.vit_params, cfg.vit)
    if cfg.mode == "location-only":
        return location_forward(loc_code, model.loc_params)
    return fuse(vit_forward(image, model.vit_params, cfg.vit),
                location_forward(loc_code, model.loc_params))


def forward(model: FusionModel, image=None, loc_code: LocationCode = None) -> Tensor:
    """Logits [k] for one sample; modalities must match the mode."""
    final = latent(model, image, loc_code)
    return ad.add(ad.matmul(final, model.clf_w), model.clf_b)


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    k = logits.shape[0]
    if not 0 <= label < k:
        raise ValueError(f"label {label} out of range for {k} classes")
    return ad.neg(ad.take(ad.log_softmax(logits), label))


def regularization(model: FusionModel, l1: float, l2: float) -> Tensor:
    if l1 == 0.0 and l2 == 0.0:
        return ad.tensor(0.0)
    terms = []
    for _, t, regularized in model.named():
        if not regularized:
            continue
        if l1:
            terms.append(ad.mul(ad.tsum(ad.absolute(t)), l1))
        if l2:
            terms.append(ad.mul(ad.tsum(ad.mul(t, t)), l2))
    total = terms[0]
    for term in terms[1:]:
        total = ad.add(total, term)
    return total


def loss(logits: Tensor, label: int, model: FusionModel,
         l1: float = 0.0, l2: float = 0.0) -> Tensor:
    """Per-sample objective: cross-entropy plus the model's penalties."""
    return ad.add(cross_entropy(logits, label), regularization(model, l1, l2))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-2
    batch_size: int = 8
    epochs: int = 10
    l1_reg: float = 0.0
    l2_reg: float = 0.0
    seed: int = 0
    momentum: float = 0.0

    def __post_init__(self):
        if self.lr < 0 or self.l1_reg < 0 or self.l2_reg < 0:
            raise ValueError("lr and penalties must be nonnegative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size >= 1 and epochs >= 0 required")


def train(model: FusionModel, data, cfg: TrainConfig):
    """Mini-batch SGD over (image, loc_code, label) samples.

    Returns per-epoch history: a list of dicts with keys epoch, loss,
    accuracy, where accuracy is the running train accuracy of the epoch
    (each sample scored by the model state of its own batch).
    """
    data = list(data)
    if not data:
        raise ValueError("train needs a nonempty dataset")
    k = model.cfg.scheme.k
    for _, _, label in data:
        if not 0 <= label < k:
            raise ValueError(f"label {label} out of range for {k} classes")
    params = list(model.named())
    velocity = {name: np.zeros_like(t.data) for name, t, _ in params}
    rng = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        correct = 0
        for start in range(0, len(data), cfg.batch_size):
            batch = [data[i] for i in order[start:start + cfg.batch_size]]
            for _, t, _ in params:
                t.zero_grad()
            ce_terms = []
            for image, loc_code, label in batch:
                logits = forward(model, image, loc_code)
                ce_terms.append(cross_entropy(logits, label))
                if _argmax_lowest(logits.data) == label:
                    correct += 1
            batch_ce = ad.mul(ad.tsum(ad.concat(
                [ad.reshape(t, (1,)) for t in ce_terms], axis=0)),
                1.0 / len(batch))
            total = ad.add(batch_ce, regularization(model, cfg.l1_reg, cfg.l2_reg))
            total.backward()
            epoch_loss += float(total.data) * len(batch)
            if cfg.lr != 0.0:
                for name, t, _ in params:
                    if t.grad is None:
                        continue
                    v = velocity[name]
                    v *= cfg.momentum
                    v += t.grad
                    t.data -= cfg.lr * v
        history.append({
            "epoch": epoch,
            "loss": epoch_loss / len(data),
            "accuracy": correct / len(data),
        })
    return history


def _argmax_lowest(x: np.ndarray) -> int:
    # np.argmax already returns the first (lowest) index on ties; keep the
    # tie rule in one named place
    return int(np.argmax(x))


def predict(model: FusionModel, batch):
    """Class indices and probabilities for (image, loc_code) pairs."""
    indices = np.zeros(len(batch), dtype=np.intp)
    k = model.cfg.scheme.k
    probs = np.zeros((len(batch), k))
    for i, sample in enumerate(batch):
        image, loc_code = sample[0], sample[1]
        logits = forward(model, image, loc_code)
        p = ad.softmax(logits).data
        probs[i] = p
        indices[i] = _argmax_lowest(p)
    return indices, probs
