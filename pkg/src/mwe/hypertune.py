"""Hyperparameter search space, position codec, and the tuning loop.

The tuned space follows the seven-knob table the optimizers were run
against: filters_size 32..256, kernel_size 3..9, then learning_rate,
l2_reg, l1_reg each 1e-5..1e-2, batch_size 32..128, epochs 10..100.
The two CNN-flavored names map onto this architecture explicitly:
filters_size becomes the ViT embedding width (rounded to a multiple of
the head count) and kernel_size becomes the patch size (rounded to the
nearest admissible divisor of the image size, ties upward). The three
rate knobs live in the position vector as log10 values so the search
moves uniformly across decades.

Tune fitness is 1 - macro-F1 on the validation split after training a
model with the decoded config. Candidate 0 of the initial population is
seeded with the incumbent (template) config, so the tuned result can
never score worse than the default on the same fitness. Decoded configs
are cached so duplicate positions never retrain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import swarm as sw
from .fusion import FusionConfig, TrainConfig, init_fusion_model, predict, train
from .metrics import MetricsReport, confusion, metrics
from .vision import ViTConfig

# (name, lower, upper, kind); kind: int | log. Order fixed; positions for
# log dims hold log10 of the value.
SPACE_TABLE = (
    ("filters_size", 32, 256, "int"),
    ("kernel_size", 3, 9, "int"),
    ("learning_rate", 1e-5, 1e-2, "log"),
    ("l2_reg", 1e-5, 1e-2, "log"),
    ("l1_reg", 1e-5, 1e-2, "log"),
    ("batch_size", 32, 128, "int"),
    ("epochs", 10, 100, "int"),
)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class HyperSpace:
    """Search space bound to one architecture context."""

    heads: int = 4
    image_size: int = 32
    wavelet_levels: int = 0   # 0 = augmentation off
    table: tuple = SPACE_TABLE

    def bounds(self) -> sw.Bounds:
        lo, hi, flags = [], [], []
        for _, lower, upper, kind in self.table:
            if kind == "log":
                lo.append(math.log10(lower))
                hi.append(math.log10(upper))
                flags.append(False)
            else:
                lo.append(float(lower))
                hi.append(float(upper))
                flags.append(True)
        return sw.Bounds(np.array(lo), np.array(hi), np.array(flags))

    def admissible_patch_sizes(self):
        align = 2 ** self.wavelet_levels if self.wavelet_levels else 1
        sizes = [p for p in range(1, self.image_size + 1)
                 if self.image_size % p == 0 and p % align == 0]
        if not sizes:
            raise ValueError(
                f"no admissible patch size divides image_size "
                f"{self.image_size} with alignment {align}"
            )
        return sizes

    def _decode_embed(self, raw: float, lower: int, upper: int) -> int:
        h = self.heads
        d = h * _round_half_up(raw / h)
        while d < lower:
            d += h
        while d > upper:
            d -= h
        if d < lower:
            raise ValueError(
                f"heads={h} admits no embedding width inside [{lower}, {upper}]"
            )
        return d

    def _decode_patch(self, raw: float) -> int:
        sizes = self.admissible_patch_sizes()
        best = sizes[0]
        best_gap = abs(raw - best)
        for p in sizes[1:]:
            gap = abs(raw - p)
            if gap < best_gap or (gap == best_gap and p > best):
                best, best_gap = p, gap
        return best

    def decode(self, position: np.ndarray) -> dict:
        position = np.asarray(position, dtype=np.float64)
        b = self.bounds()
        if position.shape != (b.dim,):
            raise ValueError(f"position has shape {position.shape}, "
                             f"space has {b.dim} dimensions")
        if not b.contains(position):
            raise ValueError(f"position {position} outside the space bounds")
        out = {}
        for coord, (name, lower, upper, kind) in zip(position, self.table):
            if kind == "log":
                out[name] = 10.0 ** coord
            elif name == "filters_size":
                out["embed_dim"] = self._decode_embed(coord, lower, upper)
            elif name == "kernel_size":
                out["patch_size"] = self._decode_patch(coord)
            else:
                out[name] = min(max(_round_half_up(coord), lower), upper)
        return out

    def encode(self, config: dict) -> np.ndarray:
        """Inverse of decode for seeding; exact for admissible configs.

        Out-of-space values clamp to the nearest bound, so a default
        config with zero penalties seeds at the smallest penalty the
        space can express.
        """
        key_map = {"filters_size": "embed_dim", "kernel_size": "patch_size"}
        coords = []
        for name, lower, _, kind in self.table:
            value = config[key_map.get(name, name)]
            if kind == "log":
                coords.append(math.log10(max(value, lower)))
            else:
                coords.append(float(value))
        return self.bounds().clamp(np.array(coords))


def config_key(decoded: dict) -> tuple:
    """Canonical cache key; rates keyed at 12 significant digits."""
    items = []
    for k in sorted(decoded):
        v = decoded[k]
        items.append((k, float(f"{v:.12g}") if isinstance(v, float) else v))
    return tuple(items)


class FitnessCache:
    def __init__(self):
        self._store = {}
        self.hits = 0
        self.misses = 0

    def get_or_eval(self, decoded: dict, fn):
        key = config_key(decoded)
        if key in self._store:
            self.hits += 1
            return self._store[key]
        self.misses += 1
        value = fn()
        self._store[key] = value
        return value


@dataclass
class TuneResult:
    best_config: dict
    best_fitness: float
    report: MetricsReport
    trace: list
    evaluations: int
    cache_hits: int


def _apply_decoded(template: FusionConfig, decoded: dict,
                   seed: int) -> tuple:
    vit = template.vit
    new_vit = ViTConfig(
        image_size=vit.image_size, patch_size=decoded["patch_size"],
        channels=vit.channels, embed_dim=decoded["embed_dim"],
        depth=vit.depth, heads=vit.heads, wavelet=vit.wavelet,
        wavelet_mode=vit.wavelet_mode)
    fusion_cfg = replace(template, vit=new_vit)
    train_cfg = TrainConfig(
        lr=decoded["learning_rate"], batch_size=decoded["batch_size"],
        epochs=decoded["epochs"], l1_reg=decoded["l1_reg"],
        l2_reg=decoded["l2_reg"], seed=seed)
    return fusion_cfg, train_cfg


def validation_macro_f1(fusion_cfg: FusionConfig, train_cfg: TrainConfig,
                        train_set, val_set, model_seed: int) -> tuple:
    """Train one model, score the validation split; returns (f1, report)."""
    model = init_fusion_model(fusion_cfg, seed=model_seed)
    train(model, train_set, train_cfg)
    pairs = [(s[0], s[1]) for s in val_set]
    truth = [s[2] for s in val_set]
    pred, _ = predict(model, pairs)
    rep = metrics(confusion(truth, pred, fusion_cfg.scheme.k))
    return rep.macro_f1, rep


def template_decoded(template: FusionConfig, train_cfg: TrainConfig) -> dict:
    """The incumbent config expressed in the tuned space's vocabulary."""
    return {
        "embed_dim": template.vit.embed_dim,
        "patch_size": template.vit.patch_size,
        "learning_rate": train_cfg.lr,
        "l2_reg": train_cfg.l2_reg,
        "l1_reg": train_cfg.l1_reg,
        "batch_size": train_cfg.batch_size,
        "epochs": train_cfg.epochs,
    }


def tune(algorithm: str, train_set, val_set, template: FusionConfig,
         incumbent_train: TrainConfig, params: sw.OptimizerParams = None,
         seed: int = 0, space: HyperSpace = None,
         objective: str = "train") -> TuneResult:
    """Swarm-search the seven-knob space; fitness = 1 - validation macro-F1.

    objective="sphere" swaps in a pure function of the position (a test
    hook for exercising the loop without training); the final report is
    only retrained the normal way when a dataset is supplied, and callers
    of the sphere stub ignore the report.
    """
    if params is None:
        params = sw.OptimizerParams(algorithm=algorithm)
    elif params.algorithm != algorithm:
        params = sw.OptimizerParams(**{**params.__dict__, "algorithm": algorithm})
    if space is None:
        space = HyperSpace(heads=template.vit.heads,
                           image_size=template.vit.image_size,
                           wavelet_levels=(template.vit.wavelet.levels
                                           if template.vit.wavelet else 0))
    bounds = space.bounds()
    cache = FitnessCache()

    if objective == "sphere":
        norm = lambda x: (x - bounds.lower) / bounds.span
        fitness = lambda pos: float((norm(pos) ** 2).mean())
    elif objective == "train":
        if not train_set or not val_set:
            raise ValueError("tune needs nonempty train and validation splits")

        def fitness(pos):
            decoded = space.decode(pos)

            def run():
                fusion_cfg, train_cfg = _apply_decoded(template, decoded, seed)
                f1, _ = validation_macro_f1(fusion_cfg, train_cfg,
                                            train_set, val_set, model_seed=seed)
                return 1.0 - f1

            return cache.get_or_eval(decoded, run)
    else:
        raise ValueError(f"unknown tune objective '{objective}'")

    incumbent = space.encode(template_decoded(template, incumbent_train))
    result = sw.optimize(fitness, bounds, params, seed=seed,
                         warm_starts=[incumbent])
    best_config = space.decode(result.position)

    if objective == "train":
        fusion_cfg, train_cfg = _apply_decoded(template, best_config, seed)
        _, report = validation_macro_f1(fusion_cfg, train_cfg,
                                        train_set, val_set, model_seed=seed)
    else:
        report = None
    return TuneResult(best_config=best_config, best_fitness=result.fitness,
                      report=report, trace=result.trace,
                      evaluations=result.evaluations, cache_hits=cache.hits)
