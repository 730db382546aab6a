"""Experiment configuration: a documented YAML schema, validated with
field-path diagnostics.

Schema (defaults in parentheses; sections may be omitted entirely when
every field inside is defaulted):

    mode: image-only | location-only | image+location (image+location)
    classes: [D, P, S, V, N, BG]        subset, canonical order applied
    seed: 0                             MWE_SEED env var overrides; a
                                        --seed flag overrides both
    out: runs/exp                       artifact directory
    data:
      root: .                           image paths resolve against this
      manifest: manifest.csv
      body_map: original-484 | simplified-323 (original-484)
      image_size: 32
      channels: 3
      normalize: true                   per-channel standardization
    model:
      patch_size: 4
      embed_dim: 64
      depth: 4
      heads: 4
      wavelet:                          omit or null = no augmentation
        family: haar | db2
        levels: 1
        mode: concat | replace (concat)
      location:
        d_model: 64
        depth: 2
        heads: 4
    train:
      lr: 0.01
      batch_size: 8
      epochs: 10
      l1_reg: 0.0
      l2_reg: 0.0
      momentum: 0.0
    augment:
      enabled: false
      rotations: [90, 180, 270]
      flip_horizontal: true
      flip_vertical: true
      brightness_delta: 0.1
      contrast_range: [0.8, 1.25]
      multiplier: 4
    split:
      fractions: [0.7, 0.15, 0.15]
      stratified: true
      seed: 0
    optimizer:
      algorithm: igwo | fox | mgto (igwo)
      pop_size: 20
      max_iter: 100
      objective: train | sphere (train)  sphere is a data-free test hook
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import yaml

from .data import AugmentationSpec, SplitSpec
from .fusion import ClassScheme, FusionConfig, TrainConfig
from .location import BODY_MAPS, LocConfig
from .swarm import OptimizerParams
from .vision import ViTConfig
from .wavelet import WaveletSpec


class ConfigError(ValueError):
    """Invalid experiment config; message names the offending field."""


@dataclass
class ExperimentConfig:
    fusion: FusionConfig
    train: TrainConfig
    augment: AugmentationSpec | None
    split: SplitSpec
    optimizer: OptimizerParams
    objective: str
    seed: int
    out_dir: str
    data_root: str
    manifest: str
    body_map: str
    normalize: bool


def _section(doc, name, allowed):
    sec = doc.pop(name, {}) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping, got "
                          f"{type(sec).__name__}")
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ConfigError(f"{name}.{sorted(unknown)[0]}: unknown key")
    return sec


def _get(sec, path, key, default, kind):
    value = sec.get(key, default)
    where = f"{path}.{key}" if path else key
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{where}: expected int, got bool")
    if not isinstance(value, kind):
        raise ConfigError(f"{where}: expected {kind.__name__}, got "
                          f"{type(value).__name__} ({value!r})")
    return value


def load_config(path, seed_override=None) -> ExperimentConfig:
    """Parse and validate; cross-field constraints from the model
    modules are re-checked here so bad configs fail before any work."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")

    mode = _get(doc, "", "mode", "image+location", str)
    classes = doc.pop("classes", ["D", "P", "S", "V", "N", "BG"])
    if (not isinstance(classes, list)
            or not all(isinstance(c, str) for c in classes)):
        raise ConfigError("classes: expected a list of label strings")
    seed = _get(doc, "", "seed", 0, int)
    if seed_override is not None:
        seed = int(seed_override)
    elif os.environ.get("MWE_SEED"):
        try:
            seed = int(os.environ["MWE_SEED"])
        except ValueError as exc:
            raise ConfigError(f"MWE_SEED: {os.environ['MWE_SEED']!r} is "
                              f"not an integer") from exc
    out_dir = _get(doc, "", "out", "runs/exp", str)

    data = _section(doc, "data", ["root", "manifest", "body_map",
                                  "image_size", "channels", "normalize"])
    data_root = _get(data, "data", "root", ".", str)
    manifest = _get(data, "data", "manifest", "manifest.csv", str)
    body_map = _get(data, "data", "body_map", "original-484", str)
    if body_map not in BODY_MAPS:
        raise ConfigError(f"data.body_map: '{body_map}' is not one of "
                          f"{sorted(BODY_MAPS)}")
    image_size = _get(data, "data", "image_size", 32, int)
    channels = _get(data, "data", "channels", 3, int)
    normalize = _get(data, "data", "normalize", True, bool)

    model = _section(doc, "model", ["patch_size", "embed_dim", "depth",
                                    "heads", "wavelet", "location"])
    wavelet_doc = model.get("wavelet")
    wavelet, wavelet_mode = None, "concat"
    if wavelet_doc is not None:
        if not isinstance(wavelet_doc, dict):
            raise ConfigError("model.wavelet: expected a mapping or null")
        unknown = set(wavelet_doc) - {"family", "levels", "mode"}
        if unknown:
            raise ConfigError(f"model.wavelet.{sorted(unknown)[0]}: "
                              f"unknown key")
        try:
            wavelet = WaveletSpec(
                _get(wavelet_doc, "model.wavelet", "family", "haar", str),
                _get(wavelet_doc, "model.wavelet", "levels", 1, int))
        except ValueError as exc:
            raise ConfigError(f"model.wavelet: {exc}") from exc
        wavelet_mode = _get(wavelet_doc, "model.wavelet", "mode",
                            "concat", str)
    loc_doc = model.get("location") or {}
    if not isinstance(loc_doc, dict):
        raise ConfigError("model.location: expected a mapping")
    unknown = set(loc_doc) - {"d_model", "depth", "heads"}
    if unknown:
        raise ConfigError(f"model.location.{sorted(unknown)[0]}: "
                          f"unknown key")

    try:
        fusion = FusionConfig(
            vit=ViTConfig(
                image_size=image_size,
                patch_size=_get(model, "model", "patch_size", 4, int),
                channels=channels,
                embed_dim=_get(model, "model", "embed_dim", 64, int),
                depth=_get(model, "model", "depth", 4, int),
                heads=_get(model, "model", "heads", 4, int),
                wavelet=wavelet, wavelet_mode=wavelet_mode),
            loc=LocConfig(
                d_model=_get(loc_doc, "model.location", "d_model", 64, int),
                depth=_get(loc_doc, "model.location", "depth", 2, int),
                heads=_get(loc_doc, "model.location", "heads", 4, int)),
            scheme=ClassScheme(tuple(classes)),
            mode=mode,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model: {exc}") from exc

    tr = _section(doc, "train", ["lr", "batch_size", "epochs", "l1_reg",
                                 "l2_reg", "momentum"])
    try:
        train = TrainConfig(
            lr=_get(tr, "train", "lr", 1e-2, float),
            batch_size=_get(tr, "train", "batch_size", 8, int),
            epochs=_get(tr, "train", "epochs", 10, int),
            l1_reg=_get(tr, "train", "l1_reg", 0.0, float),
            l2_reg=_get(tr, "train", "l2_reg", 0.0, float),
            momentum=_get(tr, "train", "momentum", 0.0, float),
            seed=seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from exc

    aug = _section(doc, "augment", ["enabled", "rotations",
                                    "flip_horizontal", "flip_vertical",
                                    "brightness_delta", "contrast_range",
                                    "multiplier"])
    augment = None
    if _get(aug, "augment", "enabled", False, bool):
        try:
            augment = AugmentationSpec(
                rotations=tuple(aug.get("rotations", (90, 180, 270))),
                flip_horizontal=_get(aug, "augment", "flip_horizontal",
                                     True, bool),
                flip_vertical=_get(aug, "augment", "flip_vertical",
                                   True, bool),
                brightness_delta=_get(aug, "augment", "brightness_delta",
                                      0.1, float),
                contrast_range=tuple(aug.get("contrast_range",
                                             (0.8, 1.25))),
                multiplier=_get(aug, "augment", "multiplier", 4, int))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"augment: {exc}") from exc

    sp = _section(doc, "split", ["fractions", "stratified", "seed"])
    try:
        split = SplitSpec(
            fractions=tuple(sp.get("fractions", (0.7, 0.15, 0.15))),
            stratified=_get(sp, "split", "stratified", True, bool),
            seed=_get(sp, "split", "seed", 0, int))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"split: {exc}") from exc

    opt = _section(doc, "optimizer", ["algorithm", "pop_size", "max_iter",
                                      "objective"])
    algorithm = _get(opt, "optimizer", "algorithm", "igwo", str)
    objective = _get(opt, "optimizer", "objective", "train", str)
    if objective not in ("train", "sphere"):
        raise ConfigError(f"optimizer.objective: '{objective}' is not "
                          f"train or sphere")
    try:
        optimizer = OptimizerParams(
            algorithm=algorithm,
            pop_size=_get(opt, "optimizer", "pop_size", 20, int),
            max_iter=_get(opt, "optimizer", "max_iter", 100, int))
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc

    unknown = set(doc) - {"mode", "seed", "out"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level key")

    return ExperimentConfig(fusion=fusion, train=train, augment=augment,
                            split=split, optimizer=optimizer,
                            objective=objective, seed=seed, out_dir=out_dir,
                            data_root=data_root, manifest=manifest,
                            body_map=body_map, normalize=normalize)
