"""Scikit-learn style estimators over the multimodal classifier.

`WoundClassifier` follows the fit/predict/predict_proba/score protocol
with `get_params`/`set_params` from sklearn's BaseEstimator, so it can
be cloned, grid-searched, and cross-validated with standard tooling.
Input X is a dict with keys per the active mode:

    {"image": float array [n, S, S, C], "location": int array [n]}

image-only models ignore (and do not require) the location key, and
location-only models the image key. y holds class letters from the
configured scheme, or integer indices into it; predictions come back in
whatever style fit received.

`SwarmSearch` wraps a WoundClassifier template and tunes the seven-knob
space with one of the three optimizers, then refits the best config on
the full data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import hypertune as ht
from .data import channel_stats, standardize
from .fusion import (ClassScheme, FusionConfig, TrainConfig,
                     init_fusion_model, latent, predict, train)
from .location import LocConfig, encode_location
from .swarm import OptimizerParams
from .vision import ViTConfig
from .wavelet import WaveletSpec


def check_images(images, image_size, channels) -> np.ndarray:
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[1:] != (image_size, image_size, channels):
        raise ValueError(f"images must have shape "
                         f"[n, {image_size}, {image_size}, {channels}], "
                         f"got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("images contain non-finite values")
    return arr


def check_locations(locations, n, body_map):
    arr = np.asarray(locations)
    if arr.shape != (n,):
        raise ValueError(f"locations must have shape [{n}], got {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"locations must be integers, got dtype {arr.dtype}")
    return [encode_location(int(v), body_map) for v in arr]


class WoundClassifier(BaseEstimator, ClassifierMixin):
    """Wavelet-augmented ViT + binary-location transformer classifier."""

    def __init__(self, mode="image+location",
                 classes=("D", "P", "S", "V", "N", "BG"),
                 image_size=32, patch_size=4, channels=3, embed_dim=64,
                 depth=4, heads=4, wavelet_family=None, wavelet_levels=1,
                 wavelet_mode="concat", loc_d_model=64, loc_depth=2,
                 loc_heads=4, body_map="original-484", lr=1e-2,
                 batch_size=8, epochs=10, l1_reg=0.0, l2_reg=0.0,
                 momentum=0.0, normalize=True, seed=0):
        self.mode = mode
        self.classes = classes
        self.image_size = image_size
        self.patch_size = patch_size
        self.channels = channels
        self.embed_dim = embed_dim
        self.depth = depth
        self.heads = heads
        self.wavelet_family = wavelet_family
        self.wavelet_levels = wavelet_levels
        self.wavelet_mode = wavelet_mode
        self.loc_d_model = loc_d_model
        self.loc_depth = loc_depth
        self.loc_heads = loc_heads
        self.body_map = body_map
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.l1_reg = l1_reg
        self.l2_reg = l2_reg
        self.momentum = momentum
        self.normalize = normalize
        self.seed = seed

    # config assembly -------------------------------------------------

    def _fusion_config(self) -> FusionConfig:
        wavelet = (WaveletSpec(self.wavelet_family, self.wavelet_levels)
                   if self.wavelet_family else None)
        return FusionConfig(
            vit=ViTConfig(image_size=self.image_size,
                          patch_size=self.patch_size,
                          channels=self.channels, embed_dim=self.embed_dim,
                          depth=self.depth, heads=self.heads,
                          wavelet=wavelet, wavelet_mode=self.wavelet_mode),
            loc=LocConfig(d_model=self.loc_d_model, depth=self.loc_depth,
                          heads=self.loc_heads),
            scheme=ClassScheme(tuple(self.classes)),
            mode=self.mode,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size,
                           epochs=self.epochs, l1_reg=self.l1_reg,
                           l2_reg=self.l2_reg, seed=self.seed,
                           momentum=self.momentum)

    # input plumbing --------------------------------------------------

    def _encode_labels(self, y, scheme):
        y = list(y)
        if all(isinstance(v, str) for v in y):
            bad = sorted({v for v in y if v not in scheme.classes})
            if bad:
                raise ValueError(f"labels {bad} not in scheme "
                                 f"{scheme.classes}")
            return [scheme.classes.index(v) for v in y], "names"
        indices = [int(v) for v in y]
        bad = sorted({v for v in indices if not 0 <= v < scheme.k})
        if bad:
            raise ValueError(f"label indices {bad} out of range for "
                             f"{scheme.k} classes")
        return indices, "indices"

    def _split_X(self, X, cfg, n_expected=None):
        """Validated (images, loc_codes) per the mode; unused side None."""
        if not isinstance(X, dict):
            raise ValueError("X must be a dict with 'image' and/or "
                             "'location' keys")
        images = loc_codes = None
        if cfg.uses_image:
            if X.get("image") is None:
                raise ValueError(f"mode '{cfg.mode}' needs X['image']")
            images = check_images(X["image"], self.image_size, self.channels)
            n = images.shape[0]
        if cfg.uses_location:
            if X.get("location") is None:
                raise ValueError(f"mode '{cfg.mode}' needs X['location']")
            n = (images.shape[0] if images is not None
                 else len(np.asarray(X["location"])))
            loc_codes = check_locations(X["location"], n, self.body_map)
        n = images.shape[0] if images is not None else len(loc_codes)
        if n_expected is not None and n != n_expected:
            raise ValueError(f"X has {n} samples, y has {n_expected}")
        return images, loc_codes, n

    def _prepared_images(self, images):
        if images is None:
            return None
        if self.normalize:
            return standardize(images, self.channel_mean_, self.channel_std_)
        return images

    def _pairs(self, X):
        cfg = self.model_.cfg
        images, loc_codes, n = self._split_X(X, cfg)
        images = self._prepared_images(images)
        return [(images[i] if images is not None else None,
                 loc_codes[i] if loc_codes is not None else None)
                for i in range(n)], n

    # sklearn protocol ------------------------------------------------

    def fit(self, X, y):
        cfg = self._fusion_config()
        labels, style = self._encode_labels(y, cfg.scheme)
        images, loc_codes, n = self._split_X(X, cfg,
                                             n_expected=len(labels))
        if n == 0:
            raise ValueError("fit needs at least one sample")
        if images is not None and self.normalize:
            self.channel_mean_, self.channel_std_ = channel_stats(images)
        else:
            self.channel_mean_ = self.channel_std_ = None
        images = self._prepared_images(images)
        samples = [(images[i] if images is not None else None,
                    loc_codes[i] if loc_codes is not None else None,
                    labels[i]) for i in range(n)]
        self.model_ = init_fusion_model(cfg, seed=self.seed)
        self.history_ = train(self.model_, samples, self._train_config())
        self.classes_ = np.array(cfg.scheme.classes)
        self.label_style_ = style
        return self

    def predict_proba(self, X):
        pairs, _ = self._pairs(X)
        _, probs = predict(self.model_, pairs)
        return probs

    def predict(self, X):
        pairs, _ = self._pairs(X)
        indices, _ = predict(self.model_, pairs)
        if self.label_style_ == "names":
            return self.classes_[indices]
        return indices

    def transform(self, X):
        """Fused pre-classifier representations, [n, latent width]."""
        pairs, n = self._pairs(X)
        out = np.zeros((n, self.model_.cfg.classifier_in_width))
        for i, (img, code) in enumerate(pairs):
            out[i] = latent(self.model_, img, code).data
        return out

    def score(self, X, y):
        labels, _ = self._encode_labels(y, self.model_.cfg.scheme)
        pairs, _ = self._pairs(X)
        indices, _ = predict(self.model_, pairs)
        return float(np.mean(indices == np.asarray(labels)))


class SwarmSearch(BaseEstimator):
    """Tune a WoundClassifier template with one of the optimizers.

    fit() carves a stratified validation slice off the data, searches
    the seven-knob space against 1 - validation macro-F1, then refits
    the best configuration on all of the data as best_estimator_.
    """

    def __init__(self, estimator=None, algorithm="igwo", pop_size=6,
                 max_iter=5, val_fraction=0.25, table=None, seed=0):
        self.estimator = estimator
        self.algorithm = algorithm
        self.pop_size = pop_size
        self.max_iter = max_iter
        self.val_fraction = val_fraction
        self.table = table
        self.seed = seed

    def _val_split(self, labels, rng):
        """Stratified index split; at least one sample per class each side."""
        labels = np.asarray(labels)
        train_idx, val_idx = [], []
        for cls in np.unique(labels):
            idx = np.flatnonzero(labels == cls)
            if len(idx) < 2:
                raise ValueError(f"class {cls} needs at least 2 samples "
                                 f"to carve a validation slice")
            idx = idx[rng.permutation(len(idx))]
            n_val = min(max(1, round(len(idx) * self.val_fraction)),
                        len(idx) - 1)
            val_idx.extend(idx[:n_val])
            train_idx.extend(idx[n_val:])
        return sorted(train_idx), sorted(val_idx)

    def fit(self, X, y):
        base = self.estimator if self.estimator is not None \
            else WoundClassifier()
        cfg = base._fusion_config()
        labels, style = base._encode_labels(y, cfg.scheme)
        images, loc_codes, n = base._split_X(X, cfg, n_expected=len(labels))
        rng = np.random.default_rng(self.seed)
        train_idx, val_idx = self._val_split(labels, rng)
        if images is not None and base.normalize:
            # stats come from the tune-train slice only
            mean, std = channel_stats(images[train_idx])
            images = standardize(images, mean, std)
        samples = [(images[i] if images is not None else None,
                    loc_codes[i] if loc_codes is not None else None,
                    labels[i]) for i in range(n)]
        space = ht.HyperSpace(
            heads=base.heads, image_size=base.image_size,
            wavelet_levels=(base.wavelet_levels if base.wavelet_family
                            else 0),
            **({"table": tuple(self.table)} if self.table else {}))
        result = ht.tune(
            self.algorithm,
            [samples[i] for i in train_idx],
            [samples[i] for i in val_idx],
            cfg, base._train_config(),
            params=OptimizerParams(algorithm=self.algorithm,
                                   pop_size=self.pop_size,
                                   max_iter=self.max_iter),
            seed=self.seed, space=space)
        self.tune_result_ = result
        self.best_params_ = dict(result.best_config)
        self.best_fitness_ = result.best_fitness
        best = base.__class__(**base.get_params())
        best.set_params(
            embed_dim=result.best_config["embed_dim"],
            patch_size=result.best_config["patch_size"],
            lr=result.best_config["learning_rate"],
            l2_reg=result.best_config["l2_reg"],
            l1_reg=result.best_config["l1_reg"],
            batch_size=result.best_config["batch_size"],
            epochs=result.best_config["epochs"])
        self.best_estimator_ = best.fit(X, y)
        return self

    def predict(self, X):
        return self.best_estimator_.predict(X)

    def score(self, X, y):
        return self.best_estimator_.score(X, y)
