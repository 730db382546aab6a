"""Image branch: patchify, embed, encode, read out the class token.

The patch embedding is a bias-free linear map E applied to each
flattened patch row; a learned class token is prepended and learned
positional embeddings are added to all N+1 rows. When wavelet
augmentation is on, per-patch coefficient features either extend the
patch row before E ("concat") or stand in for the raw pixels
("replace"). The branch output, the class-token row after the final
layer norm, is called the image latent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import (AttentionConfig, EncoderLayerParams, encoder_stack,
                        init_encoder_layer)
from .autodiff import Tensor
from .wavelet import WaveletSpec, wavelet_patch_features

_WAVELET_MODES = ("concat", "replace")


@dataclass(frozen=True)
class ViTConfig:
    image_size: int = 32
    patch_size: int = 4
    channels: int = 3
    embed_dim: int = 64
    depth: int = 4
    heads: int = 4
    wavelet: WaveletSpec | None = None
    wavelet_mode: str = "concat"

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image_size {self.image_size} not divisible by "
                f"patch_size {self.patch_size}"
            )
        AttentionConfig(self.embed_dim, self.heads)  # divisibility check
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.wavelet is not None and self.wavelet_mode not in _WAVELET_MODES:
            raise ValueError(
                f"wavelet_mode must be one of {_WAVELET_MODES}, "
                f"got '{self.wavelet_mode}'"
            )
        if self.wavelet is not None and self.patch_size % (2 ** self.wavelet.levels):
            raise ValueError(
                f"patch_size {self.patch_size} not divisible by "
                f"2^levels = {2 ** self.wavelet.levels}"
            )

    @property
    def patch_count(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def patch_len(self) -> int:
        return self.patch_size ** 2 * self.channels

    @property
    def embed_in_width(self) -> int:
        # wavelet features are always patch_len wide (coefficient count
        # equals pixel count), so concat doubles the row
        if self.wavelet is None:
            return self.patch_len
        return 2 * self.patch_len if self.wavelet_mode == "concat" else self.patch_len


@dataclass
class ViTParams:
    embed: Tensor = None     # [embed_in_width, D], no bias
    e_pos: Tensor = None     # [N+1, D]
    cls: Tensor = None       # [1, D]
    layers: list = field(default_factory=list)
    ln_g: Tensor = None
    ln_b: Tensor = None

    def named(self, prefix: str = "vit"):
        yield f"{prefix}.embed", self.embed, True
        yield f"{prefix}.e_pos", self.e_pos, False
        yield f"{prefix}.cls", self.cls, False
        for i, layer in enumerate(self.layers):
            yield from layer.named(f"{prefix}.enc{i}")
        yield f"{prefix}.ln.g", self.ln_g, False
        yield f"{prefix}.ln.b", self.ln_b, False


def init_vit_params(cfg: ViTConfig, rng: np.random.Generator,
                    scale: float = 0.02) -> ViTParams:
    d = cfg.embed_dim
    att_cfg = AttentionConfig(d, cfg.heads)
    p = ViTParams()
    p.embed = Tensor(rng.standard_normal((cfg.embed_in_width, d)) * scale,
                     requires_grad=True)
    p.e_pos = Tensor(rng.standard_normal((cfg.patch_count + 1, d)) * scale,
                     requires_grad=True)
    p.cls = Tensor(rng.standard_normal((1, d)) * scale, requires_grad=True)
    p.layers = [init_encoder_layer(att_cfg, rng, scale) for _ in range(cfg.depth)]
    p.ln_g = Tensor(np.ones(d), requires_grad=True)
    p.ln_b = Tensor(np.zeros(d), requires_grad=True)
    return p


def patchify(image: np.ndarray, cfg: ViTConfig) -> np.ndarray:
    """[H, W, C] -> [N, P*P*C]; patches ordered row-major over the grid,
    each patch flattened row-major with channels fastest."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    h, w, c = image.shape
    p = cfg.patch_size
    if h != cfg.image_size or w != cfg.image_size or c != cfg.channels:
        raise ValueError(
            f"image shape {image.shape} does not match config "
            f"({cfg.image_size}, {cfg.image_size}, {cfg.channels})"
        )
    g = h // p
    out = np.zeros((g * g, p * p * c))
    for r in range(g):
        for col in range(g):
            block = image[r * p:(r + 1) * p, col * p:(col + 1) * p, :]
            out[r * g + col] = block.ravel()
    return out


def embed(patches: np.ndarray, wavelet_features, p: ViTParams,
          cfg: ViTConfig) -> Tensor:
    """Rows through E, class token prepended, positions added -> [(N+1), D]."""
    if cfg.wavelet is None:
        rows = patches
    elif cfg.wavelet_mode == "concat":
        rows = np.concatenate([patches, wavelet_features], axis=1)
    else:
        rows = wavelet_features
    if rows.shape[1] != p.embed.shape[0]:
        raise ValueError(
            f"token width {rows.shape[1]} does not match embedding "
            f"input width {p.embed.shape[0]}"
        )
    tokens = ad.matmul(ad.tensor(rows), p.embed)
    z0 = ad.concat([p.cls, tokens], axis=0)
    return ad.add(z0, p.e_pos)


def vit_forward(image: np.ndarray, p: ViTParams, cfg: ViTConfig) -> Tensor:
    """Image latent of one image: class-token row after the final norm."""
    patches = patchify(image, cfg)
    feats = None
    if cfg.wavelet is not None:
        feats = wavelet_patch_features(image, cfg.patch_size, cfg.wavelet)
    z = embed(patches, feats, p, cfg)
    z = encoder_stack(z, p.layers)
    z = ad.layer_norm(z, p.ln_g, p.ln_b)
    return ad.reshape(ad.index_rows(z, [0]), (cfg.embed_dim,))
