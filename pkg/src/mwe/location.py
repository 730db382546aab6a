"""Location branch: 9-bit binary codec and the location transformer.

A body-map location id (dense integer against one of two anatomical
vocabularies) is expanded to 9 bits, most-significant first. Each bit
becomes one token: a row of a 2-entry embedding table plus a per-position
embedding. The 9-token sequence runs through the shared encoder stack,
is mean-pooled over positions, and layer-normed. That vector is the
location latent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import (AttentionConfig, encoder_stack, init_encoder_layer,
                        scaled_dot_attention)
from .autodiff import Tensor

N_BITS = 9

BODY_MAPS = {
    "original-484": 484,
    "simplified-323": 323,
}


@dataclass(frozen=True)
class LocationCode:
    id: int
    bits: tuple
    body_map: str


def encode_location(id: int, body_map: str = "original-484") -> LocationCode:
    """Exact 9-bit MSB-first expansion, range-checked against the map."""
    if body_map not in BODY_MAPS:
        raise ValueError(f"unknown body map '{body_map}', "
                         f"expected one of {sorted(BODY_MAPS)}")
    bound = BODY_MAPS[body_map]
    if not 0 <= id < bound:
        raise ValueError(
            f"location id {id} out of range for {body_map} "
            f"(valid ids are 0..{bound - 1})"
        )
    bits = tuple((id >> (N_BITS - 1 - k)) & 1 for k in range(N_BITS))
    return LocationCode(id=id, bits=bits, body_map=body_map)


def decode_location(bits) -> int:
    bits = tuple(int(b) for b in bits)
    if len(bits) != N_BITS:
        raise ValueError(f"expected {N_BITS} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0 or 1, got {bits}")
    return sum(b << (N_BITS - 1 - k) for k, b in enumerate(bits))


def load_body_map(path) -> dict:
    """Vocabulary file: one `id<TAB>name` line per location, ids dense from 0."""
    names = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                id_str, name = line.split("\t", 1)
                idx = int(id_str)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'id<TAB>name'")
            if idx in names:
                raise ValueError(f"{path}:{lineno}: duplicate id {idx}")
            names[idx] = name
    if sorted(names) != list(range(len(names))):
        raise ValueError(f"{path}: ids must be dense from 0")
    return names


@dataclass(frozen=True)
class LocConfig:
    d_model: int = 512
    depth: int = 6
    heads: int = 8

    def __post_init__(self):
        AttentionConfig(self.d_model, self.heads)
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


@dataclass
class LocParams:
    bit_embed: Tensor = None   # [2, d_model]
    pos: Tensor = None         # [N_BITS, d_model]
    layers: list = field(default_factory=list)
    ln_g: Tensor = None
    ln_b: Tensor = None

    def named(self, prefix: str = "loc"):
        yield f"{prefix}.bit_embed", self.bit_embed, True
        yield f"{prefix}.pos", self.pos, False
        for i, layer in enumerate(self.layers):
            yield from layer.named(f"{prefix}.enc{i}")
        yield f"{prefix}.ln.g", self.ln_g, False
        yield f"{prefix}.ln.b", self.ln_b, False


def init_loc_params(cfg: LocConfig, rng: np.random.Generator,
                    scale: float = 0.02) -> LocParams:
    d = cfg.d_model
    att_cfg = AttentionConfig(d, cfg.heads)
    p = LocParams()
    p.bit_embed = Tensor(rng.standard_normal((2, d)) * scale, requires_grad=True)
    p.pos = Tensor(rng.standard_normal((N_BITS, d)) * scale, requires_grad=True)
    p.layers = [init_encoder_layer(att_cfg, rng, scale) for _ in range(cfg.depth)]
    p.ln_g = Tensor(np.ones(d), requires_grad=True)
    p.ln_b = Tensor(np.zeros(d), requires_grad=True)
    return p


def location_forward(code: LocationCode, p: LocParams) -> Tensor:
    """Location latent of one code: mean-pooled, layer-normed encoder output."""
    tokens = ad.add(ad.index_rows(p.bit_embed, list(code.bits)), p.pos)
    z = encoder_stack(tokens, p.layers)
    pooled = ad.tmean(z, axis=0)
    return ad.layer_norm(pooled, p.ln_g, p.ln_b)


def attention_scores(q: Tensor, k: Tensor) -> Tensor:
    """Per-position attention weight rows softmax(QK^T/sqrt(d_k)); exposed
    for instrumenting the location branch."""
    _, weights = scaled_dot_attention(q, k, k, return_weights=True)
    return weights
