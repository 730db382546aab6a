"""Scaled dot-product attention and the pre-norm encoder layer.

One implementation serves both branches of the model; only d_model and
the layer count differ. Sequences are rank-2 [n, d_model] tensors, one
sequence at a time. Per-head query/key/value projections are separate
matrices (no biases); the feed-forward sublayer uses a 4x hidden width
with biases and GELU.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int
    heads: int

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ValueError(
                f"d_model={self.d_model} not divisible by heads={self.heads}"
            )
        if self.d_model // self.heads < 1:
            raise ValueError("per-head width must be >= 1")

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads

    @property
    def d_v(self) -> int:
        return self.d_model // self.heads


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, return_weights: bool = False):
    """softmax(QK^T / sqrt(d_k)) V for one sequence."""
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query width {q.shape} != key width {k.shape}")
    if k.shape[0] != v.shape[0]:
        raise ValueError(f"key rows {k.shape} != value rows {v.shape}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = ad.mul(ad.matmul(q, ad.transpose(k)), scale)
    weights = ad.softmax(scores, axis=-1)
    out = ad.matmul(weights, v)
    if return_weights:
        return out, weights
    return out


@dataclass
class EncoderLayerParams:
    """All learnable state of one encoder layer."""

    wq: list = field(default_factory=list)  # per head, [d_model, d_k]
    wk: list = field(default_factory=list)
    wv: list = field(default_factory=list)
    wo: Tensor = None                        # [heads*d_v, d_model]
    ffn_w1: Tensor = None                    # [d_model, 4*d_model]
    ffn_b1: Tensor = None
    ffn_w2: Tensor = None
    ffn_b2: Tensor = None
    ln1_g: Tensor = None
    ln1_b: Tensor = None
    ln2_g: Tensor = None
    ln2_b: Tensor = None

    def named(self, prefix: str):
        """Yield (name, tensor, regularized) in a stable order."""
        for i, (q, k, v) in enumerate(zip(self.wq, self.wk, self.wv)):
            yield f"{prefix}.h{i}.wq", q, True
            yield f"{prefix}.h{i}.wk", k, True
            yield f"{prefix}.h{i}.wv", v, True
        yield f"{prefix}.wo", self.wo, True
        yield f"{prefix}.ffn.w1", self.ffn_w1, True
        yield f"{prefix}.ffn.b1", self.ffn_b1, False
        yield f"{prefix}.ffn.w2", self.ffn_w2, True
        yield f"{prefix}.ffn.b2", self.ffn_b2, False
        yield f"{prefix}.ln1.g", self.ln1_g, False
        yield f"{prefix}.ln1.b", self.ln1_b, False
        yield f"{prefix}.ln2.g", self.ln2_g, False
        yield f"{prefix}.ln2.b", self.ln2_b, False


def init_encoder_layer(cfg: AttentionConfig, rng: np.random.Generator,
                       scale: float = 0.02) -> EncoderLayerParams:
    d, dk = cfg.d_model, cfg.d_k
    p = EncoderLayerParams()
    for _ in range(cfg.heads):
        p.wq.append(Tensor(rng.standard_normal((d, dk)) * scale, requires_grad=True))
        p.wk.append(Tensor(rng.standard_normal((d, dk)) * scale, requires_grad=True))
        p.wv.append(Tensor(rng.standard_normal((d, dk)) * scale, requires_grad=True))
    p.wo = Tensor(rng.standard_normal((cfg.heads * dk, d)) * scale, requires_grad=True)
    p.ffn_w1 = Tensor(rng.standard_normal((d, 4 * d)) * scale, requires_grad=True)
    p.ffn_b1 = Tensor(np.zeros(4 * d), requires_grad=True)
    p.ffn_w2 = Tensor(rng.standard_normal((4 * d, d)) * scale, requires_grad=True)
    p.ffn_b2 = Tensor(np.zeros(d), requires_grad=True)
    p.ln1_g = Tensor(np.ones(d), requires_grad=True)
    p.ln1_b = Tensor(np.zeros(d), requires_grad=True)
    p.ln2_g = Tensor(np.ones(d), requires_grad=True)
    p.ln2_b = Tensor(np.zeros(d), requires_grad=True)
    return p


def multi_head(x_q: Tensor, x_k: Tensor, x_v: Tensor,
               p: EncoderLayerParams) -> Tensor:
    """Concat of per-head attention on projected inputs, then W^O."""
    d_model = p.wo.shape[1]
    if x_q.shape[-1] != d_model:
        raise ValueError(
            f"input width {x_q.shape[-1]} != d_model {d_model}"
        )
    heads = []
    for wq, wk, wv in zip(p.wq, p.wk, p.wv):
        heads.append(scaled_dot_attention(
            ad.matmul(x_q, wq), ad.matmul(x_k, wk), ad.matmul(x_v, wv)))
    return ad.matmul(ad.concat(heads, axis=-1), p.wo)


def encoder_layer(z: Tensor, p: EncoderLayerParams) -> Tensor:
    """Pre-norm block: attention sublayer then MLP sublayer, each residual."""
    a = ad.layer_norm(z, p.ln1_g, p.ln1_b)
    z1 = ad.add(multi_head(a, a, a, p), z)
    m = ad.layer_norm(z1, p.ln2_g, p.ln2_b)
    h = ad.gelu(ad.add(ad.matmul(m, p.ffn_w1), p.ffn_b1))
    return ad.add(ad.add(ad.matmul(h, p.ffn_w2), p.ffn_b2), z1)


def encoder_stack(z: Tensor, layers) -> Tensor:
    if not layers:
        raise ValueError("encoder_stack needs at least one layer")
    for p in layers:
        z = encoder_layer(z, p)
    return z
