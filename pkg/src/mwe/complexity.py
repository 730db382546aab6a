"""Parameter, flop, and memory accounting for a fusion model.

Parameters are counted exactly by walking tensor shapes. Flops are an
analytic count of one forward pass at batch size 1: matmuls cost
2*m*k*n (multiply and add counted separately), attention includes the
score and apply terms, and layer norms / activations contribute linear
terms with the documented per-element constants below. Memory is a
coarse estimate: every parameter plus every forward activation kept
alive for the backward pass, 8 bytes per float64 value, scaled by batch
size for the activations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fusion import FusionModel

LN_COST = 8      # per element: mean, sub, square, var-sum share, sqrt amortized, div, mul, add
GELU_COST = 6    # per element: erf evaluation amortized + mul/add
SOFTMAX_COST = 5 # per element: max-scan, sub, exp, sum share, div


@dataclass(frozen=True)
class ComplexityReport:
    parameters: int
    flops_per_forward: int
    activation_floats: int
    batch_size: int

    @property
    def parameters_millions(self) -> float:
        return self.parameters / 1e6

    @property
    def gflops_per_forward(self) -> float:
        return self.flops_per_forward / 1e9

    @property
    def peak_memory_gb_estimate(self) -> float:
        values = self.parameters + self.batch_size * self.activation_floats
        return values * 8 / 1e9

    def to_dict(self) -> dict:
        return {
            "parameters_millions": self.parameters_millions,
            "gflops_per_forward": self.gflops_per_forward,
            "peak_memory_gb_estimate": self.peak_memory_gb_estimate,
        }


def count_params(named_tensors) -> int:
    """Exact count over (name, tensor, regularized) triples."""
    total = 0
    for _, t, _ in named_tensors:
        n = 1
        for s in t.shape:
            n *= s
        total += n
    return total


def _encoder_layer_cost(s: int, d: int, h: int):
    """(flops, activation floats) of one encoder layer on an s-token sequence."""
    d_k = d // h
    flops = 0
    acts = 0
    # two layer norms
    flops += 2 * LN_COST * s * d
    acts += 2 * s * d
    # per-head q/k/v projections
    flops += h * 3 * 2 * s * d * d_k
    acts += 3 * s * d
    # scores, softmax, apply
    flops += h * (2 * s * s * d_k + SOFTMAX_COST * s * s + 2 * s * s * d_k)
    acts += 2 * s * s * h + s * d
    # output projection
    flops += 2 * s * (h * d_k) * d
    acts += s * d
    # feed-forward: two matmuls, bias adds, activation
    flops += 2 * s * d * 4 * d + s * 4 * d + GELU_COST * s * 4 * d
    flops += 2 * s * 4 * d * d + s * d
    acts += 3 * s * 4 * d + s * d
    # two residual adds
    flops += 2 * s * d
    acts += 2 * s * d
    return flops, acts


def _wavelet_cost(cfg) -> tuple:
    if cfg.wavelet is None:
        return 0, 0
    from .wavelet import lowpass_filter
    taps = len(lowpass_filter(cfg.wavelet.family))
    flops = 0
    acts = 0
    pixels = cfg.image_size * cfg.image_size * cfg.channels
    for _ in range(cfg.wavelet.levels):
        # each analysis axis pass: every output value costs taps mults + taps adds,
        # two outputs (low/high) per input pair, two axes
        flops += 2 * 2 * taps * pixels
        acts += 2 * pixels
        pixels //= 4
    return flops, acts


def _vit_cost(cfg) -> tuple:
    s = cfg.patch_count + 1
    d = cfg.embed_dim
    flops, acts = _wavelet_cost(cfg)
    # patch embedding matmul [N, in_width] @ [in_width, D]
    flops += 2 * cfg.patch_count * cfg.embed_in_width * d
    acts += cfg.patch_count * cfg.embed_in_width + s * d
    # positional add
    flops += s * d
    acts += s * d
    for _ in range(cfg.depth):
        f, a = _encoder_layer_cost(s, d, cfg.heads)
        flops += f
        acts += a
    # final layer norm
    flops += LN_COST * s * d
    acts += s * d
    return flops, acts


def _loc_cost(cfg) -> tuple:
    from .location import N_BITS
    s, d = N_BITS, cfg.d_model
    # embedding lookup is a gather (no flops), positional add counts
    flops = s * d
    acts = 2 * s * d
    for _ in range(cfg.depth):
        f, a = _encoder_layer_cost(s, d, cfg.heads)
        flops += f
        acts += a
    # mean pool + layer norm on the pooled vector
    flops += s * d + LN_COST * d
    acts += 2 * d
    return flops, acts


def complexity(model: FusionModel, batch_size: int = 1) -> ComplexityReport:
    cfg = model.cfg
    flops = 0
    acts = 0
    if cfg.uses_image:
        f, a = _vit_cost(cfg.vit)
        flops += f
        acts += a
    if cfg.uses_location:
        f, a = _loc_cost(cfg.loc)
        flops += f
        acts += a
    # classifier
    flops += 2 * cfg.classifier_in_width * cfg.scheme.k + cfg.scheme.k
    acts += cfg.classifier_in_width + cfg.scheme.k
    return ComplexityReport(
        parameters=count_params(model.named()),
        flops_per_forward=flops,
        activation_floats=acts,
        batch_size=batch_size,
    )
