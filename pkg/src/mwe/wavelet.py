"""Separable 2-D discrete wavelet transform with periodic extension.

Orthonormal filter banks only (Haar and the 4-tap Daubechies family
member), so analysis is energy-preserving and synthesis is the exact
transpose. Decomposition recurses on the LL quadrant. Subband naming is
(height_filter, width_filter): LH means lowpass along the height axis
and highpass along the width axis.

Feature extraction for the vision branch gathers, per image patch, the
coefficients that sit at the patch's location in every retained subband:
the final LL block first, then per level (coarsest to finest) the LH,
HL, HH blocks, every block flattened row-major with channels fastest.
The total width is always P*P*C, the same as the raw patch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# analysis lowpass filters; highpass derived by g[n] = (-1)^n h[L-1-n]
_SQRT3 = np.sqrt(3.0)
_FILTERS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db2": np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3])
    / (4.0 * np.sqrt(2.0)),
}


def lowpass_filter(family: str) -> np.ndarray:
    if family not in _FILTERS:
        raise ValueError(f"unknown wavelet family '{family}', "
                         f"expected one of {sorted(_FILTERS)}")
    return _FILTERS[family].copy()


def highpass_filter(family: str) -> np.ndarray:
    h = lowpass_filter(family)
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


@dataclass(frozen=True)
class WaveletSpec:
    family: str = "haar"
    levels: int = 1

    def __post_init__(self):
        lowpass_filter(self.family)
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")


@dataclass
class Subbands:
    """Final LL plane plus (LH, HL, HH) triples, coarsest level first."""

    ll: np.ndarray
    details: list  # [(lh, hl, hh)] index 0 = coarsest

    def coefficient_count(self) -> int:
        n = self.ll.size
        for lh, hl, hh in self.details:
            n += lh.size + hl.size + hh.size
        return n


def _analyze_axis(x: np.ndarray, h: np.ndarray, g: np.ndarray, axis: int):
    """One analysis step along ``axis`` with periodic extension."""
    x = np.moveaxis(x, axis, 0)
    n = x.shape[0]
    if n % 2 != 0:
        raise ValueError(f"axis length {n} not divisible by 2")
    half = n // 2
    lo = np.zeros((half,) + x.shape[1:])
    hi = np.zeros((half,) + x.shape[1:])
    for k in range(half):
        for t, (hv, gv) in enumerate(zip(h, g)):
            row = x[(2 * k + t) % n]
            lo[k] += hv * row
            hi[k] += gv * row
    return np.moveaxis(lo, 0, axis), np.moveaxis(hi, 0, axis)


def _synthesize_axis(lo: np.ndarray, hi: np.ndarray, h: np.ndarray,
                     g: np.ndarray, axis: int) -> np.ndarray:
    lo = np.moveaxis(lo, axis, 0)
    hi = np.moveaxis(hi, axis, 0)
    n = 2 * lo.shape[0]
    out = np.zeros((n,) + lo.shape[1:])
    for k in range(lo.shape[0]):
        for t, (hv, gv) in enumerate(zip(h, g)):
            m = (2 * k + t) % n
            out[m] += lo[k] * hv + hi[k] * gv
    return np.moveaxis(out, 0, axis)


def dwt2(image: np.ndarray, spec: WaveletSpec) -> Subbands:
    """Multi-level 2-D transform of an [H, W, C] (or [H, W]) array."""
    image = np.asarray(image, dtype=np.float64)
    h_len, w_len = image.shape[0], image.shape[1]
    div = 2 ** spec.levels
    if h_len % div or w_len % div:
        raise ValueError(
            f"image dims {h_len}x{w_len} must be divisible by 2^levels = {div}"
        )
    if spec.levels > np.log2(min(h_len, w_len)):
        raise ValueError(
            f"levels={spec.levels} exceeds log2(min(H,W)) for {h_len}x{w_len}"
        )
    h = lowpass_filter(spec.family)
    g = highpass_filter(spec.family)
    details = []
    ll = image
    for _ in range(spec.levels):
        lo, hi = _analyze_axis(ll, h, g, axis=0)
        ll_, lh = _analyze_axis(lo, h, g, axis=1)
        hl, hh = _analyze_axis(hi, h, g, axis=1)
        details.append((lh, hl, hh))
        ll = ll_
    details.reverse()  # coarsest first
    return Subbands(ll=ll, details=details)


def idwt2(s: Subbands, spec: WaveletSpec) -> np.ndarray:
    if len(s.details) != spec.levels:
        raise ValueError(
            f"subbands carry {len(s.details)} levels, spec says {spec.levels}"
        )
    h = lowpass_filter(spec.family)
    g = highpass_filter(spec.family)
    ll = s.ll
    for lh, hl, hh in s.details:  # coarsest to finest
        if lh.shape != ll.shape or hl.shape != ll.shape or hh.shape != ll.shape:
            raise ValueError(
                f"subband shape mismatch: LL {ll.shape} vs details "
                f"{lh.shape}/{hl.shape}/{hh.shape}"
            )
        lo = _synthesize_axis(ll, lh, h, g, axis=1)
        hi = _synthesize_axis(hl, hh, h, g, axis=1)
        ll = _synthesize_axis(lo, hi, h, g, axis=0)
    return ll


def wavelet_patch_features(image: np.ndarray, patch_size: int,
                           spec: WaveletSpec) -> np.ndarray:
    """Per-patch co-located coefficients, [N, P*P*C].

    Patch (r, c) of size P maps to the (P / 2^l)-sized block at offset
    (r*P/2^l, c*P/2^l) in each level-l subband.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = image[:, :, None]
    hpx, wpx, _ = image.shape
    p = patch_size
    if hpx % p or wpx % p:
        raise ValueError(f"image dims {hpx}x{wpx} not divisible by patch {p}")
    if p % (2 ** spec.levels):
        raise ValueError(
            f"patch size {p} must be divisible by 2^levels = {2 ** spec.levels} "
            "so subband blocks align with patches"
        )
    sub = dwt2(image, spec)
    rows_n, cols_n = hpx // p, wpx // p

    # (plane, block side) in feature order: final LL, then coarse->fine details
    planes = [(sub.ll, p // 2 ** spec.levels)]
    for i, (lh, hl, hh) in enumerate(sub.details):
        side = p // 2 ** (spec.levels - i)
        planes += [(lh, side), (hl, side), (hh, side)]

    feats = np.zeros((rows_n * cols_n, p * p * image.shape[2]))
    for r in range(rows_n):
        for c in range(cols_n):
            parts = [plane[r * side:(r + 1) * side, c * side:(c + 1) * side].ravel()
                     for plane, side in planes]
            feats[r * cols_n + c] = np.concatenate(parts)
    return feats
