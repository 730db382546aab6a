"""Shared fixtures: tiny configs and a separable synthetic dataset."""

import numpy as np

from mwe.fusion import ClassScheme, FusionConfig
from mwe.location import LocConfig, encode_location
from mwe.vision import ViTConfig


def tiny_fusion_config(mode="image+location", image_size=8, embed_dim=8,
                       depth=1, heads=2, loc_d=8, loc_depth=1, channels=1,
                       wavelet=None, wavelet_mode="concat", k=4):
    schemes = {2: ("D", "P"), 3: ("D", "P", "S"), 4: ("D", "P", "S", "V"),
               6: ("D", "P", "S", "V", "N", "BG")}
    return FusionConfig(
        vit=ViTConfig(image_size=image_size, patch_size=4, channels=channels,
                      embed_dim=embed_dim, depth=depth, heads=heads,
                      wavelet=wavelet, wavelet_mode=wavelet_mode),
        loc=LocConfig(d_model=loc_d, depth=loc_depth, heads=heads),
        scheme=ClassScheme(schemes[k]),
        mode=mode,
    )


def synthetic_four_class(n_per_class, image_size=8, channels=1, seed=0):
    """Separable by construction: class c brightens quadrant c of the image
    and picks a location id whose three leading bits encode c."""
    rng = np.random.default_rng(seed)
    half = image_size // 2
    quads = [(0, 0), (0, half), (half, 0), (half, half)]
    samples = []
    for c in range(4):
        for _ in range(n_per_class):
            img = rng.random((image_size, image_size, channels)) * 0.1
            r0, c0 = quads[c]
            img[r0:r0 + half, c0:c0 + half, :] += 0.9
            loc_id = 64 + 128 * c + int(rng.integers(0, 8))
            samples.append((img, encode_location(loc_id), c))
    return samples
