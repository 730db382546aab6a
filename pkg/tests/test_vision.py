"""Patch geometry, embedding contracts, and the image-branch forward."""

import numpy as np
import pytest

from mwe import autodiff as ad
from mwe import vision as vs
from mwe.wavelet import WaveletSpec


def unpatchify_oracle(rows, image_size, patch_size, channels):
    g = image_size // patch_size
    img = np.zeros((image_size, image_size, channels))
    for r in range(g):
        for c in range(g):
            img[r * patch_size:(r + 1) * patch_size,
                c * patch_size:(c + 1) * patch_size, :] = (
                rows[r * g + c].reshape(patch_size, patch_size, channels))
    return img


def small_cfg(**kw):
    base = dict(image_size=8, patch_size=4, channels=1, embed_dim=8,
                depth=1, heads=2)
    base.update(kw)
    return vs.ViTConfig(**base)


class TestPatchify:
    def test_shape_16x16(self):
        cfg = vs.ViTConfig(image_size=16, patch_size=4, channels=1,
                           embed_dim=16, depth=1, heads=2)
        rows = vs.patchify(np.zeros((16, 16, 1)), cfg)
        assert rows.shape == (16, 16)

    def test_first_patch_content(self):
        cfg = small_cfg()
        img = np.zeros((8, 8, 1))
        img[:4, :4, 0] = 7.0
        rows = vs.patchify(img, cfg)
        assert (rows[0] == 7.0).all()
        assert (rows[1:] == 0.0).all()

    def test_round_trip(self):
        rng = np.random.default_rng(60)
        cfg = vs.ViTConfig(image_size=12, patch_size=3, channels=3,
                           embed_dim=6, depth=1, heads=2)
        img = rng.standard_normal((12, 12, 3))
        rows = vs.patchify(img, cfg)
        back = unpatchify_oracle(rows, 12, 3, 3)
        assert (back == img).all()

    def test_wrong_size_rejected(self):
        cfg = small_cfg()
        with pytest.raises(ValueError, match="does not match config"):
            vs.patchify(np.zeros((10, 10, 1)), cfg)

    def test_config_divisibility(self):
        with pytest.raises(ValueError, match="not divisible"):
            vs.ViTConfig(image_size=10, patch_size=4, channels=1,
                         embed_dim=8, depth=1, heads=2)


class TestEmbed:
    def test_all_zero_params_give_zero(self):
        cfg = small_cfg()
        rng = np.random.default_rng(61)
        p = vs.init_vit_params(cfg, rng)
        p.embed.data[...] = 0
        p.e_pos.data[...] = 0
        p.cls.data[...] = 0
        z = vs.embed(vs.patchify(np.ones((8, 8, 1)), cfg), None, p, cfg)
        assert (z.data == 0).all()

    def test_single_patch_identity_embedding(self):
        cfg = vs.ViTConfig(image_size=2, patch_size=2, channels=1,
                           embed_dim=4, depth=1, heads=1)
        p = vs.init_vit_params(cfg, np.random.default_rng(62))
        p.embed.data[...] = np.eye(4)
        p.cls.data[...] = 0
        img = np.arange(4.0).reshape(2, 2, 1)
        z = vs.embed(vs.patchify(img, cfg), None, p, cfg)
        assert np.abs(z.data[1] - (np.arange(4.0) + p.e_pos.data[1])).max() < 1e-15

    def test_augmented_width(self):
        cfg = small_cfg(wavelet=WaveletSpec("haar", 1), wavelet_mode="concat")
        assert cfg.embed_in_width == 2 * 16
        p = vs.init_vit_params(cfg, np.random.default_rng(63))
        assert p.embed.shape == (32, 8)

    def test_width_mismatch_rejected(self):
        cfg = small_cfg()
        p = vs.init_vit_params(cfg, np.random.default_rng(64))
        with pytest.raises(ValueError, match="width"):
            vs.embed(np.zeros((4, 20)), None, p, cfg)

    def test_epos_row_count(self):
        cfg = small_cfg()
        p = vs.init_vit_params(cfg, np.random.default_rng(65))
        assert p.e_pos.shape == (cfg.patch_count + 1, cfg.embed_dim)


class TestForward:
    def test_zero_image_zero_params_zero_latent(self):
        cfg = small_cfg()
        p = vs.init_vit_params(cfg, np.random.default_rng(66))
        for _, t, _ in p.named():
            t.data[...] = 0
        latent = vs.vit_forward(np.zeros((8, 8, 1)), p, cfg)
        assert (latent.data == 0).all()

    def test_latent_shape(self):
        cfg = small_cfg(embed_dim=16, heads=4, depth=2)
        p = vs.init_vit_params(cfg, np.random.default_rng(67))
        latent = vs.vit_forward(np.random.default_rng(0).random((8, 8, 1)), p, cfg)
        assert latent.shape == (16,)

    def test_plain_equals_no_wavelet_bitwise(self):
        rng = np.random.default_rng(68)
        cfg_plain = small_cfg()
        p = vs.init_vit_params(cfg_plain, np.random.default_rng(99))
        img = rng.random((8, 8, 1))
        a = vs.vit_forward(img, p, cfg_plain).data
        b = vs.vit_forward(img, p, cfg_plain).data
        assert (a == b).all()

    def test_wavelet_replace_mode_same_width(self):
        cfg = small_cfg(wavelet=WaveletSpec("haar", 1), wavelet_mode="replace")
        assert cfg.embed_in_width == cfg.patch_len
        p = vs.init_vit_params(cfg, np.random.default_rng(70))
        latent = vs.vit_forward(np.random.default_rng(1).random((8, 8, 1)), p, cfg)
        assert latent.shape == (8,)

    def test_patch_permutation_changes_latent_with_positions(self):
        # positional embeddings break permutation symmetry
        rng = np.random.default_rng(71)
        cfg = small_cfg()
        p = vs.init_vit_params(cfg, np.random.default_rng(72))
        img = rng.random((8, 8, 1))
        # swap two patch blocks: (0,0) and (1,1)
        img2 = img.copy()
        img2[:4, :4], img2[4:, 4:] = img[4:, 4:].copy(), img[:4, :4].copy()
        a = vs.vit_forward(img, p, cfg).data
        b = vs.vit_forward(img2, p, cfg).data
        assert np.abs(a - b).max() > 1e-9

    def test_patch_permutation_invariance_without_positions(self):
        # with E_pos = 0 the class-token readout is a symmetric function
        # of the patch set, so a patch swap cannot change it
        rng = np.random.default_rng(73)
        cfg = small_cfg()
        p = vs.init_vit_params(cfg, np.random.default_rng(74))
        p.e_pos.data[...] = 0
        img = rng.random((8, 8, 1))
        img2 = img.copy()
        img2[:4, :4], img2[4:, 4:] = img[4:, 4:].copy(), img[:4, :4].copy()
        a = vs.vit_forward(img, p, cfg).data
        b = vs.vit_forward(img2, p, cfg).data
        assert np.abs(a - b).max() < 1e-12

    def test_latent_depends_on_every_patch(self):
        # changing any single patch moves the latent, even without E_pos
        rng = np.random.default_rng(75)
        cfg = small_cfg()
        p = vs.init_vit_params(cfg, np.random.default_rng(76))
        p.e_pos.data[...] = 0
        img = rng.random((8, 8, 1))
        base = vs.vit_forward(img, p, cfg).data
        grid = cfg.image_size // cfg.patch_size
        for r in range(grid):
            for c in range(grid):
                img2 = img.copy()
                img2[r * 4:(r + 1) * 4, c * 4:(c + 1) * 4] += 0.5
                moved = vs.vit_forward(img2, p, cfg).data
                assert np.abs(moved - base).max() > 1e-9

    def test_grad_check_small_vit(self):
        rng = np.random.default_rng(77)
        cfg = vs.ViTConfig(image_size=4, patch_size=2, channels=1,
                           embed_dim=4, depth=1, heads=2,
                           wavelet=WaveletSpec("haar", 1),
                           wavelet_mode="concat")
        p = vs.init_vit_params(cfg, rng)
        img = rng.random((4, 4, 1))
        probe = rng.standard_normal(4)
        params = [t for _, t, _ in p.named()]

        def f():
            return ad.tsum(ad.mul(vs.vit_forward(img, p, cfg), ad.tensor(probe)))

        assert ad.grad_check(f, params, h=1e-5) < 1e-4
