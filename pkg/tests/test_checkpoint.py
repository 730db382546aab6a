"""Checkpoint round trips and corruption detection."""

import numpy as np
import pytest

from conftest import synthetic_four_class, tiny_fusion_config
from mwe.checkpoint import (CheckpointError, load_checkpoint,
                            save_checkpoint)
from mwe.fusion import TrainConfig, init_fusion_model, predict, train
from mwe.wavelet import WaveletSpec


def trained_model(mode="image+location", **cfg_kw):
    cfg = tiny_fusion_config(mode=mode, **cfg_kw)
    model = init_fusion_model(cfg, seed=3)
    data = synthetic_four_class(2, seed=1)
    train(model, data, TrainConfig(lr=0.05, epochs=1, batch_size=4))
    return model, data


class TestRoundTrip:
    def test_tensors_exact(self, tmp_path):
        model, _ = trained_model()
        extras = {"body_map": "original-484",
                  "channel_mean": np.array([0.1, 0.2, 0.3]),
                  "channel_std": np.array([1.0, 0.5, 0.25])}
        p = tmp_path / "m.bin"
        save_checkpoint(p, model, extras)
        loaded, back = load_checkpoint(p)
        assert loaded.cfg == model.cfg
        saved = dict((n, t.data) for n, t, _ in model.named())
        for name, tensor, _ in loaded.named():
            assert np.array_equal(tensor.data, saved[name]), name
        assert back["body_map"] == "original-484"
        assert np.array_equal(back["channel_mean"], extras["channel_mean"])
        assert np.array_equal(back["channel_std"], extras["channel_std"])

    def test_load_overwrites_init(self, tmp_path):
        model, _ = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        fresh = init_fusion_model(model.cfg, seed=0)
        loaded, _ = load_checkpoint(p)
        trained_tensors = dict((n, t.data) for n, t, _ in loaded.named())
        assert any(not np.array_equal(t.data, trained_tensors[n])
                   for n, t, _ in fresh.named())

    def test_predictions_survive(self, tmp_path):
        model, data = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        loaded, _ = load_checkpoint(p)
        pairs = [(s[0], s[1]) for s in data]
        _, before = predict(model, pairs)
        _, after = predict(loaded, pairs)
        assert np.array_equal(before, after)

    def test_wavelet_header_variants(self, tmp_path):
        for cfg_kw in ({"wavelet": None},
                       {"wavelet": WaveletSpec("haar", 1)},
                       {"wavelet": WaveletSpec("db2", 2),
                        "wavelet_mode": "replace", "image_size": 8}):
            model, _ = trained_model(mode="image-only", **cfg_kw)
            p = tmp_path / "w.bin"
            save_checkpoint(p, model)
            loaded, _ = load_checkpoint(p)
            assert loaded.cfg.vit.wavelet == model.cfg.vit.wavelet
            assert loaded.cfg.vit.wavelet_mode == model.cfg.vit.wavelet_mode

    def test_no_extras(self, tmp_path):
        model, _ = trained_model(mode="location-only")
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        _, extras = load_checkpoint(p)
        assert extras == {"body_map": "original-484"}


class TestCorruption:
    def test_not_a_checkpoint(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"something else entirely")
        with pytest.raises(CheckpointError, match="not a recognizable"):
            load_checkpoint(p)

    def test_truncated_blob(self, tmp_path):
        model, _ = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        raw = p.read_bytes()
        p.write_bytes(raw[:-16])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(p)

    def test_trailing_junk(self, tmp_path):
        model, _ = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        p.write_bytes(p.read_bytes() + b"\x00" * 8)
        with pytest.raises(CheckpointError, match="trailing"):
            load_checkpoint(p)

    def test_shape_tamper(self, tmp_path):
        model, _ = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        raw = p.read_bytes()
        head, _, tail = raw.partition(b"\nEND\n")
        lines = head.split(b"\n")
        for i, line in enumerate(lines):
            if line.startswith(b"tensor "):
                name, dims = line.rsplit(b" ", 1)
                first = dims.split(b",")[0]
                bumped = str(int(first) + 1).encode()
                lines[i] = name + b" " + b",".join(
                    [bumped] + dims.split(b",")[1:])
                break
        p.write_bytes(b"\n".join(lines) + b"\nEND\n" + tail)
        with pytest.raises(CheckpointError, match="shape"):
            load_checkpoint(p)

    def test_name_tamper(self, tmp_path):
        model, _ = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        raw = p.read_bytes()
        idx = raw.find(b"tensor ")
        tampered = raw[:idx + 7] + b"zz" + raw[idx + 9:]
        p.write_bytes(tampered)
        with pytest.raises(CheckpointError, match="names"):
            load_checkpoint(p)

    def test_bad_config_field(self, tmp_path):
        model, _ = trained_model()
        p = tmp_path / "m.bin"
        save_checkpoint(p, model)
        raw = p.read_bytes()
        p.write_bytes(raw.replace(b"patch_size 4", b"patch_size 5"))
        with pytest.raises(CheckpointError, match="header"):
            load_checkpoint(p)
