"""Model checkpoints: a text header describing the architecture, then
the parameter tensors as one raw float64 blob.

Layout:

    mwe-checkpoint v1
    <key> <value...>          one line per config field
    tensor <name> <dims,>     one line per parameter, in named() order
    END
    <little-endian float64 data, concatenated in tensor line order>

The header is self-sufficient: loading rebuilds the model from the
config lines, then fills tensors by name, verifying every shape. Values
round-trip exactly because the blob is the in-memory representation.
"""

from __future__ import annotations

import numpy as np

from .fusion import ClassScheme, FusionConfig, FusionModel, init_fusion_model
from .location import LocConfig
from .vision import ViTConfig
from .wavelet import WaveletSpec

MAGIC = "mwe-checkpoint v1"


class CheckpointError(ValueError):
    pass


def _header_lines(model: FusionModel, extras: dict) -> list:
    cfg = model.cfg
    vit, loc = cfg.vit, cfg.loc
    lines = [
        MAGIC,
        f"mode {cfg.mode}",
        f"classes {','.join(cfg.scheme.classes)}",
        f"image_size {vit.image_size}",
        f"patch_size {vit.patch_size}",
        f"channels {vit.channels}",
        f"embed_dim {vit.embed_dim}",
        f"depth {vit.depth}",
        f"heads {vit.heads}",
        (f"wavelet {vit.wavelet.family} {vit.wavelet.levels} "
         f"{vit.wavelet_mode}" if vit.wavelet else "wavelet none"),
        f"loc {loc.d_model} {loc.depth} {loc.heads}",
        f"body_map {extras.get('body_map', 'original-484')}",
    ]
    mean = extras.get("channel_mean")
    std = extras.get("channel_std")
    if mean is not None:
        lines.append("channel_mean " + ",".join(repr(float(v))
                                                for v in np.ravel(mean)))
        lines.append("channel_std " + ",".join(repr(float(v))
                                               for v in np.ravel(std)))
    return lines


def save_checkpoint(path, model: FusionModel, extras: dict = None):
    extras = extras or {}
    lines = _header_lines(model, extras)
    blobs = []
    for name, tensor, _ in model.named():
        dims = ",".join(str(d) for d in tensor.data.shape)
        lines.append(f"tensor {name} {dims}")
        blobs.append(np.ascontiguousarray(tensor.data,
                                          dtype="<f8").tobytes())
    lines.append("END")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for blob in blobs:
            fh.write(blob)


def _parse_header(raw: bytes):
    end = raw.find(b"\nEND\n")
    if not raw.startswith(MAGIC.encode()) or end < 0:
        raise CheckpointError("not a recognizable checkpoint file")
    lines = raw[:end].decode("ascii").split("\n")[1:]
    fields, tensors = {}, []
    for line in lines:
        key, _, rest = line.partition(" ")
        if key == "tensor":
            name, _, dims = rest.partition(" ")
            shape = tuple(int(d) for d in dims.split(",") if d)
            tensors.append((name, shape))
        else:
            fields[key] = rest
    return fields, tensors, raw[end + len(b"\nEND\n"):]


def _rebuild_config(fields) -> FusionConfig:
    try:
        if fields["wavelet"] == "none":
            wavelet, wavelet_mode = None, "concat"
        else:
            family, levels, wavelet_mode = fields["wavelet"].split()
            wavelet = WaveletSpec(family, int(levels))
        loc_d, loc_depth, loc_heads = (int(v) for v in
                                       fields["loc"].split())
        return FusionConfig(
            vit=ViTConfig(image_size=int(fields["image_size"]),
                          patch_size=int(fields["patch_size"]),
                          channels=int(fields["channels"]),
                          embed_dim=int(fields["embed_dim"]),
                          depth=int(fields["depth"]),
                          heads=int(fields["heads"]),
                          wavelet=wavelet, wavelet_mode=wavelet_mode),
            loc=LocConfig(d_model=loc_d, depth=loc_depth, heads=loc_heads),
            scheme=ClassScheme(tuple(fields["classes"].split(","))),
            mode=fields["mode"],
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"bad checkpoint header: {exc}") from exc


def load_checkpoint(path):
    """Returns (model, extras) with tensors exactly as saved."""
    with open(path, "rb") as fh:
        raw = fh.read()
    fields, tensor_lines, blob = _parse_header(raw)
    cfg = _rebuild_config(fields)
    model = init_fusion_model(cfg, seed=0)
    named = list(model.named())
    if [n for n, _, _ in named] != [n for n, _ in tensor_lines]:
        raise CheckpointError("tensor names do not match the declared "
                              "architecture")
    offset = 0
    for (name, tensor, _), (_, shape) in zip(named, tensor_lines):
        if tensor.data.shape != shape:
            raise CheckpointError(f"tensor {name} has shape "
                                  f"{tensor.data.shape}, file says {shape}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        size = count * 8
        chunk = blob[offset:offset + size]
        if len(chunk) != size:
            raise CheckpointError(f"blob truncated at tensor {name}")
        tensor.data[...] = np.frombuffer(chunk, dtype="<f8").reshape(shape)
        offset += size
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes after "
                              f"the last tensor")
    extras = {"body_map": fields.get("body_map", "original-484")}
    if "channel_mean" in fields:
        extras["channel_mean"] = np.array(
            [float(v) for v in fields["channel_mean"].split(",")])
        extras["channel_std"] = np.array(
            [float(v) for v in fields["channel_std"].split(",")])
    return model, extras
