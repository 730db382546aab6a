"""Dataset ingestion, preprocessing, augmentation, splits, scheme filters.

The on-disk layout is a manifest CSV naming image files relative to a
root directory, one row per sample: `image_path,label,location_id`.
Labels use the six letters D, P, S, V, N, BG; the location column may
be blank for N and BG rows only (background and normal-skin crops do
not always come with a body-map annotation). Loading validates every
row and reports all problems at once, each with its line number.

Split before augmenting: `split` refuses records that are augmented
variants, so expanded copies of one base image can never land on both
sides of a split boundary.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image, UnidentifiedImageError

from .fusion import ClassScheme
from .location import BODY_MAPS

LABELS = ("D", "P", "S", "V", "N", "BG")
LOCATION_OPTIONAL = ("N", "BG")


@dataclass(frozen=True, eq=False)
class DatasetRecord:
    image: np.ndarray          # [S, S, 3] floats in [0, 1]
    image_path: str
    label: str
    location_id: int | None
    provenance: str = ""       # base image path, shared by variants
    variant: int = 0           # 0 = original, >= 1 = augmented copy
    transform: str = ""        # description of the ops applied
    class_index: int | None = None

    def __post_init__(self):
        if not self.provenance:
            object.__setattr__(self, "provenance", self.image_path)


class ManifestError(ValueError):
    """All row-level problems from one manifest, itemized."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("manifest invalid:\n" + "\n".join(self.problems))


def _location_bound(body_map):
    if isinstance(body_map, str):
        if body_map not in BODY_MAPS:
            raise ValueError(f"unknown body map '{body_map}', "
                             f"expected one of {sorted(BODY_MAPS)}")
        return BODY_MAPS[body_map]
    return len(body_map)


def load_dataset(root_dir, manifest_csv, body_map="original-484",
                 image_size=32):
    """Read a manifest CSV into validated, preprocessed records."""
    bound = _location_bound(body_map)
    problems = []
    seen_paths = {}
    records = []
    with open(manifest_csv, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["image_path", "label", "location_id"]:
            raise ManifestError(
                [f"line 1: header must be image_path,label,location_id, "
                 f"got {header}"])
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                problems.append(f"line {line_no}: expected 3 columns, "
                                f"got {len(row)}")
                continue
            path, label, loc_text = (cell.strip() for cell in row)
            if label not in LABELS:
                problems.append(f"line {line_no}: bad label '{label}', "
                                f"expected one of {'/'.join(LABELS)}")
                continue
            if path in seen_paths:
                problems.append(f"line {line_no}: duplicate image_path "
                                f"'{path}' (first seen on line "
                                f"{seen_paths[path]})")
                continue
            seen_paths[path] = line_no
            location_id = None
            if loc_text:
                try:
                    location_id = int(loc_text)
                except ValueError:
                    problems.append(f"line {line_no}: location_id "
                                    f"'{loc_text}' is not an integer")
                    continue
                if not 0 <= location_id < bound:
                    problems.append(f"line {line_no}: location_id "
                                    f"{location_id} outside 0..{bound - 1}")
                    continue
            elif label not in LOCATION_OPTIONAL:
                problems.append(f"line {line_no}: blank location_id is only "
                                f"allowed for {'/'.join(LOCATION_OPTIONAL)} "
                                f"rows, label is {label}")
                continue
            full = os.path.join(root_dir, path)
            if not os.path.isfile(full):
                problems.append(f"line {line_no}: image file not found: "
                                f"{path}")
                continue
            try:
                image = preprocess(full, image_size)
            except (UnidentifiedImageError, OSError) as exc:
                problems.append(f"line {line_no}: cannot decode {path}: "
                                f"{exc}")
                continue
            records.append(DatasetRecord(image=image, image_path=path,
                                         label=label,
                                         location_id=location_id))
    if problems:
        raise ManifestError(problems)
    if not records:
        warnings.warn(f"manifest {manifest_csv} has no data rows")
    return records


def decode_image(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def center_crop_square(image: np.ndarray) -> np.ndarray:
    h, w = image.shape[:2]
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    return image[top:top + side, left:left + side]


def bilinear_resize(image: np.ndarray, size: int) -> np.ndarray:
    """Separable bilinear resample using the pixel-center convention
    (destination center x maps to source (x + 0.5) * scale - 0.5)."""
    h, w = image.shape[:2]
    out = np.empty((size, size) + image.shape[2:], dtype=np.float64)
    ys = np.clip((np.arange(size) + 0.5) * (h / size) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(size) + 0.5) * (w / size) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(size, 1, *([1] * (image.ndim - 2)))
    fx = (xs - x0).reshape(1, size, *([1] * (image.ndim - 2)))
    top = image[y0][:, x0] * (1 - fx) + image[y0][:, x1] * fx
    bottom = image[y1][:, x0] * (1 - fx) + image[y1][:, x1] * fx
    out[...] = top * (1 - fy) + bottom * fy
    return out


def preprocess(path, size=32) -> np.ndarray:
    """Decode, center-crop square, bilinear-resize, scale to [0, 1]."""
    image = decode_image(path)
    image = center_crop_square(image)
    if image.shape[0] != size:
        image = bilinear_resize(image, size)
    return image


def channel_stats(images):
    """Per-channel mean and std across a list of [S, S, C] arrays."""
    stacked = np.stack(list(images))
    axes = tuple(range(stacked.ndim - 1))
    return stacked.mean(axis=axes), stacked.std(axis=axes)


def standardize(image: np.ndarray, mean, std) -> np.ndarray:
    return (image - mean) / np.maximum(std, 1e-8)


@dataclass(frozen=True)
class AugmentationSpec:
    rotations: tuple = (90, 180, 270)
    flip_horizontal: bool = True
    flip_vertical: bool = True
    brightness_delta: float = 0.1
    contrast_range: tuple = (0.8, 1.25)
    multiplier: int = 4

    def __post_init__(self):
        if self.multiplier < 1:
            raise ValueError("multiplier must be >= 1")
        if self.brightness_delta < 0:
            raise ValueError("brightness_delta must be nonnegative")
        lo, hi = self.contrast_range
        if not 0 < lo <= hi:
            raise ValueError("contrast_range must be positive and ordered")
        for deg in self.rotations:
            if deg not in (90, 180, 270):
                raise ValueError(f"unsupported rotation {deg}, "
                                 f"expected 90/180/270")

    def geometry_ops(self):
        ops = [("identity", lambda a: a)]
        for deg in self.rotations:
            ops.append((f"rot{deg}",
                        lambda a, k=deg // 90: np.rot90(a, k)))
        if self.flip_horizontal:
            ops.append(("fliph", lambda a: a[:, ::-1]))
        if self.flip_vertical:
            ops.append(("flipv", lambda a: a[::-1, :]))
        return ops


def augment(records, spec: AugmentationSpec, seed=0):
    """Expand each record to `multiplier` copies: the original plus
    sampled geometry + brightness + contrast variants, clamped to
    [0, 1]. Labels, locations, and provenance are copied; variants are
    numbered from 1 so the split leakage guard can spot them."""
    rng = np.random.default_rng(seed)
    ops = spec.geometry_ops()
    out = []
    for rec in records:
        out.append(rec)
        for v in range(1, spec.multiplier):
            name, op = ops[int(rng.integers(len(ops)))]
            delta = float(rng.uniform(-spec.brightness_delta,
                                      spec.brightness_delta))
            factor = float(rng.uniform(*spec.contrast_range))
            image = op(rec.image)
            image = 0.5 + factor * (image - 0.5) + delta
            image = np.clip(image, 0.0, 1.0)
            desc = (f"{name} brightness{delta:+.4f} "
                    f"contrast x{factor:.4f}")
            out.append(replace(rec, image=image, variant=v, transform=desc))
    return out


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple = (0.7, 0.15, 0.15)
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ValueError("fractions must be 3 nonnegative numbers")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {sum(self.fractions)}, "
                             f"expected 1")


def _largest_remainder(n, fractions):
    """Integer allocation of n slots; remainders break ties to the
    earlier split."""
    exact = [n * f for f in fractions]
    counts = [int(np.floor(e)) for e in exact]
    order = sorted(range(len(fractions)),
                   key=lambda i: (-(exact[i] - counts[i]), i))
    for i in range(n - sum(counts)):
        counts[order[i % len(order)]] += 1
    return counts


def split(records, spec: SplitSpec):
    """Shuffle and partition into train/val/test by the given fractions.

    Stratification allocates each label's samples with the largest
    remainder method. Augmented variants are refused outright: augment
    only the train side, after splitting."""
    records = list(records)
    for rec in records:
        if rec.variant != 0:
            raise ValueError(
                f"augmented variant of {rec.provenance} reached split; "
                f"augment after splitting, not before")
    rng = np.random.default_rng(spec.seed)
    slots = sum(1 for f in spec.fractions if f > 0)
    groups = {}
    if spec.stratified:
        for rec in records:
            groups.setdefault(rec.label, []).append(rec)
    else:
        groups["all"] = records
    parts = ([], [], [])
    for key in sorted(groups):
        members = groups[key]
        if len(members) < slots:
            raise ValueError(f"class {key} has {len(members)} samples, "
                             f"fewer than the {slots} split slots")
        members = [members[i] for i in rng.permutation(len(members))]
        counts = _largest_remainder(len(members), spec.fractions)
        at = 0
        for part, count in zip(parts, counts):
            part.extend(members[at:at + count])
            at += count
    return parts


def filter_scheme(records, scheme: ClassScheme):
    """Keep records whose label is in the scheme, stamped with the
    scheme-local class index. Relative order is preserved."""
    kept = []
    for rec in records:
        if rec.label in scheme.classes:
            kept.append(replace(rec,
                                class_index=scheme.classes.index(rec.label)))
    for i, name in enumerate(scheme.classes):
        if not any(rec.class_index == i for rec in kept):
            raise ValueError(f"scheme class {name} has no records")
    return kept
