"""Command-line interface: train, tune, eval, complexity,
encode-location, and the dwt-dump debug view.

Exit codes are a stable contract: 0 success, 1 runtime or domain
error, 2 config error (including bad flags). Every artifact lands
under the --out / config `out` directory and nowhere else; reruns with
the same seed and inputs produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np
import yaml

from . import data as dt
from . import hypertune as ht
from . import swarm as sw
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .complexity import complexity
from .config import ConfigError, load_config
from .fusion import init_fusion_model, predict
from .fusion import train as train_model
from .location import BODY_MAPS, encode_location
from .metrics import confusion, metrics, plot_csv, render_text_table
from .wavelet import WaveletSpec, dwt2


def _fail(exc, code):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        fn()
    except ConfigError as exc:
        _fail(exc, 2)
    except (ValueError, OSError) as exc:
        _fail(exc, 1)


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _load_records(exp):
    manifest = exp.manifest
    if not os.path.isabs(manifest):
        manifest = os.path.join(exp.data_root, manifest)
    records = dt.load_dataset(exp.data_root, manifest,
                              body_map=exp.body_map,
                              image_size=exp.fusion.vit.image_size)
    return dt.filter_scheme(records, exp.fusion.scheme)


def _usable(records, cfg):
    """Location-using modes can only score records that carry one."""
    if not cfg.uses_location:
        return records
    kept = [r for r in records if r.location_id is not None]
    dropped = len(records) - len(kept)
    if dropped:
        click.echo(f"note: dropped {dropped} records without location ids",
                   err=True)
    if not kept:
        raise ValueError(f"no records usable in mode '{cfg.mode}': "
                         f"every row lacks a location id")
    return kept


def _samples(records, cfg, body_map, mean=None, std=None):
    out = []
    for rec in records:
        image = None
        if cfg.uses_image:
            image = (rec.image if mean is None
                     else dt.standardize(rec.image, mean, std))
        code = (encode_location(rec.location_id, body_map)
                if cfg.uses_location else None)
        out.append((image, code, rec.class_index))
    return out


def _score(model, samples, k):
    pairs = [(s[0], s[1]) for s in samples]
    truth = [s[2] for s in samples]
    pred, _ = predict(model, pairs)
    return metrics(confusion(truth, list(pred), k))


def _history_csv(history):
    lines = ["epoch,loss,accuracy"]
    for row in history:
        lines.append(f"{row['epoch']},{row['loss']!r},{row['accuracy']!r}")
    return "\n".join(lines) + "\n"


@click.group()
def main():
    """Multimodal wound classification experiments."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="experiment config YAML")
@click.option("--seed", type=int, default=None,
              help="overrides the config and MWE_SEED")
@click.option("--out", "out_override", default=None,
              help="artifact directory, overrides the config")
def train(config_path, seed, out_override):
    """Train a model; writes checkpoint, metrics, history."""
    def run():
        exp = load_config(config_path, seed_override=seed)
        out = out_override or exp.out_dir
        cfg = exp.fusion
        records = _usable(_load_records(exp), cfg)
        train_recs, val_recs, test_recs = dt.split(records, exp.split)
        if exp.augment is not None:
            train_recs = dt.augment(train_recs, exp.augment, seed=exp.seed)
        mean = std = None
        if cfg.uses_image and exp.normalize:
            mean, std = dt.channel_stats([r.image for r in train_recs])
        model = init_fusion_model(cfg, seed=exp.seed)
        history = train_model(
            model, _samples(train_recs, cfg, exp.body_map, mean, std),
            exp.train)
        _write(out, "history.csv", _history_csv(history))
        extras = {"body_map": exp.body_map}
        if mean is not None:
            extras["channel_mean"] = mean
            extras["channel_std"] = std
        os.makedirs(out, exist_ok=True)
        save_checkpoint(os.path.join(out, "checkpoint.bin"), model, extras)
        k = cfg.scheme.k
        for name, recs in (("val", val_recs), ("test", test_recs)):
            if not recs:
                click.echo(f"note: {name} split is empty, no report",
                           err=True)
                continue
            report = _score(model, _samples(recs, cfg, exp.body_map,
                                            mean, std), k)
            _write(out, f"metrics_{name}.json", report.to_json())
            click.echo(f"{name} accuracy {report.accuracy:.4f} "
                       f"macro-F1 {report.macro_f1:.4f}")
        click.echo(f"artifacts in {out}")
    _guarded(run)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--algorithm", type=click.Choice(sorted(sw.ALGORITHMS)),
              default=None, help="overrides the config's optimizer")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_override", default=None)
def tune(config_path, algorithm, seed, out_override):
    """Swarm-search hyperparameters; writes best config and trace."""
    def run():
        exp = load_config(config_path, seed_override=seed)
        out = out_override or exp.out_dir
        algo = algorithm or exp.optimizer.algorithm
        if exp.objective == "sphere":
            result = ht.tune(algo, None, None, exp.fusion, exp.train,
                             params=exp.optimizer, seed=exp.seed,
                             objective="sphere")
        else:
            cfg = exp.fusion
            records = _usable(_load_records(exp), cfg)
            train_recs, val_recs, _ = dt.split(records, exp.split)
            if not val_recs:
                raise ValueError("tune needs a nonzero validation "
                                 "fraction in the split")
            if exp.augment is not None:
                train_recs = dt.augment(train_recs, exp.augment,
                                        seed=exp.seed)
            mean = std = None
            if cfg.uses_image and exp.normalize:
                mean, std = dt.channel_stats([r.image for r in train_recs])
            result = ht.tune(
                algo,
                _samples(train_recs, cfg, exp.body_map, mean, std),
                _samples(val_recs, cfg, exp.body_map, mean, std),
                cfg, exp.train, params=exp.optimizer, seed=exp.seed)
        best = {"algorithm": algo, "fitness": float(result.best_fitness),
                "config": {k: (float(v) if isinstance(v, float) else v)
                           for k, v in result.best_config.items()},
                "evaluations": result.evaluations}
        _write(out, "best_config.yaml",
               yaml.safe_dump(best, sort_keys=True))
        _write(out, "convergence.csv", sw.trace_to_csv(result.trace))
        if result.report is not None:
            _write(out, "metrics_val.json", result.report.to_json())
        click.echo(f"{algo} best fitness {result.best_fitness!r} "
                   f"after {result.evaluations} evaluations")
        click.echo(f"artifacts in {out}")
    _guarded(run)


@main.command(name="eval")
@click.option("--checkpoint", "ckpt_path", required=True,
              type=click.Path())
@click.option("--manifest", required=True, type=click.Path())
@click.option("--root", default=None,
              help="image root; defaults to the manifest's directory")
@click.option("--out", "out_dir", required=True)
def eval_cmd(ckpt_path, manifest, root, out_dir):
    """Score a checkpoint against a manifest's samples."""
    def run():
        model, extras = load_checkpoint(ckpt_path)
        cfg = model.cfg
        data_root = root if root is not None else os.path.dirname(
            os.path.abspath(manifest))
        records = dt.load_dataset(data_root, manifest,
                                  body_map=extras["body_map"],
                                  image_size=cfg.vit.image_size)
        strange = sorted({r.label for r in records}
                         - set(cfg.scheme.classes))
        if strange:
            raise ValueError(
                f"scheme mismatch: manifest has labels {strange} but the "
                f"checkpoint classifies {list(cfg.scheme.classes)}")
        records = _usable(dt.filter_scheme(records, cfg.scheme), cfg)
        mean = extras.get("channel_mean")
        std = extras.get("channel_std")
        report = _score(model, _samples(records, cfg, extras["body_map"],
                                        mean, std), cfg.scheme.k)
        _write(out_dir, "metrics.json", report.to_json())
        _write(out_dir, "metrics.txt", render_text_table(report))
        _write(out_dir, "plot.csv", plot_csv(report))
        click.echo(f"accuracy {report.accuracy:.4f} "
                   f"macro-F1 {report.macro_f1:.4f}")
        click.echo(f"artifacts in {out_dir}")
    _guarded(run)


@main.command(name="complexity")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", default=None)
def complexity_cmd(config_path, out_dir):
    """Model size: parameters (1e6), GFlops/forward, memory estimate."""
    def run():
        exp = load_config(config_path)
        model = init_fusion_model(exp.fusion, seed=0)
        report = complexity(model, batch_size=exp.train.batch_size)
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        click.echo(text, nl=False)
        if out_dir:
            _write(out_dir, "complexity.json", text)
    _guarded(run)


@main.command(name="encode-location")
@click.argument("location_id", type=int)
@click.option("--map", "body_map",
              type=click.Choice(sorted(BODY_MAPS)),
              default="original-484")
def encode_location_cmd(location_id, body_map):
    """Print the 9-bit MSB-first code for a body-map id."""
    def run():
        code = encode_location(location_id, body_map)
        click.echo("".join(str(b) for b in code.bits))
    _guarded(run)


@main.command(name="dwt-dump")
@click.argument("image_path", type=click.Path())
@click.option("--family", type=click.Choice(["haar", "db2"]),
              default="haar")
@click.option("--levels", type=int, default=1)
@click.option("--size", type=int, default=32,
              help="preprocess the image to this square size first")
@click.option("--out", "out_dir", default=None)
def dwt_dump(image_path, family, levels, size, out_dir):
    """Decompose an image and tabulate per-subband shape and energy."""
    def run():
        image = dt.preprocess(image_path, size)
        sb = dwt2(image, WaveletSpec(family, levels))
        rows = [("LL", levels, sb.ll)]
        for i, (lh, hl, hh) in enumerate(sb.details):
            level = levels - i
            rows += [("LH", level, lh), ("HL", level, hl),
                     ("HH", level, hh)]
        lines = ["subband,level,height,width,energy"]
        for name, level, plane in rows:
            energy = float(np.sum(plane * plane))
            lines.append(f"{name},{level},{plane.shape[0]},"
                         f"{plane.shape[1]},{energy!r}")
        text = "\n".join(lines) + "\n"
        click.echo(text, nl=False)
        if out_dir:
            _write(out_dir, "subbands.csv", text)
    _guarded(run)


if __name__ == "__main__":
    main()
