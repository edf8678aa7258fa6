"""Command-line pipeline: synth, convert, prep, train, infer, eval, report.

Exit codes are a stable scripting contract:
    0  success
    1  IO failure (missing/unwritable files, stale lock)
    2  configuration error (bad JSON, unknown keys, invalid values)
    3  data or model incompatibility (dimension mismatch, degenerate data)

All paths are relative to --workdir. A lockfile guards each workdir
against concurrent invocations.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import itertools
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import figures, metrics, prep, report, synth
from .config import FAMILIES, RunConfig, load_config, thread_cap
from .errors import ConfigError, DataError
from .grid import (
    NODATA,
    ClassTable,
    EmbeddingRaster,
    GridManifest,
    LabelRaster,
    read_grid,
    validate_pair,
    write_grid,
)
from .infer import (
    argmax_map,
    as_tile_model,
    predict_raster_pixelwise,
    predict_raster_tiled,
    write_probability_raster,
)
from .models import (
    fit_context,
    fit_gbt,
    fit_logreg,
    fit_random_forest,
    load_model,
    model_family,
    save_model,
)
from .prep import SplitKind
from .report import Palette

LOCKFILE = ".labelreach.lock"

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


@contextlib.contextmanager
def workdir_lock(workdir: Path):
    lock = workdir / LOCKFILE
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OSError(
            f"workdir {workdir} is locked by another invocation (remove {lock} if stale)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _workdir(args, cfg: RunConfig) -> Path:
    wd = Path(args.workdir if args.workdir is not None else cfg.paths.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _resolve(wd: Path, path: str) -> Path:
    return Path(path) if os.path.isabs(path) else wd / path


def _print_table(table: ClassTable) -> None:
    print("class_id  pixel_count  fraction  name")
    for e in table.entries:
        print(f"{e.class_id:8d}  {e.pixel_count:11d}  {e.fraction:8.5f}  {e.name}")


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    scfg = cfg.synth
    if args.seed is not None:
        scfg = dataclasses.replace(scfg, seed=args.seed)
    wd = _workdir(args, cfg)
    with workdir_lock(wd):
        world = synth.generate_world(scfg)
        write_grid(world.embeddings, wd / "embeddings.grd")
        write_grid(world.labels, wd / "labels.grd")
        table = prep.histogram_classes(world.labels)
        table.write_csv(wd / "classes.csv")
        manifest = GridManifest(
            embedding_path="embeddings.grd",
            label_path="labels.grd",
            class_table_path="classes.csv",
            notes=f"synthetic world, config={json.dumps(scfg.to_dict())}",
        )
        manifest.write_json(wd / "manifest.json")
        _print_table(table)
    return EXIT_OK


def cmd_convert(args) -> int:
    cfg = load_config(args.config)
    wd = _workdir(args, cfg)
    raw = np.fromfile(_resolve(wd, args.input), dtype="<f4")
    expected = args.width * args.height * args.bands
    if raw.size != expected:
        raise DataError(
            f"raw dump has {raw.size} float32 values, expected {expected} "
            f"({args.bands}x{args.height}x{args.width})"
        )
    emb = EmbeddingRaster(raw.reshape(args.bands, args.height, args.width))
    with workdir_lock(wd):
        write_grid(emb, wd / args.output)
    return EXIT_OK


def _load_manifest_pair(wd: Path, cfg: RunConfig):
    manifest = GridManifest.read_json(wd / cfg.paths.manifest)
    emb = read_grid(wd / manifest.embedding_path)
    labels = read_grid(wd / manifest.label_path)
    if not isinstance(emb, EmbeddingRaster) or not isinstance(labels, LabelRaster):
        raise DataError("manifest does not point at an embedding/label pair")
    validate_pair(emb, labels)
    return emb, labels


def _prepare(emb, labels, cfg: RunConfig, wd: Path):
    """filter -> remap -> tile -> split; returns (labels', table', split)."""
    table = prep.histogram_classes(labels)
    labels2, table2, remap = prep.filter_rare_classes(labels, table, cfg.prep.threshold)
    if cfg.prep.remap_path is not None:
        user_remap = prep.RemapTable.read_csv(wd / cfg.prep.remap_path)
        labels2 = prep.remap_classes(labels2, user_remap)
        table2 = prep.histogram_classes(labels2)
        names = user_remap.target_names
        table2 = ClassTable(
            [
                prep.ClassEntry(e.class_id, names.get(e.class_id, e.name), e.pixel_count, e.fraction)
                for e in table2.entries
            ]
        )
        remap = prep.RemapTable(
            pairs={src: user_remap.pairs[dst] for src, dst in remap.pairs.items()},
            target_names=names,
        )
    grid = prep.make_tile_grid(labels2.width, labels2.height, cfg.prep.tile)
    split = prep.assign_splits(grid, cfg.prep.fractions, cfg.prep.seed)
    return labels2, table2, remap, split


def cmd_prep(args) -> int:
    cfg = load_config(args.config)
    wd = _workdir(args, cfg)
    with workdir_lock(wd):
        emb, labels = _load_manifest_pair(wd, cfg)
        labels2, table2, remap, split = _prepare(emb, labels, cfg, wd)
        write_grid(labels2, wd / "labels_prepped.grd")
        table2.write_csv(wd / "classes_prepped.csv")
        remap.write_csv(wd / "remap.csv")
        split.write_csv(wd / "splits.csv")
        _print_table(table2)
    return EXIT_OK


def _write_loss_log(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    family = args.family if args.family is not None else cfg.train.family
    fam_cfg = cfg.train.for_family(family)
    wd = _workdir(args, cfg)
    with workdir_lock(wd):
        emb, labels = _load_manifest_pair(wd, cfg)
        labels2, table2, remap, split = _prepare(emb, labels, cfg, wd)
        split.write_csv(wd / "splits.csv")
        remap.write_csv(wd / "remap.csv")
        table2.write_csv(wd / "classes_prepped.csv")
        write_grid(labels2, wd / "labels_prepped.grd")

        if family == "context":
            model = fit_context(emb, labels2, split, fam_cfg)
            rows = [
                (i, t, v)
                for i, (t, v) in enumerate(
                    itertools.zip_longest(model.training_history, model.validation_history, fillvalue="")
                )
            ]
            _write_loss_log(wd / "train_log.csv", ["epoch", "train_loss", "val_loss"], rows)
        else:
            ds = prep.extract_pixels(emb, labels2, split, SplitKind.TRAIN)
            if family == "logreg":
                model = fit_logreg(ds, fam_cfg)
                hist = model.training_history
                _write_loss_log(wd / "train_log.csv", ["iteration", "loss"], list(enumerate(hist)))
            elif family == "forest":
                model = fit_random_forest(ds, fam_cfg)
                _write_loss_log(wd / "train_log.csv", ["tree", "n_nodes"],
                                [(i, t.n_nodes) for i, t in enumerate(model.trees)])
            else:
                model = fit_gbt(ds, fam_cfg)
                _write_loss_log(wd / "train_log.csv", ["round", "loss"],
                                list(enumerate(model.loss_history)))
        save_model(model, wd / "model.json", config=fam_cfg)
        print(f"trained {family}: {wd / 'model.json'}")
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = load_config(args.config)
    wd = _workdir(args, cfg)
    with workdir_lock(wd):
        model = load_model(_resolve(wd, args.model))
        region = read_grid(_resolve(wd, args.region))
        if not isinstance(region, EmbeddingRaster):
            raise DataError(f"{args.region}: inference needs an embedding raster")
        family = model_family(model)
        tile = cfg.prep.tile
        if family == "context":
            stride = args.stride if args.stride is not None else (
                cfg.infer.stride if cfg.infer.stride is not None else max(1, tile // 2)
            )
            probs = predict_raster_tiled(as_tile_model(model), region, tile, stride)
        else:
            probs = predict_raster_pixelwise(model, region)
        predicted = argmax_map(probs)
        write_probability_raster(probs, wd / "probs.grd")
        write_grid(predicted, wd / "predicted.grd")
        palette = Palette.default(range(model.n_classes))
        report.write_class_map(predicted, palette, wd / "map.ppm")
        print(f"inference done: {wd / 'predicted.grd'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    wd = _workdir(args, cfg)
    with workdir_lock(wd):
        pred = read_grid(_resolve(wd, args.pred))
        truth = read_grid(_resolve(wd, args.truth))
        if not isinstance(pred, LabelRaster) or not isinstance(truth, LabelRaster):
            raise DataError("eval needs two label rasters")
        if truth.ids.shape != pred.ids.shape:
            raise DataError(
                f"dimension mismatch: truth {truth.width}x{truth.height} vs pred {pred.width}x{pred.height}"
            )
        both = truth.valid_mask() & pred.valid_mask()
        if not both.any():
            raise DataError("no pixels where both rasters are valid")
        n_classes = int(max(truth.ids[both].max(), pred.ids[both].max())) + 1
        cm = metrics.confusion(truth, pred, n_classes)
        rep = metrics.report(cm)
        rep.write_json(wd / "metrics.json")
        cm.write_csv(wd / "confusion.csv")
        table = _truth_class_table(truth, n_classes)
        (wd / "per_class.csv").write_text(report.per_class_csv(rep, table))
        (wd / "metrics_table.md").write_text(
            report.metrics_table([(args.name, args.split, rep)])
        )
        figures.save_confusion_heatmap(cm, wd / "confusion.png", [e.name for e in table.entries])
        figures.save_per_class_bars(rep, wd / "per_class.png", [e.name for e in table.entries])
        if cfg.eval.bands is not None:
            spec = prep.BandSpec(tuple(cfg.eval.bands))
            band_idx = prep.assign_bands(truth.height, spec)
            bands = metrics.evaluate_by_band(truth, pred, band_idx, n_classes)
            doc = [
                {
                    "band": b.band,
                    "pixels": b.pixels,
                    "report": None if b.empty else b.report.to_dict(),
                }
                for b in bands
            ]
            (wd / "band_reports.json").write_text(json.dumps(doc, indent=2) + "\n")
            figures.save_band_decay(bands, wd / "band_decay.png")
        print(json.dumps({
            "accuracy": rep.accuracy,
            "macro_jaccard": rep.macro_jaccard,
            "macro_f1": rep.macro_f1,
        }))
    return EXIT_OK


def _truth_class_table(truth: LabelRaster, n_classes: int) -> ClassTable:
    """Class table covering [0, n_classes) with counts from the truth raster."""
    ids = truth.ids[truth.valid_mask()]
    counts = np.bincount(ids.astype(np.int64), minlength=n_classes)[:n_classes]
    total = counts.sum()
    entries = [
        prep.ClassEntry(i, f"class_{i}", int(c), (int(c) / total) if total else 0.0)
        for i, c in enumerate(counts)
    ]
    return ClassTable(entries)


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    wd = _workdir(args, cfg)
    with workdir_lock(wd):
        rows = []
        for model_name, split_name, path in args.row:
            doc = json.loads(_resolve(wd, path).read_text())
            rep = metrics.MetricsReport(
                accuracy=doc["accuracy"],
                macro_jaccard=doc["macro_jaccard"],
                macro_f1=doc["macro_f1"],
                per_class=tuple(
                    metrics.PerClassStats(
                        precision=p["precision"],
                        recall=p["recall"],
                        f1=p["f1"],
                        jaccard=p["jaccard"],
                        support=p["support"],
                    )
                    for p in doc["per_class"]
                ),
            )
            rows.append((model_name, split_name, rep))
        if not rows:
            raise ConfigError("report needs at least one --row MODEL SPLIT METRICS_JSON")
        md = report.metrics_table(rows)
        (wd / "metrics_table.md").write_text(md)
        figures.save_metrics_bars(rows, wd / "metrics.png")
        print(md, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="labelreach",
        description="Extend labeled rasters to new regions: synthesize, preprocess, train, infer, evaluate.",
    )
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--workdir", default=None, help="working directory (default from config)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic embedding/label world")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_synth)

    cp = sub.add_parser("convert", help="convert a raw headerless float32 dump to GRD1")
    cp.add_argument("--input", required=True)
    cp.add_argument("--width", type=int, required=True)
    cp.add_argument("--height", type=int, required=True)
    cp.add_argument("--bands", type=int, required=True)
    cp.add_argument("--output", required=True)
    cp.set_defaults(func=cmd_convert)

    pp = sub.add_parser("prep", help="filter, remap, tile and split the labeled world")
    pp.set_defaults(func=cmd_prep)

    tp = sub.add_parser("train", help="preprocess and fit one model family")
    tp.add_argument("--family", choices=FAMILIES, default=None)
    tp.set_defaults(func=cmd_train)

    ip = sub.add_parser("infer", help="run a saved model over a region raster")
    ip.add_argument("--model", default="model.json")
    ip.add_argument("--region", default="embeddings.grd")
    ip.add_argument("--stride", type=int, default=None, help="tile stride for tile models")
    ip.set_defaults(func=cmd_infer)

    ep = sub.add_parser("eval", help="score a prediction raster against truth")
    ep.add_argument("--pred", default="predicted.grd")
    ep.add_argument("--truth", default="labels_prepped.grd")
    ep.add_argument("--name", default="model", help="model name for the metrics table")
    ep.add_argument("--split", default="eval", help="split name for the metrics table")
    ep.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="combine metrics JSONs into a table and figure")
    rp.add_argument(
        "--row",
        nargs=3,
        action="append",
        metavar=("MODEL", "SPLIT", "METRICS_JSON"),
        default=[],
    )
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        thread_cap()
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def console() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console()
