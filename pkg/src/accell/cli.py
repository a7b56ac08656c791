"""Command-line interface.

Subcommands cover the full pipeline: ``phantom-gen`` (synthetic dataset),
``segment`` (chamber masks), ``alpha-search`` (cutoff-scale search plus
classifier training), ``detect`` (final detections), ``eval`` (metrics,
including the full split/repeat protocol) and ``overlay`` (rendering).

Configuration precedence: command-line flags override values from a JSON
config file (``--config``), which overrides built-in defaults. Every run
writes ``run.json`` with the fully resolved configuration next to its
outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from dataclasses import replace
from pathlib import Path

from . import classifier as clf
from .chamber import ChamberMask
from .detection import detect_cells, search_alpha
from .errors import AccellError
from .io import draw_overlay, read_mask, write_image, write_mask
from .phantom import SplitSpec, generate_dataset, load_entries, load_manifest, split
from .pipeline import (BackendConfig, RunConfig, compute_chambers, evaluate_detections,
                       read_detections, run_protocol, segmentation_report,
                       write_detections, write_report)

ADAPTER_ENV_VARS = ("ACCELL_ADAPTER_CMD", "ACCDOR_ADAPTER_CMD")


def _load_config_file(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def _resolve_config(args) -> RunConfig:
    config = _load_config_file(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for attr in ("count", "seed", "jobs"):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[attr] = value
    if getattr(args, "repeats", None) is not None:
        overrides["split"] = SplitSpec(config.split.ratios, args.repeats,
                                       args.split_seed if args.split_seed is not None
                                       else config.split.seed)
    elif getattr(args, "split_seed", None) is not None:
        overrides["split"] = SplitSpec(config.split.ratios, config.split.repeats,
                                       args.split_seed)
    backend = _resolve_backend(args, config.backend)
    if backend is not None:
        overrides["backend"] = backend
    if overrides:
        config = replace(config, **overrides)
    return config


def _resolve_backend(args, default: BackendConfig) -> BackendConfig | None:
    kind = getattr(args, "backend", None)
    adapter_cmd = getattr(args, "adapter_cmd", None)
    if adapter_cmd is None:
        for var in ADAPTER_ENV_VARS:
            if os.environ.get(var):
                adapter_cmd = os.environ[var]
                break
    fill = getattr(args, "fill_tolerance", None)
    if kind is None and adapter_cmd is None and fill is None:
        return None
    kind = kind or default.kind
    if kind == "external":
        command = tuple(shlex.split(adapter_cmd)) if adapter_cmd else default.command
        return BackendConfig("external", default.fill_tolerance, command, default.timeout)
    return BackendConfig("oracle", fill if fill is not None else default.fill_tolerance)


def _write_run_record(out_dir: Path, command: str, config: RunConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    record = {"command": command, "config": config.to_dict()}
    (out_dir / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _chamber_mask_path(out_dir: Path, image_id: str, fmt: str = "png") -> Path:
    return out_dir / f"{image_id}_pred_chamber.{fmt}"


def cmd_phantom_gen(args) -> int:
    config = _resolve_config(args)
    out_dir = Path(args.out)
    _write_run_record(out_dir, "phantom-gen", config)
    manifest = generate_dataset(config.phantom, config.count, config.seed,
                                out_dir, args.format)
    print(f"wrote {len(manifest.entries)} phantoms and manifest.json to {out_dir}")
    return 0


def _load_dataset(args):
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    return manifest, load_entries(manifest, manifest_path.parent)


def cmd_segment(args) -> int:
    config = _resolve_config(args)
    _, entries = _load_dataset(args)
    out_dir = Path(args.out)
    _write_run_record(out_dir, "segment", config)
    chambers = compute_chambers(entries, config)
    prompts = {}
    for e in entries:
        cm = chambers[e.image_id]
        write_mask(_chamber_mask_path(out_dir, e.image_id), cm.mask)
        prompts[e.image_id] = {
            "points": [[int(r), int(c)] for (r, c) in cm.prompts_used.points],
            "centroid": [float(x) for x in cm.prompts_used.source_centroid],
        }
    (out_dir / "prompts.json").write_text(json.dumps(prompts, indent=2, sort_keys=True) + "\n")
    report = segmentation_report(entries, chambers)
    write_report(out_dir / "segmentation.json", report)
    print(f"segmented {len(entries)} images: mean IoU {report['mean_iou']:.4f}, "
          f"mean Dice {report['mean_dice']:.4f}")
    return 0


def _load_predicted_chambers(entries, chambers_dir: Path) -> dict[str, ChamberMask]:
    from .chamber import PromptSet
    out = {}
    for e in entries:
        path = _chamber_mask_path(chambers_dir, e.image_id)
        if not path.exists():
            path = _chamber_mask_path(chambers_dir, e.image_id, "pgm")
        mask = read_mask(path)
        out[e.image_id] = ChamberMask(mask, PromptSet((), (0.0, 0.0)))
    return out


def _samples(entries, chambers):
    from .detection import DetectionSample
    return [DetectionSample(e.image_id, e.image, chambers[e.image_id].mask, e.cells)
            for e in entries]


def cmd_alpha_search(args) -> int:
    config = _resolve_config(args)
    _, entries = _load_dataset(args)
    chambers = _load_predicted_chambers(entries, Path(args.chambers))
    out_dir = Path(args.out)
    _write_run_record(out_dir, "alpha-search", config)

    from .phantom import DatasetManifest, ManifestEntry
    stub = DatasetManifest(tuple(ManifestEntry(f"{e.image_id}.png", "", e.cells)
                                 for e in entries), {})
    train_m, val_m, _ = split(stub, config.split, args.repeat)
    by_id = {e.image_id: e for e in entries}
    train = _samples([by_id[e.image_id] for e in train_m.entries], chambers)
    val = _samples([by_id[e.image_id] for e in val_m.entries], chambers)

    report, params = search_alpha(train, val, config.cdm, config.train)
    clf.save_params(params, out_dir / "classifier.bin")
    from dataclasses import asdict
    write_report(out_dir / "alpha_report.json", {
        "best_alpha": report.best_alpha,
        "per_alpha": [asdict(s) for s in report.per_alpha],
    })
    print(f"best alpha {report.best_alpha:.2f}; wrote classifier.bin and "
          f"alpha_report.json to {out_dir}")
    return 0


def cmd_detect(args) -> int:
    config = _resolve_config(args)
    _, entries = _load_dataset(args)
    chambers = _load_predicted_chambers(entries, Path(args.chambers))
    params = clf.load_params(args.classifier)
    out_path = Path(args.out)
    _write_run_record(out_path.parent, "detect", config)
    detections = {
        e.image_id: detect_cells(e.image, chambers[e.image_id].mask, args.alpha,
                                 params, config.cdm)
        for e in entries
    }
    write_detections(out_path, detections)
    total = sum(len(v) for v in detections.values())
    print(f"wrote {total} detections for {len(entries)} images to {out_path}")
    return 0


def cmd_eval(args) -> int:
    config = _resolve_config(args)
    _, entries = _load_dataset(args)
    out_dir = Path(args.out)
    _write_run_record(out_dir, "eval", config)

    if args.detections:
        report = evaluate_detections(entries, read_detections(args.detections))
        write_report(out_dir / "report.json", report)
        print(f"box-level P/R/F1: {report['box']['precision']:.4f} "
              f"{report['box']['recall']:.4f} {report['box']['f1']:.4f}")
        return 0

    chambers = compute_chambers(entries, config)
    report = {
        "segmentation": segmentation_report(entries, chambers),
        "detection": run_protocol(entries, chambers, config),
        "config": config.to_dict(),
    }
    write_report(out_dir / "report.json", report)
    agg = report["detection"]["aggregate"]
    for method in ("baseline", "unfiltered", "cdm"):
        m = agg[method]
        print(f"{method:10s} box P/R/F1 = {m['box_precision_mean']:.4f} "
              f"{m['box_recall_mean']:.4f} {m['box_f1_mean']:.4f}")
    return 0


def cmd_overlay(args) -> int:
    _, entries = _load_dataset(args)
    by_id = {e.image_id: e for e in entries}
    if args.image_id not in by_id:
        raise AccellError(f"image id {args.image_id!r} not present in the manifest")
    entry = by_id[args.image_id]
    boxes = []
    if args.detections:
        detections = read_detections(args.detections).get(args.image_id, [])
        boxes = [d.box for d in detections]
    points = entry.cells if args.gt else ()
    write_image(args.out, draw_overlay(entry.image, boxes, points))
    print(f"wrote overlay for {args.image_id} to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accell",
        description="Anterior chamber segmentation and cell detection pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file mirroring the run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None, help="worker threads for per-image stages")

    p = sub.add_parser("phantom-gen", help="generate a synthetic phantom dataset")
    add_common(p)
    p.add_argument("--count", type=int, default=None, help="number of phantoms")
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom_gen)

    def add_backend(p):
        p.add_argument("--backend", choices=("oracle", "external"), default=None)
        p.add_argument("--adapter-cmd", default=None,
                       help="external adapter command line (also via "
                            + " or ".join(ADAPTER_ENV_VARS) + ")")
        p.add_argument("--fill-tolerance", type=int, default=None,
                       help="oracle backend region-growing tolerance")

    p = sub.add_parser("segment", help="compute chamber masks for a dataset")
    add_common(p)
    add_backend(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("alpha-search", help="search the cutoff scale and train the classifier")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--chambers", required=True, help="directory with predicted chamber masks")
    p.add_argument("--repeat", type=int, default=0, help="split repeat index")
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_alpha_search)

    p = sub.add_parser("detect", help="detect cells with a trained classifier")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--chambers", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True, help="output detections JSONL path")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="evaluate detections or run the full protocol")
    add_common(p)
    add_backend(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", default=None,
                   help="detections JSONL to score; omit to run the full protocol")
    p.add_argument("--repeats", type=int, default=None,
                   help="number of split repeats for the full protocol")
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("overlay", help="render detections and ground truth onto an image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-id", required=True)
    p.add_argument("--detections", default=None)
    p.add_argument("--gt", action=argparse.BooleanOptionalAction, default=True,
                   help="draw ground-truth cell points")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlay)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AccellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
