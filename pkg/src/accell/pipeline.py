"""End-to-end orchestration: chamber segmentation over a dataset, the
split/repeat evaluation protocol, and detection serialization.

The evaluation protocol shuffles the dataset into train/validation/test
splits, searches the cutoff scale and trains the classifier on the first
two, then scores three methods on the test split:

* ``baseline`` - plain automatic threshold (scale 1.0), no classifier;
* ``unfiltered`` - scaled cutoff at the best found scale, no classifier;
* ``cdm`` - scaled cutoff plus classifier filtering.

The whole procedure repeats with reshuffled splits and reports per-repeat
numbers plus means and standard deviations.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .backends import ExternalProcessSegmenter, OracleSegmenter
from .chamber import DEFAULT_MERGE_RATIO, DEFAULT_OFFSETS, ChamberMask, ChamberSegmenter
from .classifier import TrainConfig
from .detection import (CandidateBox, CdmConfig, DetectionSample, Detection,
                        candidates_from_threshold, detect_cells, search_alpha)
from .errors import InvalidConfig
from .metrics import box_scores, dice, image_scores, iou, match_boxes
from .phantom import DatasetManifest, LoadedEntry, PhantomConfig, SplitSpec, split
from .thresholding import isodata_threshold


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "oracle"  # "oracle" or "external"
    fill_tolerance: int = 10
    command: tuple[str, ...] = ()
    timeout: float = 120.0

    def __post_init__(self):
        if self.kind not in ("oracle", "external"):
            raise InvalidConfig(f"unknown backend kind {self.kind!r}")
        if self.kind == "external" and not self.command:
            raise InvalidConfig("external backend requires an adapter command line")

    def create(self):
        if self.kind == "oracle":
            return OracleSegmenter(self.fill_tolerance)
        return ExternalProcessSegmenter(list(self.command), self.timeout)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration for a pipeline run."""

    phantom: PhantomConfig = PhantomConfig()
    count: int = 50
    seed: int = 1
    merge_ratio: float = DEFAULT_MERGE_RATIO
    offsets: tuple[tuple[float, float], ...] = DEFAULT_OFFSETS
    connectivity: int = 8
    cdm: CdmConfig = CdmConfig()
    train: TrainConfig = TrainConfig()
    split: SplitSpec = SplitSpec()
    backend: BackendConfig = BackendConfig()
    jobs: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = {k: v for k, v in d["train"].items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        kwargs = {}
        if "phantom" in d:
            kwargs["phantom"] = PhantomConfig.from_dict(d.pop("phantom"))
        if "cdm" in d:
            kwargs["cdm"] = CdmConfig(**d.pop("cdm"))
        if "train" in d:
            t = d.pop("train")
            if "hidden_dims" in t:
                t["hidden_dims"] = tuple(t["hidden_dims"])
            kwargs["train"] = TrainConfig(**t)
        if "split" in d:
            s = d.pop("split")
            if "ratios" in s:
                s["ratios"] = tuple(s["ratios"])
            kwargs["split"] = SplitSpec(**s)
        if "backend" in d:
            b = d.pop("backend")
            if "command" in b:
                b["command"] = tuple(b["command"])
            kwargs["backend"] = BackendConfig(**b)
        if "offsets" in d:
            d["offsets"] = tuple(tuple(o) for o in d.pop("offsets"))
        kwargs.update(d)
        return cls(**kwargs)


def compute_chambers(entries, config: RunConfig) -> dict[str, ChamberMask]:
    """Segment the chamber of every entry, optionally across worker threads.

    Each worker gets its own backend connection; the oracle backend is
    stateless so sharing would also be safe.
    """
    def job(chunk):
        backend = config.backend.create()
        seg = ChamberSegmenter(backend, config.merge_ratio, config.offsets,
                               config.connectivity).fit()
        try:
            return {e.image_id: seg.segment(e.image) for e in chunk}
        finally:
            if hasattr(backend, "close"):
                backend.close()

    jobs = max(1, int(config.jobs))
    if jobs == 1 or len(entries) <= 1:
        return job(entries)
    chunks = [entries[i::jobs] for i in range(jobs)]
    out: dict[str, ChamberMask] = {}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        for result in pool.map(job, [c for c in chunks if c]):
            out.update(result)
    return out


def segmentation_report(entries, chambers: dict[str, ChamberMask]) -> dict:
    per_image = {}
    for e in entries:
        mask = chambers[e.image_id].mask
        per_image[e.image_id] = {
            "iou": iou(mask, e.chamber_mask),
            "dice": dice(mask, e.chamber_mask),
        }
    ious = [v["iou"] for v in per_image.values()]
    dices = [v["dice"] for v in per_image.values()]
    return {
        "mean_iou": float(np.mean(ious)),
        "mean_dice": float(np.mean(dices)),
        "per_image": per_image,
    }


def _to_samples(entries, chambers) -> list[DetectionSample]:
    return [DetectionSample(e.image_id, e.image, chambers[e.image_id].mask, e.cells)
            for e in entries]


def _score_method(detections_per_image: dict[str, list[CandidateBox]], samples) -> dict:
    confusions = [match_boxes(detections_per_image[s.image_id], s.cells) for s in samples]
    box = box_scores(confusions)
    img = image_scores(confusions)
    return {
        "box": {"precision": box.precision, "recall": box.recall, "f1": box.f1},
        "image": {"precision": img.precision, "recall": img.recall, "f1": img.f1},
    }


def run_protocol(entries, chambers: dict[str, ChamberMask], config: RunConfig,
                 repeats: int | None = None) -> dict:
    """Run the split/repeat evaluation protocol and aggregate the results."""
    spec = config.split if repeats is None else SplitSpec(
        config.split.ratios, repeats, config.split.seed)
    manifest = DatasetManifest(
        tuple(_entry_stub(e) for e in entries), {})
    by_id = {e.image_id: e for e in entries}

    repeat_reports = []
    for r in range(spec.repeats):
        train_m, val_m, test_m = split(manifest, spec, r)
        train = _to_samples([by_id[e.image_id] for e in train_m.entries], chambers)
        val = _to_samples([by_id[e.image_id] for e in val_m.entries], chambers)
        test = _to_samples([by_id[e.image_id] for e in test_m.entries], chambers)

        report, params = search_alpha(train, val, config.cdm, config.train)
        base_t = {s.image_id: isodata_threshold(s.image).threshold for s in test}

        baseline = {s.image_id: candidates_from_threshold(
            s.image, s.chamber, base_t[s.image_id], config.cdm) for s in test}
        unfiltered = {s.image_id: candidates_from_threshold(
            s.image, s.chamber, report.best_alpha * base_t[s.image_id], config.cdm)
            for s in test}
        cdm = {s.image_id: [d.box for d in detect_cells(
            s.image, s.chamber, report.best_alpha, params, config.cdm)] for s in test}

        repeat_reports.append({
            "repeat": r,
            "best_alpha": report.best_alpha,
            "alpha_search": [asdict(s) for s in report.per_alpha],
            "split": {
                "train": [e.image_id for e in train_m.entries],
                "val": [e.image_id for e in val_m.entries],
                "test": [e.image_id for e in test_m.entries],
            },
            "methods": {
                "baseline": _score_method(baseline, test),
                "unfiltered": _score_method(unfiltered, test),
                "cdm": _score_method(cdm, test),
            },
        })

    aggregate: dict[str, dict] = {}
    for method in ("baseline", "unfiltered", "cdm"):
        aggregate[method] = {}
        for level in ("box", "image"):
            for metric in ("precision", "recall", "f1"):
                vals = [rep["methods"][method][level][metric] for rep in repeat_reports]
                aggregate[method][f"{level}_{metric}_mean"] = float(np.mean(vals))
                aggregate[method][f"{level}_{metric}_std"] = float(np.std(vals))
    return {"repeats": repeat_reports, "aggregate": aggregate}


def _entry_stub(entry: LoadedEntry):
    from .phantom import ManifestEntry
    return ManifestEntry(f"{entry.image_id}.png", f"{entry.image_id}_chamber.png",
                         entry.cells)


def write_detections(path, detections_per_image: dict[str, list[Detection]]) -> None:
    """Write detections as JSON lines, one image per line."""
    lines = []
    for image_id in detections_per_image:
        boxes = [
            {"row": int(d.box.center[0]), "col": int(d.box.center[1]),
             "h": int(d.box.height), "w": int(d.box.width), "score": float(d.score)}
            for d in detections_per_image[image_id]
        ]
        lines.append(json.dumps({"image": image_id, "boxes": boxes}, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_detections(path) -> dict[str, list[Detection]]:
    out: dict[str, list[Detection]] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        msg = json.loads(line)
        out[msg["image"]] = [
            Detection(CandidateBox((int(b["row"]), int(b["col"])),
                                   int(b["h"]), int(b["w"]), 0), float(b.get("score", 1.0)))
            for b in msg["boxes"]
        ]
    return out


def evaluate_detections(entries, detections_per_image: dict[str, list[Detection]]) -> dict:
    """Score stored detections against ground-truth points."""
    confusions = {}
    for e in entries:
        dets = detections_per_image.get(e.image_id, [])
        confusions[e.image_id] = match_boxes([d.box for d in dets], e.cells)
    box = box_scores(confusions.values())
    img = image_scores(confusions.values())
    return {
        "per_image": {
            image_id: {"tp": c.tp, "fp": c.fp, "fn": c.fn}
            for image_id, c in confusions.items()
        },
        "box": {"precision": box.precision, "recall": box.recall, "f1": box.f1},
        "image": {"precision": img.precision, "recall": img.recall, "f1": img.f1},
    }


def write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
