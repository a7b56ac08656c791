"""Synthetic phantom images with exact ground truth.

Each phantom mimics the geometry this pipeline targets: a bright
elliptical ring (the anterior segment) around a dark chamber, on a
mid-dark background. Cells are small bright blobs inside the chamber.
The chamber also receives dim clutter (speckles and short streaks) that
the candidate threshold picks up but the crop classifier should reject,
and cell intensities are drawn so that a sizable fraction lies below the
plain automatic threshold but above the scaled cutoff. Noise is Gaussian,
clipped to one sigma, so every region stays within a bounded band of its
base intensity.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, InvalidConfig
from .io import read_image, read_mask, write_image, write_mask

# Ellipse semi-axes as fractions of (height, width).
CHAMBER_SEMIAXES = (0.25, 0.355)
SEGMENT_SEMIAXES = (0.3375, 0.45)
# Placement margins in pixels.
CELL_MARGIN = 14
MIN_BLOB_SEPARATION = 9
SPLIT_GAP_HALFWIDTH = 3.0


@dataclass(frozen=True)
class PhantomConfig:
    height: int = 400
    width: int = 366
    chamber_intensity: int = 15
    segment_intensity: int = 170
    background_intensity: int = 40
    noise_sigma: float = 5.0
    cell_count_range: tuple[int, int] = (10, 18)
    cell_intensity_range: tuple[int, int] = (75, 160)
    cell_area_range: tuple[int, int] = (1, 9)
    clutter_count_range: tuple[int, int] = (12, 22)
    clutter_intensity_range: tuple[int, int] = (72, 95)
    split_segment_probability: float = 0.3

    def __post_init__(self):
        if self.segment_intensity <= self.chamber_intensity + 4 * self.noise_sigma:
            raise InvalidConfig("segment and chamber intensities are not separable")
        if self.cell_intensity_range[0] <= self.chamber_intensity + 4 * self.noise_sigma:
            raise InvalidConfig("cells are not separable from the chamber floor")
        for lo, hi in (self.cell_count_range, self.cell_intensity_range,
                       self.cell_area_range, self.clutter_count_range,
                       self.clutter_intensity_range):
            if lo > hi:
                raise InvalidConfig(f"inverted range ({lo}, {hi})")
        if not (0.0 <= self.split_segment_probability <= 1.0):
            raise InvalidConfig("split_segment_probability must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomConfig":
        kwargs = dict(d)
        for key, value in kwargs.items():
            if isinstance(value, list):
                kwargs[key] = tuple(value)
        return cls(**kwargs)

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class GroundTruth:
    chamber_mask: np.ndarray
    cell_points: tuple[tuple[int, int], ...]


def _ellipse(h, w, semi_r, semi_c):
    rr, cc = np.ogrid[:h, :w]
    return ((rr - (h - 1) / 2.0) / semi_r) ** 2 + ((cc - (w - 1) / 2.0) / semi_c) ** 2 <= 1.0


def _grow_blob(seed_point, area, rng):
    """Compact blob of ``area`` pixels grown around the seed."""
    blob = [tuple(seed_point)]
    frontier = set()
    while len(blob) < area:
        for (r, c) in blob:
            for dr, dc in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                p = (r + dr, c + dc)
                if p not in blob:
                    frontier.add(p)
        ranked = sorted(frontier, key=lambda p: ((p[0] - seed_point[0]) ** 2
                                                 + (p[1] - seed_point[1]) ** 2, p))
        nxt = ranked[0]
        blob.append(nxt)
        frontier.discard(nxt)
    return blob


def _place(rng, candidates, taken, count, min_sep2):
    """Draw up to ``count`` points from ``candidates`` keeping separation."""
    placed = []
    attempts = 0
    while len(placed) < count and attempts < 200 * max(count, 1):
        attempts += 1
        r, c = candidates[rng.integers(len(candidates))]
        if all((r - tr) ** 2 + (c - tc) ** 2 >= min_sep2 for tr, tc in taken):
            placed.append((int(r), int(c)))
            taken.append((int(r), int(c)))
    return placed


def generate_phantom(config: PhantomConfig, seed: int) -> tuple[np.ndarray, GroundTruth]:
    """Render one phantom image and its exact ground truth.

    Deterministic in (config, seed). Raises :class:`InvalidConfig` when the
    dimensions leave no room for cell placement.
    """
    h, w = config.height, config.width
    inner_semi = (CHAMBER_SEMIAXES[0] * h - CELL_MARGIN, CHAMBER_SEMIAXES[1] * w - CELL_MARGIN)
    if min(inner_semi) < 2:
        raise InvalidConfig(f"dimensions {h}x{w} are too small for the phantom geometry")
    chamber = _ellipse(h, w, CHAMBER_SEMIAXES[0] * h, CHAMBER_SEMIAXES[1] * w)
    outer = _ellipse(h, w, SEGMENT_SEMIAXES[0] * h, SEGMENT_SEMIAXES[1] * w)
    ring = outer & ~chamber
    interior = _ellipse(h, w, inner_semi[0], inner_semi[1])
    if not interior.any() or not ring.any():
        raise InvalidConfig(f"dimensions {h}x{w} are too small for the phantom geometry")

    rng = np.random.default_rng(seed)
    img = np.full((h, w), float(config.background_intensity))
    img[chamber] = config.chamber_intensity
    img[ring] = config.segment_intensity

    if rng.random() < config.split_segment_probability:
        theta = rng.uniform(0.0, np.pi)
        rr, cc = np.mgrid[:h, :w]
        dist = np.abs((rr - (h - 1) / 2.0) * np.cos(theta)
                      + (cc - (w - 1) / 2.0) * np.sin(theta))
        img[ring & (dist < SPLIT_GAP_HALFWIDTH)] = config.background_intensity

    taken: list[tuple[int, int]] = []
    interior_points = np.argwhere(interior)

    n_cells = int(rng.integers(config.cell_count_range[0], config.cell_count_range[1] + 1))
    cell_points = _place(rng, interior_points, taken, n_cells, MIN_BLOB_SEPARATION ** 2)
    for point in cell_points:
        intensity = rng.uniform(*config.cell_intensity_range)
        area = int(rng.integers(config.cell_area_range[0], config.cell_area_range[1] + 1))
        for (r, c) in _grow_blob(point, area, rng):
            if 0 <= r < h and 0 <= c < w:
                img[r, c] = intensity

    n_clutter = int(rng.integers(config.clutter_count_range[0],
                                 config.clutter_count_range[1] + 1))
    # A few clutter marks land on the background to exercise the chamber
    # gate; the rest go inside the chamber where they act as candidates.
    rr2, cc2 = np.ogrid[:h, :w]
    far_outside = (((rr2 - (h - 1) / 2.0) / (SEGMENT_SEMIAXES[0] * h)) ** 2
                   + ((cc2 - (w - 1) / 2.0) / (SEGMENT_SEMIAXES[1] * w)) ** 2 >= 1.3)
    far_outside[:8, :] = far_outside[-8:, :] = False
    far_outside[:, :8] = far_outside[:, -8:] = False
    outside_points = np.argwhere(far_outside)
    for _ in range(n_clutter):
        pool = outside_points if (rng.random() < 0.2 and len(outside_points)) else interior_points
        spot = _place(rng, pool, taken, 1, MIN_BLOB_SEPARATION ** 2)
        if not spot:
            continue
        r, c = spot[0]
        intensity = rng.uniform(*config.clutter_intensity_range)
        if rng.random() < 0.5:
            img[r, c] = intensity
        else:
            dr, dc = ((0, 1), (1, 0), (1, 1))[int(rng.integers(3))]
            length = int(rng.integers(3, 7))
            for k in range(length):
                pr, pc = r + k * dr, c + k * dc
                if 0 <= pr < h and 0 <= pc < w:
                    img[pr, pc] = intensity

    noise = np.clip(rng.normal(0.0, config.noise_sigma, (h, w)),
                    -config.noise_sigma, config.noise_sigma)
    out = np.clip(np.rint(img + noise), 0, 255).astype(np.uint8)
    return out, GroundTruth(chamber, tuple(cell_points))


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    chamber_mask: str
    cells: tuple[tuple[int, int], ...]

    @property
    def image_id(self) -> str:
        return Path(self.image).stem


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "entries": [
                {"image": e.image, "chamber_mask": e.chamber_mask,
                 "cells": [[int(r), int(c)] for (r, c) in e.cells]}
                for e in self.entries
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        entries = tuple(
            ManifestEntry(e["image"], e["chamber_mask"],
                          tuple((int(r), int(c)) for r, c in e["cells"]))
            for e in d["entries"]
        )
        return cls(entries, d.get("metadata", {}))


def save_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> DatasetManifest:
    return DatasetManifest.from_dict(json.loads(Path(path).read_text()))


def generate_dataset(config: PhantomConfig, count: int, seed: int, out_dir,
                     image_format: str = "png") -> DatasetManifest:
    """Generate ``count`` phantoms under ``out_dir`` and write a manifest.

    Each image gets its own child seed derived from (seed, index), so a
    given phantom is reproducible independently of the batch size.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        child_seed = np.random.SeedSequence([seed, i])
        image, gt = generate_phantom(config, child_seed)
        stem = f"phantom_{i:04d}"
        image_name = f"{stem}.{image_format}"
        mask_name = f"{stem}_chamber.{image_format}"
        write_image(out_dir / image_name, image)
        write_mask(out_dir / mask_name, gt.chamber_mask)
        entries.append(ManifestEntry(image_name, mask_name, gt.cell_points))
    manifest = DatasetManifest(
        tuple(entries),
        {"seed": seed, "count": count, "config": config.to_dict(),
         "config_digest": config.digest()},
    )
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest


@dataclass(frozen=True)
class LoadedEntry:
    image_id: str
    image: np.ndarray
    chamber_mask: np.ndarray
    cells: tuple[tuple[int, int], ...]


def load_entries(manifest: DatasetManifest, root) -> list[LoadedEntry]:
    root = Path(root)
    out = []
    for e in manifest.entries:
        out.append(LoadedEntry(
            e.image_id,
            read_image(root / e.image),
            read_mask(root / e.chamber_mask),
            e.cells,
        ))
    return out


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.40, 0.10, 0.50)
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise InvalidConfig(f"split ratios must sum to 1, got {self.ratios}")
        if self.repeats < 1:
            raise InvalidConfig("repeats must be >= 1")


def split(manifest: DatasetManifest, spec: SplitSpec, repeat_index: int):
    """Shuffle entries (seeded by spec.seed and the repeat index) and
    partition by the ratios: floor counts for train and val, remainder to
    test. Returns (train, val, test) manifests.
    """
    if not manifest.entries:
        raise EmptyDataset("cannot split an empty manifest")
    if not (0 <= repeat_index < spec.repeats):
        raise InvalidConfig(f"repeat_index {repeat_index} outside [0, {spec.repeats})")
    n = len(manifest.entries)
    rng = np.random.default_rng([spec.seed, repeat_index])
    order = rng.permutation(n)
    n_train = int(np.floor(spec.ratios[0] * n))
    n_val = int(np.floor(spec.ratios[1] * n))
    parts = (order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:])
    return tuple(
        DatasetManifest(tuple(manifest.entries[i] for i in part), manifest.metadata)
        for part in parts
    )
