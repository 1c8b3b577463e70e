"""A tiny deterministic RGB-D dataset for smoke tests and demos."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset_io import DatasetManifest, DepthGrid, Sample, SegmentationMap, write_depth, write_manifest, write_sample

# (scene, [(class, row_slice, col_slice, base_depth)], caption)
_LAYOUTS = [
    ("bedroom", [("bed", (5, 8), (0, 3), 3.0), ("lamp", (0, 2), (6, 8), 1.2), ("picture", (0, 2), (0, 2), 4.0)],
     "A bed in a room."),
    ("kitchen", [("refrigerator", (0, 4), (0, 2), 3.5), ("knife", (6, 8), (6, 8), 0.8), ("chair", (6, 8), (0, 2), 2.0),
                 ("chair", (3, 5), (5, 7), 2.2)], "A kitchen with a fridge, a knife and two chairs."),
    ("bedroom", [("bed", (4, 8), (4, 8), 2.5), ("plant", (0, 2), (0, 2), 1.5)], "A small bedroom with a plant."),
    ("office", [("desk", (5, 8), (2, 6), 1.8), ("monitor", (0, 2), (5, 8), 2.6), ("plant", (0, 3), (0, 2), 0.9)],
     "An office desk with a monitor."),
    ("bathroom", [("sink", (2, 4), (2, 4), 1.4)], "A sink."),
]

SIZE = 8


def make_toy_samples(seed: int = 0) -> list[Sample]:
    rng = np.random.default_rng(seed)
    samples = []
    for k, (scene, objects, caption) in enumerate(_LAYOUTS):
        ids = np.zeros((SIZE, SIZE), dtype=np.uint16)
        # background wall, quantized to millimeters so PNG storage is lossless
        depth = np.round(rng.uniform(5.0, 6.0, (SIZE, SIZE)), 3)
        class_of = {}
        for iid, (cls, (r0, r1), (c0, c1), base) in enumerate(objects, start=1):
            ids[r0:r1, c0:c1] = iid
            depth[r0:r1, c0:c1] = np.round(base + rng.uniform(-0.05, 0.05, (r1 - r0, c1 - c0)), 3)
            class_of[iid] = cls
        depth[SIZE - 1, SIZE // 2] = 0.0  # one missing pixel per image
        values = np.where(depth > 0, depth, np.nan)
        grid = DepthGrid.from_meters(values, encoding="png")
        rgb = rng.integers(1, 256, (SIZE, SIZE, 3), dtype=np.uint8)
        samples.append(Sample(f"toy{k:02d}", scene, grid, SegmentationMap(ids, class_of), rgb, [caption]))
    return samples


def build_toy_dataset(out_dir, seed: int = 0) -> Path:
    """Write the toy samples plus ``manifest.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    entries = [write_sample(s, out_dir) for s in make_toy_samples(seed)]
    manifest_path = out_dir / "manifest.json"
    write_manifest(manifest_path, DatasetManifest("toy", entries, root=out_dir))
    return manifest_path


def build_toy_predictions(out_dir, seed: int = 1, noise: float = 0.1) -> Path:
    """Multiplicative-noise predictions for the toy samples, as DGRD files named ``<id>.dgrd``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for s in make_toy_samples():
        gt = np.nan_to_num(s.depth_gt.values, nan=5.0)
        pred = (gt * rng.uniform(1 - noise * 3, 1 + noise * 3, gt.shape)).astype(np.float32)
        write_depth(out_dir / f"{s.image_id}.dgrd", DepthGrid.from_meters(pred))
    return out_dir
