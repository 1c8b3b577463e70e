"""The six standard depth metrics, their aggregation, and run-to-run deltas.

Over the pixels valid in both maps:

* ``rmse``    = sqrt(mean((p - g)^2))
* ``abs_rel`` = mean(|p - g| / g)
* ``log10``   = mean(|log10 p - log10 g|)
* ``delta_i`` = fraction of pixels with max(p/g, g/p) < base^i (strict)
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .dataset_io import DepthGrid, depth_validity
from .exceptions import ConfigError, DegenerateError, ValidationError

METRICS = ("delta1", "delta2", "delta3", "rmse", "abs_rel", "log10")
HIGHER_IS_BETTER = {"delta1": True, "delta2": True, "delta3": True, "rmse": False, "abs_rel": False, "log10": False}
AGGREGATIONS = ("per_image_mean", "pixel_pool")


@dataclass(frozen=True)
class EvalConfig:
    max_depth: float = 10.0
    min_depth: float = 1e-3
    delta_base: float = 1.25
    crop: Optional[tuple[int, int, int, int]] = None  # row_start, row_stop, col_start, col_stop
    aggregation: str = "per_image_mean"
    allow_resize: bool = False

    def __post_init__(self):
        if not 0 < self.min_depth < self.max_depth:
            raise ConfigError(f"need 0 < min_depth < max_depth, got {self.min_depth}, {self.max_depth}")
        if not self.delta_base > 1:
            raise ConfigError(f"delta_base must exceed 1, got {self.delta_base}")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.crop is not None:
            if len(self.crop) != 4:
                raise ConfigError("crop is (row_start, row_stop, col_start, col_stop)")
            object.__setattr__(self, "crop", tuple(int(c) for c in self.crop))


@dataclass(frozen=True)
class ImageMetrics:
    delta1: float
    delta2: float
    delta3: float
    rmse: float
    abs_rel: float
    log10: float
    valid_pixels: int

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRICS)


def resize_nearest(values: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    h, w = values.shape
    rows = np.minimum(((np.arange(shape[0]) + 0.5) * h / shape[0]).astype(int), h - 1)
    cols = np.minimum(((np.arange(shape[1]) + 0.5) * w / shape[1]).astype(int), w - 1)
    return values[np.ix_(rows, cols)]


def _as_values(x: Union[DepthGrid, np.ndarray]) -> np.ndarray:
    return x.values if isinstance(x, DepthGrid) else np.asarray(x, dtype=np.float64)


def evaluation_mask(pred: np.ndarray, gt: np.ndarray, cfg: EvalConfig) -> np.ndarray:
    mask = depth_validity(gt, cfg.max_depth) & np.isfinite(pred)
    if cfg.crop is not None:
        r0, r1, c0, c1 = cfg.crop
        crop = np.zeros_like(mask)
        crop[r0:r1, c0:c1] = True
        mask &= crop
    return mask


def pixel_metrics(pred: Union[DepthGrid, np.ndarray], gt: Union[DepthGrid, np.ndarray],
                  cfg: EvalConfig = EvalConfig()) -> ImageMetrics:
    """Metrics for one image. Predictions are clamped into [min_depth, max_depth]."""
    p = _as_values(pred)
    g = _as_values(gt)
    if p.shape != g.shape:
        if not cfg.allow_resize:
            raise ValidationError(f"prediction shape {p.shape} differs from ground truth {g.shape}")
        p = resize_nearest(p, g.shape)
    mask = evaluation_mask(p, g, cfg)
    if isinstance(gt, DepthGrid):
        mask &= gt.valid
    n = int(mask.sum())
    if n == 0:
        raise DegenerateError("no pixel is valid in both prediction and ground truth")
    g = g[mask]
    p = np.clip(p[mask], cfg.min_depth, cfg.max_depth)
    ratio = np.maximum(p / g, g / p)
    return ImageMetrics(
        delta1=float(np.mean(ratio < cfg.delta_base)),
        delta2=float(np.mean(ratio < cfg.delta_base ** 2)),
        delta3=float(np.mean(ratio < cfg.delta_base ** 3)),
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        abs_rel=float(np.mean(np.abs(p - g) / g)),
        log10=float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
        valid_pixels=n,
    )


@dataclass
class MetricReport:
    per_image: dict[str, ImageMetrics]
    aggregate: dict[str, float]
    n_images: int
    aggregation: str = "per_image_mean"
    degenerate: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "aggregation": self.aggregation,
            "n_images": self.n_images,
            "degenerate": sorted(self.degenerate),
            "aggregate": {m: self.aggregate[m] for m in METRICS},
            "per_image": {k: asdict(self.per_image[k]) for k in sorted(self.per_image)},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, data: Mapping) -> "MetricReport":
        try:
            agg = {m: float(data["aggregate"][m]) for m in METRICS}
        except KeyError as exc:
            raise ValidationError(f"metric report lacks aggregate field {exc}") from None
        per_image = {k: ImageMetrics(**v) for k, v in data.get("per_image", {}).items()}
        return cls(per_image, agg, int(data.get("n_images", len(per_image))),
                   data.get("aggregation", "per_image_mean"), list(data.get("degenerate", [])))

    @classmethod
    def load(cls, path) -> "MetricReport":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def aggregate(per_image: Union[Mapping[str, ImageMetrics], Iterable[tuple[str, ImageMetrics]]],
              aggregation: str = "per_image_mean", degenerate: Iterable[str] = ()) -> MetricReport:
    """Combine per-image metrics; summation runs in ascending image-id order.

    ``per_image_mean`` averages images with equal weight. ``pixel_pool``
    weights each image by its valid pixel count (RMSE pooled in squared form).
    """
    items = dict(per_image.items() if isinstance(per_image, Mapping) else per_image)
    if not items:
        raise ValidationError("cannot aggregate an empty set of images")
    if aggregation not in AGGREGATIONS:
        raise ConfigError(f"unknown aggregation {aggregation!r}")
    ids = sorted(items)
    rows = [items[i] for i in ids]
    if aggregation == "per_image_mean":
        n = len(rows)
        agg = {m: math.fsum(getattr(r, m) for r in rows) / n for m in METRICS}
    else:
        total = sum(r.valid_pixels for r in rows)
        agg = {m: math.fsum(getattr(r, m) * r.valid_pixels for r in rows) / total for m in METRICS}
        agg["rmse"] = math.sqrt(math.fsum(r.rmse ** 2 * r.valid_pixels for r in rows) / total)
    return MetricReport({i: items[i] for i in ids}, agg, len(ids), aggregation, sorted(degenerate))


@dataclass(frozen=True)
class DeltaRow:
    metric: str
    value_a: float
    value_b: float
    delta: float
    percent: Optional[float]


def compare(run_a: MetricReport, run_b: MetricReport, intersect: bool = False) -> list[DeltaRow]:
    """Signed change from run ``a`` to run ``b`` for every metric, plus percent change."""
    a_agg, b_agg = run_a.aggregate, run_b.aggregate
    ids_a, ids_b = set(run_a.per_image), set(run_b.per_image)
    if ids_a and ids_b and ids_a != ids_b:
        if not intersect:
            raise ValidationError(
                f"reports cover different images ({len(ids_a ^ ids_b)} differ); pass intersect=True to compare "
                "on the common subset"
            )
        common = ids_a & ids_b
        if not common:
            raise ValidationError("reports share no images")
        a_agg = aggregate({i: run_a.per_image[i] for i in common}, run_a.aggregation).aggregate
        b_agg = aggregate({i: run_b.per_image[i] for i in common}, run_b.aggregation).aggregate
    rows = []
    for m in METRICS:
        a, b = a_agg[m], b_agg[m]
        pct = 100.0 * (b - a) / a if a != 0 else None
        rows.append(DeltaRow(m, a, b, b - a, pct))
    return rows
