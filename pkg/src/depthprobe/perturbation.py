"""Object masking in RGB and the sentence describing where the masked object was."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .dataset_io import Sample
from .exceptions import ConfigError, NotFoundError, PolicyError
from .object_stats import ObjectInstance, class_counts
from .sentence_gen import SentenceRecord, TemplateSet, relation_sentence
from .spatial_relations import SpatialRelation

PARTNER_PRIORITY = ("depth", "horizontal", "vertical")


@dataclass(frozen=True)
class MaskSpec:
    """``fill`` is ``"zero"``, ``"mean_rgb"`` or an int / RGB triple constant."""

    target_instance: int
    fill: Union[str, int, tuple] = "zero"
    compensation: str = "depth_axis_preferred"

    def __post_init__(self):
        if isinstance(self.fill, str) and self.fill not in ("zero", "mean_rgb"):
            raise ConfigError(f"unknown fill policy {self.fill!r}")
        if self.compensation not in ("depth_axis_preferred", "none"):
            raise ConfigError(f"unknown compensation policy {self.compensation!r}")


@dataclass(frozen=True)
class MaskReceipt:
    image_id: str
    target_id: int
    target_class: str
    pixels_masked: int
    bbox: tuple[int, int, int, int]  # row_min, col_min, row_max, col_max (inclusive)
    compensation_text: Optional[str] = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["bbox"] = list(self.bbox)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def fill_value(rgb: np.ndarray, fill) -> np.ndarray:
    if fill == "zero":
        return np.zeros(3, dtype=np.uint8)
    if fill == "mean_rgb":
        mean = rgb.reshape(-1, 3).astype(np.float64).mean(axis=0)
        return np.floor(mean + 0.5).astype(np.uint8)  # round half up
    value = np.broadcast_to(np.asarray(fill, dtype=np.int64), (3,))
    if value.min() < 0 or value.max() > 255:
        raise ConfigError(f"constant fill {fill!r} outside 0..255")
    return value.astype(np.uint8)


def mask_object(sample: Sample, spec: MaskSpec) -> tuple[np.ndarray, MaskReceipt]:
    """Replace exactly the target's pixels; everything else is copied untouched."""
    if sample.rgb is None:
        raise ConfigError(f"{sample.image_id}: masking needs the RGB image")
    seg = sample.segmentation
    tid = int(spec.target_instance)
    if tid not in seg.present_ids():
        raise NotFoundError(f"{sample.image_id}: instance {tid} not in segmentation")
    cls = seg.class_of[tid]
    if class_counts(sample)[cls] != 1:
        raise PolicyError(f"{sample.image_id}: class {cls!r} of instance {tid} is not unique in the image")
    mask = seg.mask(tid)
    out = sample.rgb.copy()
    out[mask] = fill_value(sample.rgb, spec.fill)
    rows, cols = np.nonzero(mask)
    bbox = (int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max()))
    return out, MaskReceipt(sample.image_id, tid, cls, int(mask.sum()), bbox)


def select_partner(target: Union[ObjectInstance, int], relations: Iterable[SpatialRelation]) -> SpatialRelation:
    """Relation used to describe the target: depth first, then horizontal, then vertical;
    ties go to the lowest partner id."""
    tid = target.instance_id if isinstance(target, ObjectInstance) else int(target)
    own = [r for r in relations if r.subject == tid]
    if not own:
        raise NotFoundError(f"no relation has instance {tid} as subject")
    return min(own, key=lambda r: (PARTNER_PRIORITY.index(r.axis), r.object))


def compensation_sentence(sample: Sample, target: Union[ObjectInstance, int], relations: Iterable[SpatialRelation],
                          templates: TemplateSet = TemplateSet()) -> SentenceRecord:
    rel = select_partner(target, relations)
    return relation_sentence(rel, sample.class_of, templates, image_id=sample.image_id)[0]
