"""Pairwise horizontal, vertical and depth relations between object instances."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable

from .dataset_io import Sample
from .exceptions import ConfigError, ValidationError
from .object_stats import ObjectInstance, all_objects, unique_objects

AXES = ("horizontal", "vertical", "depth")
DIRECTIONS = {
    "horizontal": ("left", "right"),
    "vertical": ("above", "below"),
    "depth": ("front", "behind"),
}
OPPOSITE = {"left": "right", "right": "left", "above": "below", "below": "above",
            "front": "behind", "behind": "front"}
AXIS_OF = {d: axis for axis, pair in DIRECTIONS.items() for d in pair}


@dataclass(frozen=True)
class SpatialRelation:
    subject: int
    object: int
    axis: str
    direction: str

    def __post_init__(self):
        if AXIS_OF.get(self.direction) != self.axis:
            raise ValidationError(f"direction {self.direction!r} does not belong to axis {self.axis!r}")
        if self.subject == self.object:
            raise ValidationError("a relation needs two distinct instances")

    def sort_key(self):
        return (self.subject, self.object, AXES.index(self.axis))

    def flipped(self) -> "SpatialRelation":
        """Same pair, opposite direction."""
        return SpatialRelation(self.subject, self.object, self.axis, OPPOSITE[self.direction])

    def swapped(self) -> "SpatialRelation":
        """Same direction, subject and object exchanged."""
        return SpatialRelation(self.object, self.subject, self.axis, self.direction)

    def converse(self) -> "SpatialRelation":
        """The equivalent statement with the roles exchanged (left(A,B) -> right(B,A))."""
        return SpatialRelation(self.object, self.subject, self.axis, OPPOSITE[self.direction])


@dataclass(frozen=True)
class RelationConfig:
    """``overlap`` scales the summed radii that two centroids must clear."""

    overlap: float = 1.0

    def __post_init__(self):
        if not self.overlap >= 0:
            raise ConfigError(f"overlap factor must be non-negative, got {self.overlap}")


def extract_pair(a: ObjectInstance, b: ObjectInstance, cfg: RelationConfig = RelationConfig()) -> list[SpatialRelation]:
    """Relations with ``a`` as subject; at most one per axis."""
    out = []
    gap = cfg.overlap * (a.radius + b.radius)
    if abs(a.col - b.col) > gap:
        out.append(SpatialRelation(a.instance_id, b.instance_id, "horizontal",
                                   "left" if a.col < b.col else "right"))
    if abs(a.row - b.row) > gap:
        out.append(SpatialRelation(a.instance_id, b.instance_id, "vertical",
                                   "above" if a.row < b.row else "below"))
    spread = (a.depth_max - a.depth_mean) + (b.depth_max - b.depth_mean)
    if abs(a.depth_mean - b.depth_mean) > spread:
        # ties fall through to "behind"
        closer = a.depth_mean + a.depth_std < b.depth_mean + b.depth_std
        out.append(SpatialRelation(a.instance_id, b.instance_id, "depth", "front" if closer else "behind"))
    return out


def extract_from_objects(objects: Iterable[ObjectInstance], cfg: RelationConfig = RelationConfig(),
                         canonical_only: bool = False) -> list[SpatialRelation]:
    objects = list(objects)
    rels = []
    for a, b in itertools.permutations(objects, 2):
        if canonical_only and a.instance_id > b.instance_id:
            continue
        rels.extend(extract_pair(a, b, cfg))
    rels.sort(key=SpatialRelation.sort_key)
    return rels


def extract_all(sample: Sample, cfg: RelationConfig = RelationConfig(), unique_only: bool = True,
                canonical_only: bool = False) -> list[SpatialRelation]:
    """All relations over ordered pairs of eligible objects, sorted by (subject, object, axis).

    With ``canonical_only`` each unordered pair is reported once, with the
    lower instance id as subject.
    """
    objects = unique_objects(sample) if unique_only else all_objects(sample)
    return extract_from_objects(objects, cfg, canonical_only)


def axis_counts(relations: Iterable[SpatialRelation]) -> dict[str, int]:
    counts = dict.fromkeys(AXES, 0)
    for r in relations:
        counts[r.axis] += 1
    return counts


def is_relation_complete(sample: Sample, cfg: RelationConfig = RelationConfig(), unique_only: bool = True) -> bool:
    counts = axis_counts(extract_all(sample, cfg, unique_only))
    return all(counts[a] > 0 for a in AXES)


def relation_to_json(image_id: str, rel: SpatialRelation, class_of: dict[int, str]) -> dict:
    return {
        "image_id": image_id,
        "subject_id": rel.subject,
        "subject_class": class_of[rel.subject],
        "object_id": rel.object,
        "object_class": class_of[rel.object],
        "axis": rel.axis,
        "direction": rel.direction,
    }


def relations_jsonl(image_id: str, relations: Iterable[SpatialRelation], class_of: dict[int, str]) -> str:
    return "".join(json.dumps(relation_to_json(image_id, r, class_of)) + "\n" for r in relations)
