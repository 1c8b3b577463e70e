"""Per-object geometry and depth statistics.

Coordinate convention: ``row`` (X) grows downward and ``col`` (Y) grows
rightward. Vertical relations compare rows, horizontal relations compare
columns.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .dataset_io import DepthGrid, Sample, SegmentationMap
from .exceptions import DegenerateError, NotFoundError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectInstance:
    instance_id: int
    class_name: str
    row: float
    col: float
    radius: float
    depth_mean: float
    depth_std: float
    depth_max: float
    pixel_count: int


def compute_object_stats(depth: DepthGrid, seg: SegmentationMap, instance_id: int) -> ObjectInstance:
    """Centroid, maximum radius and depth statistics of one instance.

    The centroid and radius use every mask pixel; depth statistics use only
    the depth-valid ones. The radius is the largest Euclidean distance from
    the centroid to a mask pixel, and the standard deviation is the
    population one.
    """
    mask = seg.mask(instance_id)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise NotFoundError(f"instance {instance_id} does not occur in the segmentation")
    d = depth.values[mask & depth.valid]
    if d.size == 0:
        raise DegenerateError(f"instance {instance_id} has no valid depth pixels")
    r0 = rows.mean()
    c0 = cols.mean()
    radius = float(np.sqrt(((rows - r0) ** 2 + (cols - c0) ** 2).max()))
    mu = float(d.mean())
    return ObjectInstance(
        instance_id=int(instance_id),
        class_name=seg.class_of[int(instance_id)],
        row=float(r0),
        col=float(c0),
        radius=radius,
        depth_mean=mu,
        depth_std=float(np.sqrt(((d - mu) ** 2).mean())),
        depth_max=float(d.max()),
        pixel_count=int(rows.size),
    )


def class_counts(sample: Sample) -> Counter:
    seg = sample.segmentation
    return Counter(seg.class_of[i] for i in seg.present_ids())


def all_objects(sample: Sample) -> list[ObjectInstance]:
    """Stats for every non-degenerate instance, by ascending instance id."""
    out = []
    for iid in sample.segmentation.present_ids():
        try:
            out.append(compute_object_stats(sample.depth_gt, sample.segmentation, iid))
        except DegenerateError:
            logger.warning("%s: skipping instance %d with no valid depth", sample.image_id, iid)
    return out


def unique_objects(sample: Sample) -> list[ObjectInstance]:
    """Stats for instances whose class occurs exactly once in the sample.

    Uniqueness is decided before degenerate objects are dropped, so a
    duplicate class still disqualifies both copies.
    """
    counts = class_counts(sample)
    return [o for o in all_objects(sample) if counts[o.class_name] == 1]
