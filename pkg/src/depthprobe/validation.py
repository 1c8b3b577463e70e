"""Input checks in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .dataset_io import DatasetManifest, DepthGrid, Sample, load_manifest, load_sample
from .exceptions import ValidationError


def check_samples(X, max_depth: float = 10.0, with_rgb: bool = True) -> list[Sample]:
    """Accept a Sample, an iterable of Samples, a manifest, or a manifest path."""
    if isinstance(X, Sample):
        return [X]
    if isinstance(X, (str, Path)):
        X = load_manifest(X)
    if isinstance(X, DatasetManifest):
        return [load_sample(e, max_depth, with_rgb) for e in X.entries]
    try:
        samples = list(X)
    except TypeError:
        raise ValidationError(f"expected samples, got {type(X).__name__}") from None
    bad = [type(s).__name__ for s in samples if not isinstance(s, Sample)]
    if bad:
        raise ValidationError(f"expected Sample objects, got {sorted(set(bad))}")
    return samples


def check_depth_array(x: Union[DepthGrid, np.ndarray], name: str = "depth") -> np.ndarray:
    values = x.values if isinstance(x, DepthGrid) else np.asarray(x, dtype=np.float64)
    if values.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D grid, got shape {values.shape}")
    return values


def check_predictions(predictions, samples: Iterable[Sample]) -> dict:
    """Map image ids to predicted grids; accepts a mapping or a sequence aligned with ``samples``."""
    samples = list(samples)
    if isinstance(predictions, dict):
        return {k: check_depth_array(v, f"prediction {k}") for k, v in predictions.items()}
    predictions = list(predictions)
    if len(predictions) != len(samples):
        raise ValidationError(f"{len(predictions)} predictions for {len(samples)} samples")
    return {s.image_id: check_depth_array(p, f"prediction {s.image_id}") for s, p in zip(samples, predictions)}
