"""Markdown/JSON rendering, corpus statistics and adversarial score summaries."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .dataset_io import Sample, normalize_scene
from .depth_metrics import METRICS, DeltaRow
from .exceptions import FormatError, ValidationError
from .object_stats import all_objects, unique_objects
from .sentence_gen import AdversarialTriplet, word_count
from .spatial_relations import AXES, RelationConfig, axis_counts, extract_from_objects

METRIC_HEADERS = {
    "delta1": "δ1↑", "delta2": "δ2↑", "delta3": "δ3↑",
    "rmse": "RMSE↓", "abs_rel": "Abs.REL↓", "log10": "Log10↓",
}
DECIMALS = 3


def fmt(x: Optional[float], decimals: int = DECIMALS) -> str:
    if x is None:
        return "n/a"
    s = f"{x:.{decimals}f}"
    return s[1:] if s.startswith("-") and float(s) == 0 else s


def _md_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def _split_row(line: str) -> list[str]:
    return [c.strip() for c in line.strip().strip("|").split("|")]


def render_metrics_table(rows: Sequence[tuple[str, Mapping[str, float]]], label: str = "Setting") -> str:
    """One row per run; columns δ1↑ δ2↑ δ3↑ RMSE↓ Abs.REL↓ Log10↓ at three decimals."""
    header = [label] + [METRIC_HEADERS[m] for m in METRICS]
    return _md_table(header, ([name] + [fmt(values[m]) for m in METRICS] for name, values in rows))


def parse_metrics_table(text: str) -> list[tuple[str, dict[str, float]]]:
    """Inverse of :func:`render_metrics_table` (values come back at table precision)."""
    lines = [ln for ln in text.splitlines() if ln.strip().startswith("|")]
    if len(lines) < 2:
        raise FormatError("not a Markdown table")
    header = _split_row(lines[0])
    by_header = {v: k for k, v in METRIC_HEADERS.items()}
    cols = [by_header.get(h) for h in header[1:]]
    if cols != list(METRICS):
        raise FormatError(f"unexpected metric columns {header[1:]}")
    out = []
    for ln in lines[2:]:
        cells = _split_row(ln)
        out.append((cells[0], {m: float(c) for m, c in zip(METRICS, cells[1:])}))
    return out


def render_delta_table(rows: Sequence[DeltaRow]) -> str:
    header = ["Metric", "Run A", "Run B", "Δ", "Δ%"]
    body = ([METRIC_HEADERS[r.metric], fmt(r.value_a), fmt(r.value_b), _signed(r.delta),
             _signed(r.percent, 1)] for r in rows)
    return _md_table(header, body)


def _signed(x: Optional[float], decimals: int = DECIMALS) -> str:
    s = fmt(x, decimals)
    return s if s.startswith("-") or s == "n/a" else "+" + s


def delta_rows_json(rows: Sequence[DeltaRow]) -> list[dict]:
    return [asdict(r) for r in rows]


# --------------------------------------------------------------------------
# Corpus statistics
# --------------------------------------------------------------------------


def scene_statistics(samples: Iterable[Sample], cfg: RelationConfig = RelationConfig()) -> dict[str, dict]:
    """Per-scene object, caption and relation counts.

    Relation counts use every object, unique or not, and count both
    directions of each related pair.
    """
    acc = defaultdict(lambda: {"objects": [], "unique": [], "words": [], "relations": dict.fromkeys(AXES, 0)})
    for s in samples:
        a = acc[normalize_scene(s.scene_label)]
        objs = all_objects(s)
        a["objects"].append(len(s.segmentation.present_ids()))
        a["unique"].append(len(unique_objects(s)))
        a["words"].extend(word_count(c) for c in s.captions)
        for axis, n in axis_counts(extract_from_objects(objs, cfg)).items():
            a["relations"][axis] += n
    out = {}
    for scene in sorted(acc):
        a = acc[scene]
        n = len(a["objects"])
        out[scene] = {
            "n_images": n,
            "mean_objects": math.fsum(a["objects"]) / n,
            "mean_unique_objects": math.fsum(a["unique"]) / n,
            "mean_caption_words": math.fsum(a["words"]) / len(a["words"]) if a["words"] else None,
            "relations": dict(a["relations"]),
            "mean_relations": {k: v / n for k, v in a["relations"].items()},
        }
    return out


def render_stats_table(stats: Mapping[str, Mapping]) -> str:
    header = ["Scene", "Images", "Objects", "Unique objects", "Caption words"] + [f"{a} rels" for a in AXES]
    body = ([scene, str(s["n_images"]), fmt(s["mean_objects"]), fmt(s["mean_unique_objects"]),
             fmt(s["mean_caption_words"])] + [str(s["relations"][a]) for a in AXES]
            for scene, s in stats.items())
    return _md_table(header, body)


# --------------------------------------------------------------------------
# Adversarial score summaries
# --------------------------------------------------------------------------

SCORE_COLUMNS = ("image_id", "axis", "original", "relation_switch", "object_switch")


@dataclass(frozen=True)
class ScoredTriplet:
    image_id: str
    axis: str
    score_original: float
    score_relation_switch: float
    score_object_switch: float


@dataclass(frozen=True)
class AdversarialRow:
    axis: str
    n: int
    original: float
    relation_switch: float
    object_switch: float
    delta_rel: float
    delta_obj: float

    @property
    def rel_negative(self) -> bool:
        return self.delta_rel < 0

    @property
    def obj_negative(self) -> bool:
        return self.delta_obj < 0

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(rel_negative=self.rel_negative, obj_negative=self.obj_negative)
        return d


def read_scores_csv(path) -> list[ScoredTriplet]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SCORE_COLUMNS:
            raise FormatError(f"{path}: header must be {','.join(SCORE_COLUMNS)}")
        out = []
        for k, row in enumerate(reader, start=2):
            try:
                out.append(ScoredTriplet(row["image_id"], row["axis"], float(row["original"]),
                                         float(row["relation_switch"]), float(row["object_switch"])))
            except (TypeError, ValueError):
                raise FormatError(f"{path}: line {k} has a missing or non-numeric score") from None
    return out


def read_triplets_jsonl(path) -> list[AdversarialTriplet]:
    out = []
    with open(path) as fh:
        for k, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(AdversarialTriplet(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise FormatError(f"{path}: line {k}: {exc}") from None
    return out


def match_scores(triplets: Sequence[AdversarialTriplet], scores: Sequence[ScoredTriplet]) -> list[ScoredTriplet]:
    """Pair triplets with score rows by (image_id, axis) in file order; every row must pair up."""
    pending = defaultdict(list)
    for s in scores:
        pending[(s.image_id, s.axis)].append(s)
    matched, unmatched = [], []
    for t in triplets:
        queue = pending.get((t.image_id, t.axis))
        if queue:
            matched.append(queue.pop(0))
        else:
            unmatched.append(f"triplet {t.image_id}/{t.axis}")
    unmatched += [f"score {k[0]}/{k[1]}" for k, q in pending.items() for _ in q]
    if unmatched:
        raise ValidationError(f"unmatched triplet/score rows: {unmatched[:10]}")
    return matched


def adversarial_summary(scored: Iterable[ScoredTriplet]) -> list[AdversarialRow]:
    """Per-axis mean scores and the original-minus-switched deltas."""
    by_axis = defaultdict(list)
    for s in scored:
        by_axis[s.axis].append(s)
    rows = []
    for axis in sorted(by_axis, key=lambda a: (AXES.index(a) if a in AXES else len(AXES), a)):
        group = by_axis[axis]
        n = len(group)
        orig = math.fsum(s.score_original for s in group) / n
        rel = math.fsum(s.score_relation_switch for s in group) / n
        obj = math.fsum(s.score_object_switch for s in group) / n
        rows.append(AdversarialRow(axis, n, orig, rel, obj, orig - rel, orig - obj))
    return rows


def render_adversarial_table(rows: Sequence[AdversarialRow]) -> str:
    """Negative deltas (a switched sentence scoring higher) are marked ``(neg)``."""
    header = ["Relationship", "Original", "Relation switch", "Object switch", "Δ orig-rel", "Δ orig-obj"]

    def cell(x, neg):
        return fmt(x) + (" (neg)" if neg else "")

    body = ([r.axis.capitalize(), fmt(r.original), fmt(r.relation_switch), fmt(r.object_switch),
             cell(r.delta_rel, r.rel_negative), cell(r.delta_obj, r.obj_negative)] for r in rows)
    return _md_table(header, body)
