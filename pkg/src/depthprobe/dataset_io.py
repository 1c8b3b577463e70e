"""Loading, writing, and partitioning RGB-D samples with instance annotations.

On-disk formats
---------------
Depth maps come in two encodings:

* 16-bit grayscale PNG holding millimeters (``0`` marks a missing pixel).
* Raw ``DGRD`` grid: the magic bytes ``b"DGRD"``, then little-endian uint32
  width and height, then ``width * height`` little-endian float32 values in
  meters, row-major, with NaN marking a missing pixel.

Instance segmentation is a 16-bit grayscale PNG of instance ids (``0`` is
unlabeled) plus a JSON sidecar next to it (same stem, ``.json`` suffix)::

    {"scene": "bedroom", "instances": [{"id": 1, "class": "bed"}, ...]}

A manifest is a JSON file listing samples; relative paths resolve against the
manifest's directory::

    {"dataset": "nyuv2", "entries": [{"id": ..., "scene": ..., "depth": ...,
     "segmentation": ..., "rgb": ..., "captions": [...]}]}
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image

from .exceptions import ConfigError, FormatError, ValidationError

logger = logging.getLogger(__name__)

DGRD_MAGIC = b"DGRD"
_DGRD_HEADER = struct.Struct("<4sII")
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

DEFAULT_MAX_DEPTH = 10.0


def normalize_scene(label: str) -> str:
    """Canonical scene spelling: lowercase, underscores as spaces."""
    return " ".join(label.replace("_", " ").lower().split())


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass
class DepthGrid:
    """Depth in meters with a per-pixel validity mask.

    ``values`` keeps the decoded file content untouched (NaN where the file
    holds its missing-pixel sentinel), so a grid can be written back
    byte-identically. ``valid`` additionally excludes out-of-range pixels.
    """

    values: np.ndarray
    valid: np.ndarray
    encoding: str = "dgrd"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.values.ndim != 2:
            raise ValidationError(f"depth grid must be 2-D, got shape {self.values.shape}")
        if self.values.shape != self.valid.shape:
            raise ValidationError("depth values and validity mask differ in shape")
        if self.encoding not in ("png", "dgrd"):
            raise ValidationError(f"unknown depth encoding {self.encoding!r}")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_meters(cls, values, max_depth: Optional[float] = DEFAULT_MAX_DEPTH, encoding: str = "dgrd"):
        values = np.asarray(values, dtype=np.float64)
        return cls(values, depth_validity(values, max_depth), encoding)


def depth_validity(values: np.ndarray, max_depth: Optional[float] = DEFAULT_MAX_DEPTH) -> np.ndarray:
    """Pixels that are finite, strictly positive and (optionally) within ``max_depth``."""
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(values) & (values > 0)
        if max_depth is not None:
            valid &= values <= max_depth
    return valid


@dataclass
class SegmentationMap:
    instance_ids: np.ndarray
    class_of: dict[int, str]

    def __post_init__(self):
        self.instance_ids = np.asarray(self.instance_ids)
        if self.instance_ids.ndim != 2:
            raise ValidationError("instance id grid must be 2-D")
        if self.instance_ids.size and (self.instance_ids.min() < 0 or self.instance_ids.max() > 0xFFFF):
            raise ValidationError("instance ids must fit in 16 bits")
        self.instance_ids = self.instance_ids.astype(np.uint16)
        self.class_of = {int(k): str(v) for k, v in self.class_of.items()}
        if 0 in self.class_of:
            raise ValidationError("instance id 0 is reserved for unlabeled pixels")
        present = set(np.unique(self.instance_ids).tolist()) - {0}
        missing = sorted(present - set(self.class_of))
        if missing:
            raise ValidationError(f"segmentation references instance ids without a class: {missing}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.instance_ids.shape

    def present_ids(self) -> list[int]:
        """Instance ids that occur in the grid, ascending."""
        return [i for i in np.unique(self.instance_ids).tolist() if i != 0]

    def mask(self, instance_id: int) -> np.ndarray:
        return self.instance_ids == instance_id


@dataclass
class Sample:
    image_id: str
    scene_label: str
    depth_gt: DepthGrid
    segmentation: SegmentationMap
    rgb: Optional[np.ndarray] = None
    captions: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.depth_gt.shape != self.segmentation.shape:
            raise ValidationError(
                f"{self.image_id}: depth {self.depth_gt.shape} and segmentation "
                f"{self.segmentation.shape} dimensions differ"
            )
        if self.rgb is not None:
            self.rgb = np.asarray(self.rgb)
            if self.rgb.dtype != np.uint8 or self.rgb.shape != self.depth_gt.shape + (3,):
                raise ValidationError(f"{self.image_id}: rgb must be uint8 of shape H x W x 3")

    @property
    def class_of(self) -> dict[int, str]:
        return self.segmentation.class_of


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    scene: str
    depth: Path
    segmentation: Path
    rgb: Optional[Path] = None
    captions: Optional[tuple[str, ...]] = None

    def to_json(self, root: Optional[Path] = None) -> dict:
        def rel(p):
            if root is None:
                return str(p)
            return Path(os.path.relpath(Path(p).resolve(), Path(root).resolve())).as_posix()

        out = {"id": self.image_id, "scene": self.scene, "depth": rel(self.depth),
               "segmentation": rel(self.segmentation)}
        if self.rgb is not None:
            out["rgb"] = rel(self.rgb)
        if self.captions is not None:
            out["captions"] = list(self.captions)
        return out


@dataclass
class DatasetManifest:
    dataset: str
    entries: list[ManifestEntry]
    split_tag: Optional[str] = None
    root: Optional[Path] = None

    def __post_init__(self):
        seen = set()
        dupes = []
        for e in self.entries:
            if e.image_id in seen:
                dupes.append(e.image_id)
            seen.add(e.image_id)
        if dupes:
            raise ValidationError(f"duplicate image ids in manifest: {sorted(set(dupes))}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    def subset(self, entries: Iterable[ManifestEntry], split_tag: Optional[str] = None) -> "DatasetManifest":
        return DatasetManifest(self.dataset, list(entries), split_tag or self.split_tag, self.root)

    def to_json(self) -> dict:
        out = {"dataset": self.dataset}
        if self.split_tag is not None:
            out["split_tag"] = self.split_tag
        out["entries"] = [e.to_json(self.root) for e in self.entries]
        return out

    def digest(self) -> str:
        """SHA-256 over the canonical JSON form; stable across runs."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


# --------------------------------------------------------------------------
# Depth encodings
# --------------------------------------------------------------------------


def decode_dgrd(blob: bytes) -> np.ndarray:
    if len(blob) < _DGRD_HEADER.size:
        raise FormatError(f"DGRD header truncated: need {_DGRD_HEADER.size} bytes at offset 0, got {len(blob)}")
    magic, width, height = _DGRD_HEADER.unpack_from(blob, 0)
    if magic != DGRD_MAGIC:
        raise FormatError(f"bad magic at byte offset 0: expected {DGRD_MAGIC!r}, got {magic!r}")
    expected = width * height * 4
    payload = len(blob) - _DGRD_HEADER.size
    if payload != expected:
        raise FormatError(
            f"DGRD payload at byte offset {_DGRD_HEADER.size}: expected {expected} bytes "
            f"for width={width} height={height}, got {payload}"
        )
    arr = np.frombuffer(blob, dtype="<f4", offset=_DGRD_HEADER.size).reshape(height, width)
    return arr.astype(np.float64)


def encode_dgrd(values: np.ndarray) -> bytes:
    values = np.asarray(values)
    if values.ndim != 2:
        raise ValidationError("DGRD grid must be 2-D")
    height, width = values.shape
    return _DGRD_HEADER.pack(DGRD_MAGIC, width, height) + values.astype("<f4").tobytes()


def _decode_png(blob: bytes, what: str, allowed_modes: Sequence[str]) -> np.ndarray:
    if not blob.startswith(PNG_SIGNATURE):
        raise FormatError(f"{what}: bad PNG signature at byte offset 0")
    try:
        img = Image.open(io.BytesIO(blob))
        img.load()
    except Exception as exc:  # Pillow raises a zoo of types for corrupt data
        raise FormatError(f"{what}: unreadable PNG ({exc})") from exc
    if img.mode not in allowed_modes:
        raise FormatError(f"{what}: PNG field 'mode' is {img.mode!r}, expected one of {list(allowed_modes)}")
    return np.array(img)


def _encode_png(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def decode_png16(blob: bytes, what: str = "png") -> np.ndarray:
    return _decode_png(blob, what, ("I;16",)).astype(np.uint16)


def encode_png16(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim != 2:
        raise ValidationError("16-bit PNG must be 2-D")
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFF):
        raise ValidationError("values do not fit in 16 bits")
    return _encode_png(arr.astype(np.uint16))


def decode_depth(blob: bytes, max_depth: Optional[float] = DEFAULT_MAX_DEPTH) -> DepthGrid:
    """Decode either depth encoding, sniffing the leading bytes."""
    if blob.startswith(DGRD_MAGIC):
        return DepthGrid(*_with_validity(decode_dgrd(blob), max_depth), encoding="dgrd")
    if blob.startswith(PNG_SIGNATURE):
        mm = decode_png16(blob, "depth png")
        meters = mm.astype(np.float64) / 1000.0
        meters[mm == 0] = np.nan
        return DepthGrid(*_with_validity(meters, max_depth), encoding="png")
    raise FormatError(f"unrecognized depth format at byte offset 0: {blob[:4]!r}")


def _with_validity(values, max_depth):
    return values, depth_validity(values, max_depth)


def encode_depth(grid: DepthGrid, encoding: Optional[str] = None) -> bytes:
    encoding = encoding or grid.encoding
    if encoding == "dgrd":
        return encode_dgrd(grid.values)
    if encoding == "png":
        mm = np.where(np.isfinite(grid.values), np.rint(grid.values * 1000.0), 0.0)
        return encode_png16(np.clip(mm, 0, 0xFFFF).astype(np.uint16))
    raise ConfigError(f"unknown depth encoding {encoding!r}")


def read_depth(path, max_depth: Optional[float] = DEFAULT_MAX_DEPTH) -> DepthGrid:
    path = Path(path)
    try:
        return decode_depth(path.read_bytes(), max_depth)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_depth(path, grid: DepthGrid, encoding: Optional[str] = None) -> None:
    Path(path).write_bytes(encode_depth(grid, encoding))


# --------------------------------------------------------------------------
# Segmentation and RGB
# --------------------------------------------------------------------------


def sidecar_path(seg_path) -> Path:
    return Path(seg_path).with_suffix(".json")


def read_segmentation(path) -> tuple[SegmentationMap, Optional[str]]:
    """Read an instance PNG and its JSON sidecar; returns the map and the sidecar's scene."""
    path = Path(path)
    ids = decode_png16(path.read_bytes(), f"{path}")
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except FileNotFoundError:
        raise FormatError(f"{side}: segmentation sidecar missing") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    if not isinstance(meta, dict) or not isinstance(meta.get("instances"), list):
        raise FormatError(f"{side}: field 'instances' must be a list")
    class_of = {}
    for k, inst in enumerate(meta["instances"]):
        if not isinstance(inst, dict) or not isinstance(inst.get("id"), int) or not isinstance(inst.get("class"), str):
            raise FormatError(f"{side}: field 'instances[{k}]' needs integer 'id' and string 'class'")
        if inst["id"] in class_of:
            raise ValidationError(f"{side}: instance id {inst['id']} listed twice")
        class_of[inst["id"]] = inst["class"]
    try:
        seg = SegmentationMap(ids, class_of)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return seg, meta.get("scene")


def write_segmentation(path, seg: SegmentationMap, scene: str) -> None:
    path = Path(path)
    path.write_bytes(encode_png16(seg.instance_ids))
    meta = {"scene": scene, "instances": [{"id": i, "class": c} for i, c in sorted(seg.class_of.items())]}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_rgb(path) -> np.ndarray:
    path = Path(path)
    img = _decode_png(path.read_bytes(), str(path), ("RGB", "RGBA", "L", "P"))
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    return np.ascontiguousarray(img[..., :3]).astype(np.uint8)


def write_rgb(path, rgb: np.ndarray) -> None:
    Path(path).write_bytes(_encode_png(np.asarray(rgb, dtype=np.uint8)))


# --------------------------------------------------------------------------
# Samples and manifests
# --------------------------------------------------------------------------


def load_sample(entry: ManifestEntry, max_depth: float = DEFAULT_MAX_DEPTH, with_rgb: bool = True) -> Sample:
    """Load and validate one manifest entry."""
    for label, p in (("depth", entry.depth), ("segmentation", entry.segmentation)):
        if not Path(p).is_file():
            raise FormatError(f"{entry.image_id}: {label} file not found: {p}")
    depth = read_depth(entry.depth, max_depth)
    seg, side_scene = read_segmentation(entry.segmentation)
    if side_scene is not None and normalize_scene(side_scene) != normalize_scene(entry.scene):
        raise ValidationError(
            f"{entry.image_id}: manifest scene {entry.scene!r} disagrees with sidecar scene {side_scene!r}"
        )
    rgb = read_rgb(entry.rgb) if (with_rgb and entry.rgb is not None) else None
    return Sample(entry.image_id, entry.scene, depth, seg, rgb, list(entry.captions or ()))


def write_sample(sample: Sample, out_dir, depth_encoding: Optional[str] = None) -> ManifestEntry:
    """Write a sample's files into ``out_dir`` and return its manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    encoding = depth_encoding or sample.depth_gt.encoding
    depth_path = out_dir / f"{sample.image_id}_depth.{'png' if encoding == 'png' else 'dgrd'}"
    seg_path = out_dir / f"{sample.image_id}_seg.png"
    write_depth(depth_path, sample.depth_gt, encoding)
    write_segmentation(seg_path, sample.segmentation, sample.scene_label)
    rgb_path = None
    if sample.rgb is not None:
        rgb_path = out_dir / f"{sample.image_id}_rgb.png"
        write_rgb(rgb_path, sample.rgb)
    captions = tuple(sample.captions) if sample.captions else None
    return ManifestEntry(sample.image_id, sample.scene_label, depth_path, seg_path, rgb_path, captions)


def _entry_from_json(obj: dict, k: int, root: Path) -> ManifestEntry:
    for key in ("id", "scene", "depth", "segmentation"):
        if not isinstance(obj.get(key), str):
            raise FormatError(f"manifest field 'entries[{k}].{key}' must be a string")
    captions = obj.get("captions")
    if isinstance(captions, str):
        cap_path = root / captions
        captions = [ln.strip() for ln in cap_path.read_text().splitlines() if ln.strip()]
    if captions is not None:
        if not isinstance(captions, list) or not all(isinstance(c, str) for c in captions):
            raise FormatError(f"manifest field 'entries[{k}].captions' must be a list of strings")
        captions = tuple(captions)
    rgb = obj.get("rgb")
    return ManifestEntry(obj["id"], obj["scene"], root / obj["depth"], root / obj["segmentation"],
                         root / rgb if rgb else None, captions)


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from None
    if not isinstance(data, dict) or not isinstance(data.get("entries"), list):
        raise FormatError(f"{path}: field 'entries' must be a list")
    root = path.parent
    entries = [_entry_from_json(obj, k, root) for k, obj in enumerate(data["entries"])]
    manifest = DatasetManifest(str(data.get("dataset", "")), entries, data.get("split_tag"), root)
    if check_files:
        missing = [str(p) for e in entries for p in (e.depth, e.segmentation, e.rgb)
                   if p is not None and not Path(p).is_file()]
        if missing:
            raise ValidationError(f"{path}: manifest references missing files: {missing[:10]}")
    return manifest


def write_manifest(path, manifest: DatasetManifest) -> None:
    path = Path(path)
    path.write_text(json.dumps(replace(manifest, root=path.parent).to_json(), indent=2) + "\n")


def partition_by_scene(manifest: DatasetManifest, train_scenes, test_scenes):
    """Split a manifest into (train, test) by scene label.

    Entries whose scene is in neither set are dropped with a warning.
    """
    train = {normalize_scene(s) for s in train_scenes}
    test = {normalize_scene(s) for s in test_scenes}
    overlap = train & test
    if overlap:
        raise ConfigError(f"train and test scene sets overlap: {sorted(overlap)}")
    tr, te, dropped = [], [], 0
    for e in manifest.entries:
        scene = normalize_scene(e.scene)
        if scene in train:
            tr.append(e)
        elif scene in test:
            te.append(e)
        else:
            dropped += 1
    if dropped:
        logger.warning("partition_by_scene: dropped %d entries whose scene is in neither set", dropped)
    return manifest.subset(tr, "train"), manifest.subset(te, "test")


def select_relation_complete_subset(manifest: DatasetManifest, overlap: float = 1.0, unique_only: bool = True,
                                    max_depth: float = DEFAULT_MAX_DEPTH) -> DatasetManifest:
    """Keep samples with at least one depth, one vertical and one horizontal relation."""
    from .spatial_relations import RelationConfig, is_relation_complete

    cfg = RelationConfig(overlap)
    kept = [e for e in manifest.entries
            if is_relation_complete(load_sample(e, max_depth, with_rgb=False), cfg, unique_only)]
    return manifest.subset(kept)


# Scene split for the out-of-distribution supervised setting (NYUv2).
NYUV2_OOD_TRAIN_SCENES = (
    "printer room", "bathroom", "living room", "study", "conference room",
    "study room", "kitchen", "home office", "bedroom", "dinette", "playroom",
    "indoor balcony", "laundry room", "basement", "exercise room",
)
NYUV2_OOD_TEST_SCENES = (
    "student lounge", "dining room", "reception room",
    "computer lab", "classroom", "office", "bookstore",
    "foyer", "home storage", "cafe", "furniture store", "office kitchen",
)
