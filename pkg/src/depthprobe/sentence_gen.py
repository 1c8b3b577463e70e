"""Sentence corpora: scene, activity, caption and spatial-relation sentences."""

from __future__ import annotations

import random
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .dataset_io import Sample, normalize_scene
from .exceptions import ConfigError, NotFoundError, ValidationError
from .spatial_relations import AXES, DIRECTIONS, SpatialRelation

CLASS_SLOT = "[CLASS]"
SUBJECT_SLOT = "[A]"
OBJECT_SLOT = "[B]"

KINDS = ("scene", "activity", "caption", "spatial")
COMPONENTS = ("scene", "caption", "depth_relations", "horizontal_relations", "vertical_relations", "activity")
MODES = ("stack", "per_template")
VARIANTS = ("canonical", "all", "seeded_random")

DEFAULT_SCENE_TEMPLATES = ("a photo of a [CLASS]",)
ACTIVITY_TEMPLATE = "a picture of a [CLASS]"

DEFAULT_SPATIAL_TEMPLATES = {
    ("depth", "front"): ("[A] is in front of [B]", "[A] is closer than [B]", "[A] is nearer than [B]"),
    ("depth", "behind"): ("[A] is behind [B]", "[A] is farther away than [B]", "[A] is more distant than [B]"),
    ("vertical", "above"): ("[A] is above [B]",),
    ("vertical", "below"): ("[A] is below [B]",),
    ("horizontal", "right"): ("[A] is to the right of [B]",),
    ("horizontal", "left"): ("[A] is to the left of [B]",),
}

# Activity-level paraphrases of the 27 NYUv2 scene classes.
ACTIVITY_DESCRIPTIONS = {
    "printer room": "room to access and operate printing equipment",
    "bathroom": "room to attend to personal hygiene and grooming",
    "living room": "place to relax, socialize, and entertain guests in a house",
    "study": "room to focus on reading, learning, and researching",
    "conference room": "room to hold meetings and discussions",
    "study room": "room to concentrate on academic or professional tasks",
    "kitchen": "room to prepare and cook meals",
    "home office": "place to work on professional tasks from home",
    "bedroom": "room to sleep and rest in a home",
    "dinette": "place to have informal meals",
    "playroom": "place to engage in recreational activities and games for kids",
    "indoor balcony": "place to enjoy views and relax indoors",
    "laundry room": "room to clean and maintain clothing and fabrics",
    "basement": "place for storage, recreation, or utilities usually below ground level",
    "exercise room": "room to workout and engage in physical activities",
    "foyer": "area of the house to welcome guests and as an entryway",
    "home storage": "storage area in a house to store items and belongings",
    "cafe": "place to enjoy beverages and light meals in a social setting",
    "furniture store": "place to browse and purchase furniture items",
    "office kitchen": "place to prepare refreshments and snacks in an office",
    "student lounge": "place to relax and interact in a university or school setting for students",
    "dining room": "room to have formal meals with family or guests",
    "reception room": "room to welcome and accommodate visitors",
    "computer lab": "lab to use computers for learning or work purposes",
    "classroom": "room to attend educational lectures and lessons",
    "office": "place to carry out professional tasks and responsibilities",
    "bookstore": "place to browse and purchase books and literary materials",
}


def _check_slots(template: str, slots: Sequence[str]) -> None:
    for slot in slots:
        if template.count(slot) != 1:
            raise ValidationError(f"template {template!r} must contain {slot} exactly once")


@dataclass(frozen=True)
class TemplateSet:
    scene_templates: tuple[str, ...] = DEFAULT_SCENE_TEMPLATES
    spatial_templates: Mapping[tuple[str, str], tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_SPATIAL_TEMPLATES))

    def __post_init__(self):
        object.__setattr__(self, "scene_templates", tuple(self.scene_templates))
        for t in self.scene_templates:
            _check_slots(t, (CLASS_SLOT,))
        for axis in AXES:
            for direction in DIRECTIONS[axis]:
                phrasings = self.spatial_templates.get((axis, direction), ())
                if not phrasings:
                    raise ValidationError(f"no phrasing for ({axis}, {direction})")
                for t in phrasings:
                    _check_slots(t, (SUBJECT_SLOT, OBJECT_SLOT))

    @classmethod
    def imagenet(cls) -> "TemplateSet":
        """The 80 ImageNet prompt templates as scene templates."""
        text = resources.files("depthprobe").joinpath("data/imagenet_templates.txt").read_text()
        return cls(scene_templates=_template_lines(text))

    @classmethod
    def from_file(cls, path) -> "TemplateSet":
        """Scene templates from a text file, one per line (``#`` starts a comment)."""
        return cls(scene_templates=_template_lines(Path(path).read_text()))


def _template_lines(text: str) -> tuple[str, ...]:
    return tuple(ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#"))


@dataclass(frozen=True)
class SentenceRecord:
    image_id: str
    text: str
    kind: str
    relation: Optional[SpatialRelation] = None
    template_id: Optional[int] = None
    subject: Optional[str] = None
    object: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown sentence kind {self.kind!r}")
        if (self.relation is not None) != (self.kind == "spatial"):
            raise ValidationError("a relation is attached iff the sentence is spatial")

    def to_json(self) -> dict:
        out = {"text": self.text, "kind": self.kind}
        if self.relation is not None:
            out.update(axis=self.relation.axis, direction=self.relation.direction,
                       subject=self.subject, object=self.object)
        if self.template_id is not None:
            out["template_id"] = self.template_id
        return out


@dataclass(frozen=True)
class SentenceGroup:
    """Sentences a downstream embedder treats as one unit.

    ``aggregate="mean_block"``: average the embeddings of the scene-kind
    sentences into one vector, then stack it with each remaining sentence.
    ``aggregate="single"``: embed each sentence on its own.
    """

    image_id: str
    mode: str
    aggregate: str
    sentences: tuple[SentenceRecord, ...]

    def to_json(self) -> dict:
        return {"image_id": self.image_id, "mode": self.mode, "aggregate": self.aggregate,
                "sentences": [s.to_json() for s in self.sentences]}


@dataclass(frozen=True)
class CorpusSpec:
    components: tuple[str, ...] = ("scene",)
    mode: str = "stack"
    max_relations_per_axis: Optional[int] = None
    seed: int = 0
    variant: str = "canonical"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ConfigError("corpus needs at least one component")
        bad = [c for c in self.components if c not in COMPONENTS]
        if bad:
            raise ConfigError(f"unknown corpus components {bad}; choose from {list(COMPONENTS)}")
        if len(set(self.components)) != len(self.components):
            raise ConfigError("corpus components repeat")
        if self.mode not in MODES:
            raise ConfigError(f"unknown corpus mode {self.mode!r}")
        if self.mode == "per_template" and "scene" not in self.components:
            raise ConfigError("per_template mode concatenates onto scene templates; include 'scene'")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown phrasing variant {self.variant!r}")
        if self.max_relations_per_axis is not None and self.max_relations_per_axis < 0:
            raise ConfigError("max_relations_per_axis must be non-negative")


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------


def with_article(name: str) -> str:
    name = name.lower()
    return ("an " if name[:1] in "aeiou" else "a ") + name


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:]


def _decapitalize(text: str) -> str:
    return text[:1].lower() + text[1:]


def render_relation(template: str, subject_name: str, object_name: str) -> str:
    text = template.replace(SUBJECT_SLOT, with_article(subject_name)).replace(OBJECT_SLOT, with_article(object_name))
    return _capitalize(text)


def scene_sentences(scene_label: str, templates: TemplateSet = TemplateSet(), image_id: str = "") -> list[SentenceRecord]:
    if not scene_label:
        raise ValidationError("scene label must be nonempty")
    return [SentenceRecord(image_id, t.replace(CLASS_SLOT, scene_label), "scene", template_id=k)
            for k, t in enumerate(templates.scene_templates)]


def activity_sentence(scene_label: str, image_id: str = "", template: str = ACTIVITY_TEMPLATE) -> SentenceRecord:
    key = normalize_scene(scene_label)
    if key not in ACTIVITY_DESCRIPTIONS:
        raise NotFoundError(f"no activity description for scene {scene_label!r}; "
                            f"known scenes: {sorted(ACTIVITY_DESCRIPTIONS)}")
    return SentenceRecord(image_id, template.replace(CLASS_SLOT, ACTIVITY_DESCRIPTIONS[key]), "activity")


def relation_sentence(rel: SpatialRelation, class_names: Mapping[int, str], templates: TemplateSet = TemplateSet(),
                      variant: str = "canonical", rng: Optional[random.Random] = None,
                      image_id: str = "") -> list[SentenceRecord]:
    phrasings = templates.spatial_templates[(rel.axis, rel.direction)]
    if variant == "canonical":
        chosen = [(0, phrasings[0])]
    elif variant == "all":
        chosen = list(enumerate(phrasings))
    elif variant == "seeded_random":
        rng = rng if rng is not None else random.Random(0)
        k = rng.randrange(len(phrasings))
        chosen = [(k, phrasings[k])]
    else:
        raise ConfigError(f"unknown phrasing variant {variant!r}")
    subj, obj = class_names[rel.subject], class_names[rel.object]
    return [SentenceRecord(image_id, render_relation(t, subj, obj), "spatial", rel, k, subj, obj)
            for k, t in chosen]


def canonical_text(rel: SpatialRelation, class_names: Mapping[int, str], templates: TemplateSet = TemplateSet()) -> str:
    return relation_sentence(rel, class_names, templates)[0].text


@dataclass(frozen=True)
class AdversarialTriplet:
    image_id: str
    axis: str
    original: str
    relation_switch: str
    object_switch: str

    def to_json(self) -> dict:
        return {"image_id": self.image_id, "axis": self.axis, "original": self.original,
                "relation_switch": self.relation_switch, "object_switch": self.object_switch}


def adversarial_variants(rel: SpatialRelation, class_names: Mapping[int, str], templates: TemplateSet = TemplateSet(),
                         image_id: str = "") -> AdversarialTriplet:
    """Original sentence plus its direction-flipped and object-swapped versions."""
    return AdversarialTriplet(
        image_id, rel.axis,
        canonical_text(rel, class_names, templates),
        canonical_text(rel.flipped(), class_names, templates),
        canonical_text(rel.swapped(), class_names, templates),
    )


# --------------------------------------------------------------------------
# Corpus composition
# --------------------------------------------------------------------------

_AXIS_COMPONENT = {"depth_relations": "depth", "horizontal_relations": "horizontal",
                   "vertical_relations": "vertical"}


def select_relations(relations: Sequence[SpatialRelation], axis: str, limit: Optional[int], seed: int,
                     image_id: str) -> list[SpatialRelation]:
    """Relations on one axis, sorted; a seeded subset of ``limit`` when there are more."""
    pool = sorted((r for r in relations if r.axis == axis), key=SpatialRelation.sort_key)
    if limit is None or len(pool) <= limit:
        return pool
    rng = random.Random(f"{seed}:{image_id}:{axis}")
    keep = sorted(rng.sample(range(len(pool)), limit))
    return [pool[i] for i in keep]


def _component_records(component: str, sample: Sample, relations, spec: CorpusSpec,
                       templates: TemplateSet) -> list[SentenceRecord]:
    image_id = sample.image_id
    if component == "scene":
        return scene_sentences(sample.scene_label, templates, image_id)
    if component == "activity":
        return [activity_sentence(sample.scene_label, image_id)]
    if component == "caption":
        if not sample.captions:
            raise ConfigError(f"{image_id}: captions requested but the sample has none")
        return [SentenceRecord(image_id, c, "caption") for c in sample.captions]
    axis = _AXIS_COMPONENT[component]
    rng = random.Random(f"{spec.seed}:{image_id}:{axis}:phrasing")
    out = []
    for rel in select_relations(relations, axis, spec.max_relations_per_axis, spec.seed, image_id):
        out.extend(relation_sentence(rel, sample.class_of, templates, spec.variant, rng, image_id))
    return out


def component_records(sample: Sample, relations: Iterable[SpatialRelation], spec: CorpusSpec = CorpusSpec(),
                      templates: TemplateSet = TemplateSet()) -> dict[str, list[SentenceRecord]]:
    """Sentence records of each requested component, keyed by component name."""
    relations = list(relations)
    return {c: _component_records(c, sample, relations, spec, templates) for c in spec.components}


def _clause(text: str, lower: bool = True) -> str:
    text = text.strip().rstrip(".").rstrip()
    return _decapitalize(text) if lower else text


def compose_corpus(sample: Sample, relations: Iterable[SpatialRelation], spec: CorpusSpec = CorpusSpec(),
                   templates: TemplateSet = TemplateSet(), separator: str = ", ") -> list[SentenceGroup]:
    """Build the sentence groups for one sample.

    ``stack`` gives one group: the scene-template block followed by every
    extra sentence. ``per_template`` gives one group per scene template, each
    holding that template's text joined with all extra sentences.
    """
    blocks = component_records(sample, relations, spec, templates)
    if spec.mode == "stack":
        records = tuple(r for c in spec.components for r in blocks[c])
        aggregate = "mean_block" if blocks.get("scene") else "single"
        return [SentenceGroup(sample.image_id, "stack", aggregate, records)]
    extras = [_clause(r.text) for c in spec.components if c != "scene" for r in blocks[c]]
    groups = []
    for rec in blocks["scene"]:
        text = separator.join([_clause(rec.text, lower=False)] + extras)
        groups.append(SentenceGroup(sample.image_id, "per_template", "single",
                                    (SentenceRecord(sample.image_id, text, "scene", template_id=rec.template_id),)))
    return groups


def word_count(text: str) -> int:
    """Whitespace word count after deleting ASCII punctuation."""
    return len(text.translate(str.maketrans("", "", string.punctuation)).split())
