"""Evaluation toolkit for language-guided monocular depth estimation.

Extracts object-centric spatial relations from RGB-D annotations, builds
sentence corpora and adversarial variants from them, masks objects, and
scores externally produced depth maps.
"""

__version__ = "0.1.0"

from .dataset_io import (
    DatasetManifest,
    DepthGrid,
    ManifestEntry,
    Sample,
    SegmentationMap,
    load_manifest,
    load_sample,
    partition_by_scene,
    select_relation_complete_subset,
    write_sample,
)
from .depth_metrics import EvalConfig, ImageMetrics, MetricReport, aggregate, compare, pixel_metrics
from .estimators import CorpusBuilder, DepthEvaluator, ObjectMasker, RelationExtractor
from .object_stats import ObjectInstance, compute_object_stats, unique_objects
from .perturbation import MaskSpec, compensation_sentence, mask_object
from .sentence_gen import (
    CorpusSpec,
    SentenceRecord,
    TemplateSet,
    activity_sentence,
    adversarial_variants,
    compose_corpus,
    relation_sentence,
    scene_sentences,
)
from .spatial_relations import RelationConfig, SpatialRelation, extract_all, extract_pair
