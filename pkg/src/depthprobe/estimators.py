"""scikit-learn style front ends.

The estimators are thin stateless wrappers: ``fit`` only validates
hyper-parameters, so they slot into ``Pipeline``/``clone``/``get_params``
without carrying learned state.
"""

from __future__ import annotations

from dataclasses import replace

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .depth_metrics import EvalConfig, MetricReport, aggregate, pixel_metrics
from .exceptions import DegenerateError
from .perturbation import MaskSpec, mask_object
from .sentence_gen import CorpusSpec, TemplateSet, compose_corpus
from .spatial_relations import RelationConfig, extract_all
from .validation import check_predictions, check_samples


class RelationExtractor(TransformerMixin, BaseEstimator):
    """Samples -> list of relation lists.

    Parameters
    ----------
    overlap : float, default=1.0
        Multiplier on the summed object radii a centroid gap must exceed.
    unique_only : bool, default=True
        Restrict to objects whose class occurs once in the image.
    canonical_only : bool, default=False
        Report each unordered pair once (lower instance id as subject).
    """

    def __init__(self, overlap=1.0, unique_only=True, canonical_only=False):
        self.overlap = overlap
        self.unique_only = unique_only
        self.canonical_only = canonical_only

    def fit(self, X=None, y=None):
        self.config_ = RelationConfig(self.overlap)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        return [extract_all(s, self.config_, self.unique_only, self.canonical_only)
                for s in check_samples(X, with_rgb=False)]


class CorpusBuilder(TransformerMixin, BaseEstimator):
    """Samples -> list of sentence-group lists (one list per sample)."""

    def __init__(self, components=("scene",), mode="stack", max_relations_per_axis=None, seed=0,
                 variant="canonical", templates=None, overlap=1.0, unique_only=True):
        self.components = components
        self.mode = mode
        self.max_relations_per_axis = max_relations_per_axis
        self.seed = seed
        self.variant = variant
        self.templates = templates
        self.overlap = overlap
        self.unique_only = unique_only

    def fit(self, X=None, y=None):
        self.spec_ = CorpusSpec(tuple(self.components), self.mode, self.max_relations_per_axis,
                                self.seed, self.variant)
        self.templates_ = self.templates if self.templates is not None else TemplateSet()
        self.relation_config_ = RelationConfig(self.overlap)
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        out = []
        for s in check_samples(X, with_rgb=False):
            rels = extract_all(s, self.relation_config_, self.unique_only)
            out.append(compose_corpus(s, rels, self.spec_, self.templates_))
        return out


class ObjectMasker(TransformerMixin, BaseEstimator):
    """Samples -> samples with one object blanked out of the RGB image.

    ``targets`` maps image ids to instance ids. Receipts of the last call
    are kept in ``receipts_``.
    """

    def __init__(self, targets=None, fill="zero"):
        self.targets = targets
        self.fill = fill

    def fit(self, X=None, y=None):
        MaskSpec(0, self.fill)
        self.targets_ = dict(self.targets or {})
        return self

    def transform(self, X):
        check_is_fitted(self, "targets_")
        out, self.receipts_ = [], []
        for s in check_samples(X):
            rgb, receipt = mask_object(s, MaskSpec(self.targets_[s.image_id], self.fill))
            out.append(replace(s, rgb=rgb))
            self.receipts_.append(receipt)
        return out


class DepthEvaluator(BaseEstimator):
    """Scores external depth predictions against the samples' ground truth."""

    def __init__(self, max_depth=10.0, min_depth=1e-3, delta_base=1.25, crop=None,
                 aggregation="per_image_mean", allow_resize=False):
        self.max_depth = max_depth
        self.min_depth = min_depth
        self.delta_base = delta_base
        self.crop = crop
        self.aggregation = aggregation
        self.allow_resize = allow_resize

    def fit(self, X=None, y=None):
        self.config_ = EvalConfig(self.max_depth, self.min_depth, self.delta_base, self.crop,
                                  self.aggregation, self.allow_resize)
        return self

    def evaluate(self, predictions, X) -> MetricReport:
        check_is_fitted(self, "config_")
        samples = check_samples(X, self.max_depth, with_rgb=False)
        preds = check_predictions(predictions, samples)
        per_image, degenerate = {}, []
        for s in samples:
            try:
                per_image[s.image_id] = pixel_metrics(preds[s.image_id], s.depth_gt, self.config_)
            except DegenerateError:
                degenerate.append(s.image_id)
        return aggregate(per_image, self.config_.aggregation, degenerate)

    def score(self, predictions, X) -> float:
        """Aggregate δ1 (higher is better, as scikit-learn expects)."""
        return self.evaluate(predictions, X).aggregate["delta1"]
