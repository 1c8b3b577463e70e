"""Command-line entry point: ``depthprobe <command> ...``.

Every command accepts ``--config FILE.toml``. Top-level keys apply to all
commands, a ``[command]`` table (e.g. ``[eval]``) to one command; explicit
flags override both. Outputs go to ``--out``, else ``$DEPTHPROBE_OUTPUT_DIR``,
else ``./depthprobe-out``. Failures print a JSON error object on stderr and
exit non-zero.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import tomli

from . import __version__
from .dataset_io import (
    NYUV2_OOD_TEST_SCENES,
    NYUV2_OOD_TRAIN_SCENES,
    DatasetManifest,
    load_manifest,
    load_sample,
    partition_by_scene,
    read_depth,
    select_relation_complete_subset,
    write_manifest,
    write_rgb,
)
from .depth_metrics import EvalConfig, MetricReport, aggregate, compare, pixel_metrics
from .exceptions import ConfigError, DegenerateError, DepthProbeError, NotFoundError
from .object_stats import unique_objects
from .perturbation import MaskSpec, compensation_sentence, mask_object
from .reporting import (
    adversarial_summary,
    delta_rows_json,
    match_scores,
    read_scores_csv,
    read_triplets_jsonl,
    render_adversarial_table,
    render_delta_table,
    render_metrics_table,
    render_stats_table,
    scene_statistics,
)
from .sentence_gen import (
    COMPONENTS,
    MODES,
    VARIANTS,
    CorpusSpec,
    TemplateSet,
    adversarial_variants,
    component_records,
    compose_corpus,
)
from .spatial_relations import RelationConfig, extract_all, relations_jsonl

logger = logging.getLogger("depthprobe")

OUTPUT_ENV = "DEPTHPROBE_OUTPUT_DIR"
PRED_SUFFIXES = (".dgrd", ".png")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "depthprobe-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _templates(choice: str) -> TemplateSet:
    if choice == "default":
        return TemplateSet()
    if choice == "imagenet":
        return TemplateSet.imagenet()
    return TemplateSet.from_file(choice)


def _csv(value):
    if value is None or isinstance(value, (list, tuple)):
        return value
    return [v.strip() for v in value.split(",") if v.strip()]


def _run_id(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:12]


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_gen_sentences(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.relation_complete:
        manifest = select_relation_complete_subset(manifest, args.overlap, not args.all_objects, args.max_depth)
    spec = CorpusSpec(tuple(_csv(args.components)), args.mode, args.max_relations_per_axis, args.seed, args.variant)
    templates = _templates(args.templates)
    cfg = RelationConfig(args.overlap)
    corpus, rel_lines, adv_lines = [], [], []
    kinds = Counter()
    for entry in manifest.entries:
        sample = load_sample(entry, args.max_depth, with_rgb=False)
        rels = extract_all(sample, cfg, not args.all_objects, args.canonical_only)
        for group in compose_corpus(sample, rels, spec, templates):
            corpus.append(json.dumps(group.to_json()) + "\n")
        kinds.update(r.kind for recs in component_records(sample, rels, spec, templates).values() for r in recs)
        rel_lines.append(relations_jsonl(sample.image_id, rels, sample.class_of))
        adv_lines += [json.dumps(adversarial_variants(r, sample.class_of, templates, sample.image_id).to_json()) + "\n"
                      for r in rels]
    out = _out_dir(args)
    _write(out / "corpus.jsonl", "".join(corpus))
    _write(out / "relations.jsonl", "".join(rel_lines))
    _write(out / "adversarial.jsonl", "".join(adv_lines))
    summary = {"images": len(manifest), "groups": len(corpus), "sentences": dict(sorted(kinds.items()))}
    print(json.dumps(summary))
    return 0


def _pick_target(sample, relations):
    subjects = {r.subject for r in relations}
    for obj in unique_objects(sample):
        if obj.instance_id in subjects:
            return obj.instance_id
    return None


def _fill(value):
    if value in ("zero", "mean_rgb"):
        return value
    parts = [int(v) for v in str(value).split(",")]
    return parts[0] if len(parts) == 1 else tuple(parts)


def cmd_mask(args) -> int:
    manifest = load_manifest(args.manifest)
    templates = _templates(args.templates)
    cfg = RelationConfig(args.overlap)
    out = _out_dir(args)
    img_dir = out / "masked"
    img_dir.mkdir(exist_ok=True)
    receipts, entries, skipped = [], [], []
    targets = json.loads(Path(args.targets).read_text()) if args.targets else {}
    for entry in manifest.entries:
        sample = load_sample(entry, args.max_depth)
        rels = extract_all(sample, cfg, unique_only=True)
        target = targets.get(entry.image_id, _pick_target(sample, rels))
        if target is None:
            logger.warning("%s: no unique object with a relation; skipped", entry.image_id)
            skipped.append(entry.image_id)
            continue
        spec = MaskSpec(int(target), _fill(args.fill), args.compensation)
        rgb, receipt = mask_object(sample, spec)
        if spec.compensation != "none":
            try:
                text = compensation_sentence(sample, int(target), rels, templates).text
            except NotFoundError:
                logger.warning("%s: masked object has no relation; no compensation sentence", entry.image_id)
                text = None
            receipt = replace(receipt, compensation_text=text)
        rgb_path = img_dir / f"{entry.image_id}.png"
        write_rgb(rgb_path, rgb)
        _write(img_dir / f"{entry.image_id}.json", receipt.dumps())
        receipts.append(receipt.to_json())
        entries.append(replace(entry, rgb=rgb_path))
    write_manifest(out / "manifest.json", DatasetManifest(manifest.dataset, entries, "masked", out))
    _write(out / "receipts.json", json.dumps(receipts, indent=2) + "\n")
    print(json.dumps({"masked": len(receipts), "skipped": skipped}))
    return 0


def find_prediction(pred_dir: Path, image_id: str):
    for stem in (image_id, f"{image_id}_depth"):
        for suffix in PRED_SUFFIXES:
            p = pred_dir / f"{stem}{suffix}"
            if p.is_file():
                return p
    return None


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    crop = tuple(int(v) for v in _csv(args.crop)) if args.crop else None
    cfg = EvalConfig(args.max_depth, args.min_depth, args.delta_base, crop, args.aggregation, args.allow_resize)
    pred_dir = Path(args.pred_dir)
    missing = [e.image_id for e in manifest.entries if find_prediction(pred_dir, e.image_id) is None]
    if missing and not args.allow_missing:
        raise NotFoundError(f"missing predictions for {len(missing)} images: {missing[:20]}")
    per_image, degenerate = {}, []
    for entry in manifest.entries:
        if entry.image_id in missing:
            continue
        sample = load_sample(entry, cfg.max_depth, with_rgb=False)
        pred = read_depth(find_prediction(pred_dir, entry.image_id), max_depth=None)
        try:
            per_image[entry.image_id] = pixel_metrics(pred, sample.depth_gt, cfg)
        except DegenerateError:
            degenerate.append(entry.image_id)
    report = aggregate(per_image, cfg.aggregation, degenerate)
    out = _out_dir(args)
    _write(out / "report.json", report.dumps())
    table = render_metrics_table([(args.label, report.aggregate)])
    _write(out / "report.md", table)
    run = {
        "run_id": _run_id("eval", manifest.digest(), str(pred_dir), repr(cfg)),
        "manifest_sha256": manifest.digest(),
        "eval_config": {"max_depth": cfg.max_depth, "min_depth": cfg.min_depth, "delta_base": cfg.delta_base,
                        "crop": cfg.crop, "aggregation": cfg.aggregation},
        "report": "report.json",
        "missing": missing,
        "timestamp": datetime.now(timezone.utc).isoformat() if args.stamp else None,
    }
    _write(out / "run.json", json.dumps(run, indent=2) + "\n")
    sys.stdout.write(table)
    return 0


def cmd_compare(args) -> int:
    a, b = MetricReport.load(args.report_a), MetricReport.load(args.report_b)
    rows = compare(a, b, args.intersect)
    table = render_delta_table(rows)
    if args.out or os.environ.get(OUTPUT_ENV):
        out = _out_dir(args)
        _write(out / "compare.json", json.dumps(delta_rows_json(rows), indent=2) + "\n")
        _write(out / "compare.md", table)
    sys.stdout.write(table)
    return 0


def cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest)
    samples = [load_sample(e, args.max_depth, with_rgb=False) for e in manifest.entries]
    stats = scene_statistics(samples, RelationConfig(args.overlap))
    out = _out_dir(args)
    _write(out / "stats.json", json.dumps(stats, indent=2) + "\n")
    table = render_stats_table(stats)
    _write(out / "stats.md", table)
    sys.stdout.write(table)
    return 0


def cmd_adversarial(args) -> int:
    triplets = read_triplets_jsonl(args.triplets)
    scored = match_scores(triplets, read_scores_csv(args.scores))
    rows = adversarial_summary(scored)
    table = render_adversarial_table(rows)
    if args.out or os.environ.get(OUTPUT_ENV):
        out = _out_dir(args)
        _write(out / "adversarial_summary.json", json.dumps([r.to_json() for r in rows], indent=2) + "\n")
        _write(out / "adversarial_summary.md", table)
    sys.stdout.write(table)
    return 0


def cmd_subset(args) -> int:
    manifest = load_manifest(args.manifest)
    out = _out_dir(args)
    result = {"input": len(manifest)}
    if args.relation_complete:
        manifest = select_relation_complete_subset(manifest, args.overlap, not args.all_objects, args.max_depth)
        result["relation_complete"] = len(manifest)
    if args.split:
        if args.split == "nyuv2-ood":
            train_s, test_s = NYUV2_OOD_TRAIN_SCENES, NYUV2_OOD_TEST_SCENES
        else:
            spec = json.loads(Path(args.split).read_text())
            train_s, test_s = spec["train"], spec["test"]
        train, test = partition_by_scene(manifest, train_s, test_s)
        write_manifest(out / "train.json", train)
        write_manifest(out / "test.json", test)
        result.update(train=len(train), test=len(test))
    else:
        write_manifest(out / "manifest.json", manifest)
    print(json.dumps(result))
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _common(p, manifest=True):
    p.add_argument("--config", help="TOML file with defaults (flags win)")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./depthprobe-out)")
    p.add_argument("--max-depth", type=float, default=10.0, help="depth cap in meters")
    if manifest:
        p.add_argument("--manifest", required=True, help="dataset manifest JSON")


def _relation_flags(p):
    p.add_argument("--lambda", dest="overlap", type=float, default=1.0, help="overlap factor")
    p.add_argument("--all-objects", action="store_true", help="do not restrict to unique-class objects")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depthprobe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sentences", help="generate sentence corpora and relation files")
    _common(p)
    _relation_flags(p)
    p.add_argument("--components", default="scene", help=f"comma list from {','.join(COMPONENTS)}")
    p.add_argument("--mode", choices=MODES, default="stack")
    p.add_argument("--max-relations-per-axis", type=int, default=None)
    p.add_argument("--variant", choices=VARIANTS, default="canonical")
    p.add_argument("--templates", default="default", help="'default', 'imagenet', or a template file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--canonical-only", action="store_true", help="one relation per unordered pair")
    p.add_argument("--relation-complete", action="store_true", help="keep only relation-complete images")
    p.set_defaults(func=cmd_gen_sentences)

    p = sub.add_parser("mask", help="mask one unique object per image and write receipts")
    _common(p)
    p.add_argument("--lambda", dest="overlap", type=float, default=1.0)
    p.add_argument("--fill", default="zero", help="zero, mean_rgb, or a constant 'v' / 'r,g,b'")
    p.add_argument("--compensation", choices=("depth_axis_preferred", "none"), default="depth_axis_preferred")
    p.add_argument("--targets", help="JSON {image_id: instance_id}; default picks the lowest eligible id")
    p.add_argument("--templates", default="default")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("eval", help="score predicted depth maps")
    _common(p)
    p.add_argument("--pred-dir", required=True, help="directory of <image_id>.dgrd/.png predictions")
    p.add_argument("--min-depth", type=float, default=1e-3)
    p.add_argument("--delta-base", type=float, default=1.25)
    p.add_argument("--crop", help="row_start,row_stop,col_start,col_stop")
    p.add_argument("--aggregation", choices=("per_image_mean", "pixel_pool"), default="per_image_mean")
    p.add_argument("--allow-missing", action="store_true")
    p.add_argument("--allow-resize", action="store_true", help="nearest-neighbor resize mismatched predictions")
    p.add_argument("--label", default="run", help="row label in the Markdown table")
    p.add_argument("--stamp", action="store_true", help="record wall-clock time in run.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="metric deltas between two reports")
    _common(p, manifest=False)
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--intersect", action="store_true", help="compare on the common image ids")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="per-scene corpus statistics")
    _common(p)
    p.add_argument("--lambda", dest="overlap", type=float, default=1.0)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("adversarial", help="summarize similarity scores of adversarial triplets")
    _common(p, manifest=False)
    p.add_argument("--triplets", required=True, help="adversarial.jsonl from gen-sentences")
    p.add_argument("--scores", required=True, help="CSV image_id,axis,original,relation_switch,object_switch")
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("subset", help="relation-complete filtering and scene partitioning")
    _common(p)
    _relation_flags(p)
    p.add_argument("--relation-complete", action="store_true")
    p.add_argument("--split", help="'nyuv2-ood' or a JSON file {\"train\": [...], \"test\": [...]}")
    p.set_defaults(func=cmd_subset)
    return parser


def _apply_config(parser, argv):
    """Parse with TOML values installed as defaults so explicit flags still win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in subparsers), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    try:
        with open(known.config, "rb") as fh:
            cfg = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {known.config}: {exc}") from None
    values = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    values.update(cfg.get(command, {}))
    values = {k.replace("-", "_"): v for k, v in values.items()}
    if "lambda" in values:
        values["overlap"] = values.pop("lambda")
    subparser = subparsers[command]
    known_dests = {a.dest for a in subparser._actions}
    unknown = sorted(set(values) - known_dests)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {unknown}")
    subparser.set_defaults(**values)
    for action in subparser._actions:
        if action.dest in values:
            action.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (DepthProbeError, OSError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
