import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from conftest import FIXTURES, make_sample
from depthprobe.cli import main
from depthprobe.dataset_io import DatasetManifest, load_manifest, load_sample, read_rgb, write_manifest, write_sample

TOY = FIXTURES / "toy" / "manifest.json"
TOY_PRED = FIXTURES / "toy_pred"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_golden_eval_table(capsys, tmp_path):
    code, out, _ = run(capsys, "eval", "--manifest", TOY, "--pred-dir", TOY_PRED, "--out", tmp_path)
    assert code == 0
    golden = (FIXTURES / "toy_eval.md").read_text()
    assert out == golden
    assert (tmp_path / "report.md").read_text() == golden


def test_eval_identity(capsys, tmp_path):
    pred = tmp_path / "pred"
    pred.mkdir()
    for e in load_manifest(TOY).entries:
        shutil.copy(e.depth, pred / e.depth.name)
    code, out, _ = run(capsys, "eval", "--manifest", TOY, "--pred-dir", pred, "--out", tmp_path / "o")
    assert code == 0
    assert out.splitlines()[2] == "| run | 1.000 | 1.000 | 1.000 | 0.000 | 0.000 | 0.000 |"


def test_eval_missing_prediction(capsys, tmp_path):
    pred = tmp_path / "pred"
    shutil.copytree(TOY_PRED, pred)
    (pred / "toy03.dgrd").unlink()
    code, _, err = run(capsys, "eval", "--manifest", TOY, "--pred-dir", pred, "--out", tmp_path / "o")
    assert code == 1 and json.loads(err)["error"] == "NotFoundError" and "toy03" in err
    code, _, _ = run(capsys, "eval", "--manifest", TOY, "--pred-dir", pred, "--out", tmp_path / "o", "--allow-missing")
    assert code == 0
    run_json = json.loads((tmp_path / "o" / "run.json").read_text())
    assert run_json["missing"] == ["toy03"] and run_json["timestamp"] is None
    assert sorted(json.loads((tmp_path / "o" / "report.json").read_text())["per_image"]) == [
        "toy00", "toy01", "toy02", "toy04"]


class TestGenSentences:
    def test_scene_only_groups(self, capsys, tmp_path):
        code, out, _ = run(capsys, "gen-sentences", "--manifest", TOY, "--out", tmp_path)
        assert code == 0
        summary = json.loads(out)
        assert summary == {"images": 5, "groups": 5, "sentences": {"scene": 5}}
        first = json.loads((tmp_path / "corpus.jsonl").read_text().splitlines()[0])
        assert first["sentences"][0]["text"] == "a photo of a bedroom"

    def test_three_scene_only_images(self, capsys, tmp_path):
        full = load_manifest(TOY)
        manifest = full.subset(e for e in full.entries if e.image_id in {"toy00", "toy02", "toy04"})
        write_manifest(tmp_path / "m.json", manifest)
        code, out, _ = run(capsys, "gen-sentences", "--manifest", tmp_path / "m.json", "--out", tmp_path / "o")
        assert code == 0 and json.loads(out)["groups"] == 3
        texts = [json.loads(line)["sentences"][0]["text"] for line in (tmp_path / "o" / "corpus.jsonl").open()]
        assert texts == ["a photo of a bedroom", "a photo of a bedroom", "a photo of a bathroom"]

    def test_missing_captions_is_an_error(self, capsys, tmp_path):
        s = make_sample([[1, 0, 2]], [[1.0, 9.0, 3.0]], {1: "tv", 2: "bed"}, "nocap")
        entry = write_sample(s, tmp_path)
        write_manifest(tmp_path / "m.json", DatasetManifest("x", [entry], root=tmp_path))
        code, _, err = run(capsys, "gen-sentences", "--manifest", tmp_path / "m.json", "--components",
                           "scene,caption", "--out", tmp_path / "o")
        assert code != 0
        payload = json.loads(err)
        assert payload["error"] == "ConfigError" and "nocap" in payload["message"]

    def test_relation_files(self, capsys, tmp_path):
        code, _, _ = run(capsys, "gen-sentences", "--manifest", TOY, "--components", "scene,depth_relations",
                         "--out", tmp_path)
        assert code == 0
        rel = [json.loads(x) for x in (tmp_path / "relations.jsonl").open()]
        adv = [json.loads(x) for x in (tmp_path / "adversarial.jsonl").open()]
        assert len(rel) == len(adv) > 0
        # toy01 has two chairs, which must never appear in unique-object relations
        assert not any(r["subject_class"] == "chair" or r["object_class"] == "chair" for r in rel)

    def test_idempotent(self, capsys, tmp_path):
        args = ["gen-sentences", "--manifest", TOY, "--components", "scene,caption,depth_relations,activity",
                "--mode", "per_template", "--templates", "imagenet", "--max-relations-per-axis", "1", "--seed", "3"]
        run(capsys, *args, "--out", tmp_path / "a")
        run(capsys, *args, "--out", tmp_path / "b")
        for name in ("corpus.jsonl", "relations.jsonl", "adversarial.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestConfig:
    def test_flags_beat_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text(f'manifest = "{TOY}"\n[gen-sentences]\ncomponents = "scene,caption"\n')
        code, out, _ = run(capsys, "gen-sentences", "--config", cfg, "--out", tmp_path / "a")
        assert code == 0 and json.loads(out)["sentences"] == {"caption": 5, "scene": 5}
        code, out, _ = run(capsys, "gen-sentences", "--config", cfg, "--components", "scene", "--out", tmp_path / "b")
        assert json.loads(out)["sentences"] == {"scene": 5}

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[eval]\nbogus = 1\n')
        code, _, err = run(capsys, "eval", "--config", cfg, "--manifest", TOY, "--pred-dir", TOY_PRED)
        assert code == 1 and "bogus" in json.loads(err)["message"]

    def test_env_output_dir(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("DEPTHPROBE_OUTPUT_DIR", str(tmp_path / "env"))
        assert run(capsys, "stats", "--manifest", TOY)[0] == 0
        assert (tmp_path / "env" / "stats.json").is_file()
        assert run(capsys, "stats", "--manifest", TOY, "--out", tmp_path / "flag")[0] == 0
        assert (tmp_path / "flag" / "stats.json").is_file()


class TestMask:
    def test_receipts_and_locality(self, capsys, tmp_path):
        code, out, _ = run(capsys, "mask", "--manifest", TOY, "--out", tmp_path)
        assert code == 0
        manifest = load_manifest(TOY)
        receipts = json.loads((tmp_path / "receipts.json").read_text())
        assert len(receipts) == json.loads(out)["masked"]
        for r in receipts:
            entry = next(e for e in manifest.entries if e.image_id == r["image_id"])
            sample = load_sample(entry)
            masked = read_rgb(tmp_path / "masked" / f"{r['image_id']}.png")
            changed = np.any(masked != sample.rgb, axis=2)
            assert np.array_equal(changed, sample.segmentation.mask(r["target_id"]))
            assert changed.sum() == r["pixels_masked"]
        masked_manifest = load_manifest(tmp_path / "manifest.json")
        assert all(e.rgb.parent == tmp_path / "masked" for e in masked_manifest.entries)

    def test_single_object_image_skipped(self, capsys, tmp_path):
        _, out, _ = run(capsys, "mask", "--manifest", TOY, "--out", tmp_path)
        assert json.loads(out)["skipped"] == ["toy04"]

    def test_compensation_text(self, capsys, tmp_path):
        run(capsys, "mask", "--manifest", TOY, "--out", tmp_path)
        receipt = json.loads((tmp_path / "masked" / "toy00.json").read_text())
        assert receipt["target_class"] == "bed"
        assert receipt["compensation_text"].startswith("A bed is ")


def test_compare(capsys, tmp_path):
    run(capsys, "eval", "--manifest", TOY, "--pred-dir", TOY_PRED, "--out", tmp_path / "a")
    code, out, _ = run(capsys, "compare", tmp_path / "a" / "report.json", tmp_path / "a" / "report.json")
    assert code == 0
    assert "| RMSE↓ | 0.864 | 0.864 | +0.000 | +0.0 |" in out.splitlines()


def test_adversarial(capsys, tmp_path):
    run(capsys, "gen-sentences", "--manifest", TOY, "--components", "scene,depth_relations", "--out", tmp_path)
    triplets = [json.loads(x) for x in (tmp_path / "adversarial.jsonl").open()]
    csv = "image_id,axis,original,relation_switch,object_switch\n" + "".join(
        f"{t['image_id']},{t['axis']},25.675,25.665,25.699\n" for t in triplets)
    (tmp_path / "scores.csv").write_text(csv)
    code, out, _ = run(capsys, "adversarial", "--triplets", tmp_path / "adversarial.jsonl",
                       "--scores", tmp_path / "scores.csv")
    assert code == 0
    assert "-0.024 (neg)" in out


class TestSubset:
    def test_relation_complete(self, capsys, tmp_path):
        code, out, _ = run(capsys, "subset", "--manifest", TOY, "--relation-complete", "--out", tmp_path)
        assert code == 0
        result = json.loads(out)
        kept = load_manifest(tmp_path / "manifest.json")
        assert result["relation_complete"] == len(kept) < 5
        assert "toy04" not in kept.ids()

    def test_split_file(self, capsys, tmp_path):
        (tmp_path / "split.json").write_text(json.dumps({"train": ["bedroom", "office"], "test": ["kitchen"]}))
        code, out, _ = run(capsys, "subset", "--manifest", TOY, "--split", tmp_path / "split.json", "--out", tmp_path)
        assert code == 0
        assert json.loads(out) == {"input": 5, "train": 3, "test": 1}
        assert load_manifest(tmp_path / "test.json").ids() == ["toy01"]

    def test_overlapping_split(self, capsys, tmp_path):
        (tmp_path / "split.json").write_text(json.dumps({"train": ["bedroom"], "test": ["bedroom"]}))
        code, _, err = run(capsys, "subset", "--manifest", TOY, "--split", tmp_path / "split.json", "--out", tmp_path)
        assert code == 1 and json.loads(err)["error"] == "ConfigError"


def test_bad_manifest_reports_json(capsys, tmp_path):
    (tmp_path / "m.json").write_text("{not json")
    code, _, err = run(capsys, "stats", "--manifest", tmp_path / "m.json", "--out", tmp_path)
    assert code == 1 and set(json.loads(err)) == {"error", "message"}


@pytest.mark.parametrize("cmd", ["gen-sentences", "mask", "eval", "compare", "stats", "adversarial", "subset"])
def test_help(cmd, capsys):
    with pytest.raises(SystemExit) as exc:
        main([cmd, "--help"])
    assert exc.value.code == 0
    assert cmd in capsys.readouterr().out


def test_shipped_fixture_matches_generator(tmp_path):
    from depthprobe.toy import build_toy_dataset, build_toy_predictions
    fresh = load_manifest(build_toy_dataset(tmp_path / "toy"))
    shipped = load_manifest(TOY)
    assert Path(TOY).read_bytes() == (tmp_path / "toy" / "manifest.json").read_bytes()
    for a, b in zip(fresh.entries, shipped.entries):
        sa, sb = load_sample(a), load_sample(b)
        assert np.array_equal(sa.depth_gt.values, sb.depth_gt.values, equal_nan=True)
        assert np.array_equal(sa.segmentation.instance_ids, sb.segmentation.instance_ids)
        assert np.array_equal(sa.rgb, sb.rgb) and sa.class_of == sb.class_of
    build_toy_predictions(tmp_path / "pred")
    for p in sorted(TOY_PRED.iterdir()):
        assert p.read_bytes() == (tmp_path / "pred" / p.name).read_bytes()
