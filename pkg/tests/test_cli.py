"""End-to-end CLI behaviour: all five subcommands, exit codes, file outputs."""

import json
import os

import pytest

from dstrain.cli import main

TRAIN_CONFIG = """
# desk-scale smoke config
mode = injection
seed = 11
num_classes = 3
train_size = 64
val_size = 24
test_size = 24
feature_dim = 5
epochs = 3
batch_size = 16
how = diu
where = product
card = b
"""

BASELINE_CONFIG = """
mode = baseline
seed = 11
num_classes = 3
train_size = 64
val_size = 24
test_size = 24
feature_dim = 5
epochs = 3
"""

ANNOTATION = """
<annotation>
  <filename>{name}</filename>
  <object>
    <name>{cls}</name>
    <bndbox><xmin>0</xmin><ymin>0</ymin><xmax>10</xmax><ymax>10</ymax></bndbox>
  </object>
</annotation>
"""


@pytest.fixture
def train_config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(TRAIN_CONFIG)
    return str(path)


def write_annotations(tmp_path):
    ann_dir = tmp_path / "annotations"
    ann_dir.mkdir()
    (ann_dir / "a.xml").write_text(ANNOTATION.format(name="a.jpg", cls="chair"))
    (ann_dir / "b.xml").write_text(ANNOTATION.format(name="b.jpg", cls="chair"))
    return str(ann_dir)


class TestTrain:
    def test_writes_report_and_table(self, tmp_path, train_config, capsys):
        out = tmp_path / "run"
        assert main(["train", "--config", train_config, "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["epochs"]) == 3
        assert report["epochs"][0]["w"] == 1.0
        table = (out / "epochs.tsv").read_text()
        assert table.splitlines()[0].startswith("epoch\tw\t")
        assert "best score" in capsys.readouterr().out

    def test_idempotent_outputs(self, tmp_path, train_config):
        out = tmp_path / "run"
        main(["train", "--config", train_config, "--out", str(out)])
        first = (out / "report.json").read_bytes()
        main(["train", "--config", train_config, "--out", str(out)])
        assert (out / "report.json").read_bytes() == first

    def test_baseline_w_column_is_one(self, tmp_path):
        cfg = tmp_path / "base.cfg"
        cfg.write_text(BASELINE_CONFIG)
        out = tmp_path / "run"
        assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert all(row["w"] == 1.0 for row in report["epochs"])

    def test_seed_override_changes_run(self, tmp_path, train_config):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        main(["train", "--config", train_config, "--out", str(out1)])
        main(["train", "--config", train_config, "--out", str(out2), "--seed", "99"])
        a = json.loads((out1 / "report.json").read_text())
        b = json.loads((out2 / "report.json").read_text())
        assert a["config"]["dataset_seed"] != b["config"]["dataset_seed"]
        assert a["epochs"] != b["epochs"]

    def test_missing_config_no_partial_output(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["train", "--config", str(tmp_path / "nope.cfg"), "--out", str(out)])
        assert code != 0
        assert not out.exists()
        assert "dstrain:" in capsys.readouterr().err

    def test_bad_config_key_fails(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("seed = 1\nbogus_key = 2\n")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0

    def test_error_preserves_existing_outputs(self, tmp_path, train_config):
        out = tmp_path / "run"
        main(["train", "--config", train_config, "--out", str(out)])
        before = (out / "report.json").read_bytes()
        bad = tmp_path / "bad.cfg"
        bad.write_text("mode = injection\n")  # missing mandatory seed
        assert main(["train", "--config", str(bad), "--out", str(out)]) != 0
        assert (out / "report.json").read_bytes() == before

    def test_iou_override_recorded(self, tmp_path, train_config):
        out = tmp_path / "run"
        assert main(["train", "--config", train_config, "--out", str(out),
                     "--iou", "0.75"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["config"]["iou_threshold"] == 0.75

    def test_custom_card_file(self, tmp_path):
        card = tmp_path / "flat.card"
        card.write_text("name flat\n0.0 1.0 1.0\n")
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(TRAIN_CONFIG.replace("card = b", "card = flat.card"))
        out = tmp_path / "run"
        assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert all(row["w"] == 1.0 for row in report["epochs"])


class TestEvaluate:
    def test_perfect_detections(self, tmp_path, capsys):
        ann_dir = write_annotations(tmp_path)
        dets = tmp_path / "dets.txt"
        dets.write_text("a.jpg chair 1.0 0 0 10 10\nb.jpg chair 0.9 0 0 10 10\n")
        out = tmp_path / "eval"
        code = main(["evaluate", "--detections", str(dets),
                     "--annotations", ann_dir, "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "evaluation.json").read_text())
        assert payload["mean_ap"] == 1.0
        assert payload["micro"]["f1"] == 1.0
        assert "chair" in capsys.readouterr().out

    def test_empty_detections_all_fn(self, tmp_path, capsys):
        ann_dir = write_annotations(tmp_path)
        dets = tmp_path / "dets.txt"
        dets.write_text("")
        code = main(["evaluate", "--detections", str(dets), "--annotations", ann_dir])
        assert code == 0
        out = capsys.readouterr().out
        assert "chair\t0.000000" in out

    def test_parse_failure_exits_nonzero(self, tmp_path, capsys):
        ann_dir = write_annotations(tmp_path)
        dets = tmp_path / "dets.txt"
        dets.write_text("broken line\n")
        assert main(["evaluate", "--detections", str(dets), "--annotations", ann_dir]) != 0


class TestFuse:
    def test_groups(self, tmp_path, capsys):
        evidence = tmp_path / "groups.txt"
        evidence.write_text(
            "group pair\nA 0.7 B 0.3\nA 1.0\n\ngroup solo\nA 0.5 B 0.5\n"
        )
        out = tmp_path / "fusion"
        assert main(["fuse", "--evidence", str(evidence), "--out", str(out)]) == 0
        payload = json.loads((out / "fusion.json").read_text())
        pair = payload["groups"][0]
        assert pair["conflict_k"] == pytest.approx(0.3, abs=1e-12)
        assert pair["certainty_phi"] == pytest.approx(0.7, abs=1e-12)
        assert pair["combined"]["A"] == pytest.approx(1.0, abs=1e-12)
        solo = payload["groups"][1]
        assert solo["conflict_k"] == 0.0
        assert solo["combined"]["A"] == pytest.approx(0.5)

    def test_total_conflict_names_group(self, tmp_path, capsys):
        evidence = tmp_path / "groups.txt"
        evidence.write_text("group clash\nA 1.0\nB 1.0\n")
        assert main(["fuse", "--evidence", str(evidence)]) != 0
        assert "clash" in capsys.readouterr().err

    def test_all_zero_scores_names_group(self, tmp_path, capsys):
        evidence = tmp_path / "groups.txt"
        evidence.write_text("group dead\nA 0.0 B 0.0\n")
        assert main(["fuse", "--evidence", str(evidence)]) != 0
        assert "dead" in capsys.readouterr().err


class TestCompare:
    def run_two(self, tmp_path, train_config):
        base_cfg = tmp_path / "base.cfg"
        base_cfg.write_text(BASELINE_CONFIG)
        main(["train", "--config", str(base_cfg), "--out", str(tmp_path / "base")])
        main(["train", "--config", train_config, "--out", str(tmp_path / "diu")])
        return str(tmp_path / "base" / "report.json"), str(tmp_path / "diu" / "report.json")

    def test_side_by_side(self, tmp_path, train_config, capsys):
        base, diu = self.run_two(tmp_path, train_config)
        capsys.readouterr()  # drop the train command output
        out = tmp_path / "cmp"
        assert main(["compare", base, diu, "--out", str(out)]) == 0
        table = capsys.readouterr().out
        assert table.splitlines()[0] == "metric\tbase\tdiu\twinner"
        payload = json.loads((out / "compare.json").read_text())
        assert set(payload["best_score"]) == {"base", "diu"}

    def test_tie_marked(self, tmp_path, train_config, capsys):
        base, _ = self.run_two(tmp_path, train_config)
        assert main(["compare", base, base]) == 0
        out = capsys.readouterr().out
        assert "tie" in out

    def test_missing_report(self, tmp_path, train_config, capsys):
        base, _ = self.run_two(tmp_path, train_config)
        assert main(["compare", base, str(tmp_path / "missing.json")]) != 0

    def test_requires_two(self, tmp_path, train_config, capsys):
        base, _ = self.run_two(tmp_path, train_config)
        assert main(["compare", base]) != 0


class TestVocStats:
    def test_counts_table(self, tmp_path, capsys):
        ann_dir = write_annotations(tmp_path)
        extra = os.path.join(ann_dir, "c.xml")
        with open(extra, "w") as fh:
            fh.write(ANNOTATION.format(name="c.jpg", cls="chair"))
        assert main(["voc-stats", "--annotations", ann_dir]) == 0
        out = capsys.readouterr().out
        assert "chair\t3" in out

    def test_empty_directory(self, tmp_path, capsys):
        empty = tmp_path / "none"
        empty.mkdir()
        assert main(["voc-stats", "--annotations", str(empty)]) == 0
        assert capsys.readouterr().out.strip() == "class\tcount"

    def test_unreadable_directory(self, tmp_path, capsys):
        assert main(["voc-stats", "--annotations", str(tmp_path / "missing")]) != 0
