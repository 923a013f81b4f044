import csv
import json
from pathlib import Path

import pytest

from claimcheck.cli import main


def run(argv: list[str]) -> int:
    return main(argv)


@pytest.fixture()
def verified_run(tmp_path) -> tuple[Path, Path]:
    corpus = tmp_path / "corpus"
    out = tmp_path / "out"
    assert run(["gen-corpus", "--out", str(corpus), "--n", "6",
                "--consistency", "0.8", "--seed", "3"]) == 0
    assert run(["verify", "--corpus", str(corpus), "--out", str(out),
                "--backend", "mock", "--parallelism", "2"]) == 0
    return corpus, out


class TestVerifyCommand:
    def test_happy_path_outputs(self, verified_run):
        corpus, out = verified_run
        app_dirs = [p for p in out.iterdir() if p.is_dir() and p.name.startswith("app_")]
        assert len(app_dirs) == 6
        for app_dir in app_dirs:
            for kind in ("eligibility", "common_core", "typology"):
                assert (app_dir / f"{kind}.json").is_file()
                assert (app_dir / f"{kind}.html").is_file()
            assert (app_dir / "extraction.json").is_file()
        assert (out / "metrics.json").is_file()
        assert (out / "cost_time.csv").is_file()
        assert (out / "manifest.json").is_file()

    def test_corrupt_form_exits_2_but_processes_rest(self, tmp_path):
        corpus = tmp_path / "corpus"
        out = tmp_path / "out"
        run(["gen-corpus", "--out", str(corpus), "--n", "4", "--seed", "1"])
        (corpus / "app_00002" / "form.xml").write_text("<broken")
        assert run(["verify", "--corpus", str(corpus), "--out", str(out)]) == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["counts"]["applications_processed"] == 3
        assert manifest["counts"]["applications_failed"] == 1
        assert manifest["failures"][0]["app_id"] == "app_00002"
        assert not (out / "app_00002").exists()

    def test_bad_endpoint_exits_1_before_processing(self, tmp_path):
        corpus = tmp_path / "corpus"
        run(["gen-corpus", "--out", str(corpus), "--n", "1", "--seed", "1"])
        out = tmp_path / "out"
        code = run(["verify", "--corpus", str(corpus), "--out", str(out),
                    "--backend", "remote", "--endpoint", "not a url"])
        assert code == 1
        assert not (out / "manifest.json").exists()

    def test_manifest_file_accounting(self, verified_run):
        corpus, out = verified_run
        manifest = json.loads((out / "manifest.json").read_text())
        files = manifest["files"]
        categorized = set(files["processed"]) | set(files["unsupported"]) | set(files["failed"])
        on_disk = {str(p.relative_to(corpus)) for p in corpus.rglob("*") if p.is_file()}
        assert on_disk == {f for f in categorized if "!" not in f}


class TestMetricsCommand:
    def test_metrics_without_labels(self, verified_run):
        _, out = verified_run
        assert run(["metrics", "--out", str(out)]) == 0
        summary = json.loads((out / "metrics.json").read_text())
        assert "taxonomy" not in summary
        assert 0.0 <= summary["total"]["suppression_rate"] <= 1.0

    def test_metrics_with_generated_labels(self, verified_run):
        corpus, out = verified_run
        assert run(["metrics", "--out", str(out),
                    "--labels", str(corpus / "labels.csv")]) == 0
        summary = json.loads((out / "metrics.json").read_text())
        taxonomy = summary["taxonomy"]
        assert taxonomy["false_positive"] == 0
        assert taxonomy["false_negative"] == 0
        assert taxonomy["labeled_total"] == summary["total"]["checks_total"]

    def test_unknown_label_app_exits_1(self, verified_run, capsys):
        corpus, out = verified_run
        labels = out / "bad_labels.csv"
        labels.write_text("app_id,check_id,real_error\nghost_app,common.receipt_number_found,true\n")
        assert run(["metrics", "--out", str(out), "--labels", str(labels)]) == 1
        assert "ghost_app" in capsys.readouterr().err

    def test_missing_outputs_exit_1(self, tmp_path):
        assert run(["metrics", "--out", str(tmp_path / "nothing")]) == 1


class TestEvalTextCommand:
    def test_pairs_to_csv(self, tmp_path):
        pairs = tmp_path / "pairs.jsonl"
        rows = [
            {"id": "p1", "candidate": "the cat sat", "reference": "the cat sat",
             "candidate_vec": [1.0, 0.0], "reference_vec": [2.0, 0.0]},
            {"id": "p2", "candidate": "a b", "reference": "a b c d"},
        ]
        pairs.write_text("\n".join(json.dumps(r) for r in rows))
        out_csv = tmp_path / "scores.csv"
        assert run(["eval-text", "--pairs", str(pairs), "--out", str(out_csv)]) == 0
        with out_csv.open() as handle:
            parsed = list(csv.DictReader(handle))
        by_id = {row["id"]: row for row in parsed}
        assert float(by_id["p1"]["rouge_l_f1"]) == 1.0
        assert float(by_id["p1"]["cosine"]) == pytest.approx(1.0)
        assert by_id["p2"]["cosine"] == ""
        assert "mean" in by_id and "pooled" in by_id

    def test_missing_pairs_file(self, tmp_path):
        assert run(["eval-text", "--pairs", str(tmp_path / "nope.jsonl"),
                    "--out", str(tmp_path / "x.csv")]) == 1


class TestConfigFile:
    def test_config_file_defaults(self, tmp_path):
        corpus = tmp_path / "corpus"
        config = tmp_path / "config.yaml"
        config.write_text("consistency: 1.0\n")
        assert run(["gen-corpus", "--out", str(corpus), "--n", "2",
                    "--seed", "1", "--config", str(config)]) == 0
        manifest = json.loads((corpus / "corpus_manifest.json").read_text())
        assert manifest["inconsistent_checks"] == 0

    def test_missing_config_file(self, tmp_path):
        assert run(["gen-corpus", "--out", str(tmp_path / "c"), "--n", "1",
                    "--config", str(tmp_path / "none.yaml")]) == 1
