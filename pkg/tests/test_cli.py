"""Command-line behavior: config handling, exit codes, stage outputs."""

import json

import pytest

from stemexplain.cli import (DEFAULT_CONFIG, ConfigError, config_digest,
                             load_config, main)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def stderr_record(err):
    return json.loads(err.strip().splitlines()[-1])


class TestConfigLoading:
    def test_defaults_plus_overrides(self):
        config = load_config(None, {"seed": 7, "out_dir": "elsewhere"})
        assert config["seed"] == 7
        assert config["out_dir"] == "elsewhere"
        assert config["corpus"] == "@demo"

    def test_seed_required(self):
        with pytest.raises(ConfigError, match="seed"):
            load_config(None, {})

    def test_seed_must_be_integer(self):
        with pytest.raises(ConfigError):
            load_config(None, {"seed": True})

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 1, "mystery": 2}', encoding="utf-8")
        with pytest.raises(ConfigError, match="mystery"):
            load_config(str(path), {})

    def test_unknown_nested_key_named_with_trail(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 1, "logreg": {"momentum": 0.9}}', encoding="utf-8")
        with pytest.raises(ConfigError, match="logreg.momentum"):
            load_config(str(path), {})

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{seed: 1}", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(str(path), {})

    def test_bad_class_axis(self):
        with pytest.raises(ConfigError, match="class_axis"):
            load_config(None, {"seed": 1, "class_axis": "dewey"})

    def test_bad_test_fraction(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 1, "split": {"test_fraction": 1.0}}',
                        encoding="utf-8")
        with pytest.raises(ConfigError, match="test_fraction"):
            load_config(str(path), {})

    def test_relative_paths_anchor_to_config_file(self, tmp_path):
        sub = tmp_path / "sub"
        sub.mkdir()
        (sub / "corpus.jsonl").write_text("", encoding="utf-8")
        path = sub / "c.json"
        path.write_text('{"seed": 1, "corpus": "corpus.jsonl"}', encoding="utf-8")
        config = load_config(str(path), {})
        assert config["corpus"] == str(sub / "corpus.jsonl")

    def test_cli_override_beats_config_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 1, "corpus": "@demo"}', encoding="utf-8")
        config = load_config(str(path), {"seed": 99})
        assert config["seed"] == 99


class TestConfigDigest:
    def test_out_dir_does_not_participate(self):
        a = load_config(None, {"seed": 1, "out_dir": "here"})
        b = load_config(None, {"seed": 1, "out_dir": "there"})
        assert config_digest(a) == config_digest(b)

    def test_seed_participates(self):
        a = load_config(None, {"seed": 1})
        b = load_config(None, {"seed": 2})
        assert config_digest(a) != config_digest(b)

    def test_corpus_path_hashed_by_content(self, tmp_path):
        for name in ("x.jsonl", "y.jsonl"):
            (tmp_path / name).write_text(
                '{"id": "d", "arxiv": [], "msc": [], "segments": '
                '[{"kind": "text", "content": "hi"}]}\n', encoding="utf-8")
        a = load_config(None, {"seed": 1, "corpus": str(tmp_path / "x.jsonl")})
        b = load_config(None, {"seed": 1, "corpus": str(tmp_path / "y.jsonl")})
        assert config_digest(a) == config_digest(b)


class TestMainErrors:
    def test_missing_seed_exits_2(self, capsys):
        code, _, err = run(capsys, "ingest")
        assert code == 2
        assert stderr_record(err)["error"] == "ConfigError"

    def test_missing_corpus_file_exits_3(self, capsys, tmp_path):
        code, _, err = run(capsys, "ingest", "--seed", "1",
                           "--corpus", str(tmp_path / "absent.jsonl"),
                           "--out-dir", str(tmp_path / "out"))
        assert code == 3
        assert stderr_record(err)["error"] == "ParseError"

    def test_link_without_gazetteers_exits_2(self, capsys, tmp_path):
        code, _, err = run(capsys, "link", "--seed", "1",
                           "--out-dir", str(tmp_path / "out"))
        assert code == 2
        assert "gazetteers" in stderr_record(err)["message"]

    def test_report_with_missing_sections_exits_3(self, capsys, tmp_path):
        code, _, err = run(capsys, "report", "--seed", "1",
                           "--out-dir", str(tmp_path / "out"))
        assert code == 3
        assert "ingest_summary.tsv" in stderr_record(err)["message"]

    def test_plotdata_entropy_table_needs_explain_output(self, capsys, tmp_path):
        code, _, err = run(capsys, "plotdata", "--seed", "1",
                           "--out-dir", str(tmp_path / "out"),
                           "--which", "entropy-table")
        assert code == 3

    def test_bad_seed_flag_is_an_argparse_error(self, capsys):
        with pytest.raises(SystemExit):
            main(["ingest", "--seed", "lots"])

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0


class TestPrintConfig:
    def test_effective_config_printed(self, capsys):
        code, out, _ = run(capsys, "print-config", "--seed", "5")
        assert code == 0
        printed = json.loads(out)
        assert printed["seed"] == 5
        assert set(printed) == set(DEFAULT_CONFIG)


class TestStages:
    def test_ingest_demo(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run(capsys, "ingest", "--seed", "1",
                           "--out-dir", str(out_dir))
        assert code == 0
        assert out.startswith("ingest: wrote")
        table = (out_dir / "ingest_summary.tsv").read_text(encoding="utf-8")
        metrics = dict(line.split("\t") for line in table.splitlines()[1:])
        assert metrics["documents"] == "120"
        # every demo document carries identifier-name gold
        assert metrics["documents_with_gold"] == "120"

    def test_manifest_shape(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        assert run(capsys, "stats", "--seed", "1",
                   "--out-dir", str(out_dir))[0] == 0
        manifest = json.loads((out_dir / "stats_manifest.json").read_text())
        assert set(manifest) == {"tool", "version", "stage", "seed",
                                 "config_digest", "inputs", "outputs"}
        assert manifest["stage"] == "stats"
        assert manifest["seed"] == 1
        assert set(manifest["outputs"]) == {"library.jsonl", "entropy_summary.tsv",
                                            "key_entropies.tsv"}
        for name in manifest["outputs"]:
            assert (out_dir / name).is_file()

    def test_stats_byte_identical_across_out_dirs(self, capsys, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert run(capsys, "stats", "--seed", "1", "--out-dir", str(first))[0] == 0
        assert run(capsys, "stats", "--seed", "1", "--out-dir", str(second))[0] == 0
        for name in ("library.jsonl", "entropy_summary.tsv",
                     "key_entropies.tsv", "stats_manifest.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_synth_emits_usable_config(self, capsys, tmp_path):
        fixtures = tmp_path / "fixtures"
        code, _, _ = run(capsys, "synth", "--seed", "1",
                         "--out-dir", str(fixtures))
        assert code == 0
        emitted = json.loads((fixtures / "demo_config.json").read_text())
        assert emitted["corpus"] == "demo_corpus.jsonl"
        assert emitted["seed"] == 12
        # the emitted config anchors to its own directory, so it works
        # with any working directory and any out_dir
        out_dir = tmp_path / "elsewhere"
        code, _, _ = run(capsys, "ingest", "-c", str(fixtures / "demo_config.json"),
                         "--out-dir", str(out_dir))
        assert code == 0
        assert (out_dir / "ingest_summary.tsv").is_file()

    def test_synth_writes_no_manifest(self, capsys, tmp_path):
        fixtures = tmp_path / "fixtures"
        assert run(capsys, "synth", "--seed", "1",
                   "--out-dir", str(fixtures))[0] == 0
        assert not (fixtures / "synth_manifest.json").exists()

    def test_plotdata_symbol_name(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, _, _ = run(capsys, "plotdata", "--seed", "1",
                         "--out-dir", str(out_dir),
                         "--which", "symbol-name-distribution")
        assert code == 0
        lines = (out_dir / "plot_symbol_name.tsv").read_text().splitlines()
        assert lines[0] == "series\tclass\tfraction"
        series = {line.split("\t")[0] for line in lines[1:]}
        assert len(series) == 2  # one identifier series, one name series
        for prefix in ("identifier:", "name:"):
            fractions = [float(line.split("\t")[2]) for line in lines[1:]
                         if line.startswith(prefix)]
            assert sum(fractions) == pytest.approx(1.0)

    def test_plotdata_unknown_symbol_exits_4(self, capsys, tmp_path):
        code, _, err = run(capsys, "plotdata", "--seed", "1",
                           "--out-dir", str(tmp_path / "out"),
                           "--which", "symbol-name-distribution",
                           "--symbol", "zz")
        assert code == 4
        assert stderr_record(err)["error"] == "ValidationError"

    def test_classify_stage_outputs(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, _, _ = run(capsys, "classify", "--seed", "1",
                         "--out-dir", str(out_dir))
        assert code == 0
        table = (out_dir / "classify.tsv").read_text().splitlines()
        metrics = dict(line.split("\t") for line in table[1:])
        assert 0.0 <= float(metrics["accuracy"]) <= 1.0
        assert metrics["evaluated_on"] == "test"
        assert (out_dir / "classify_model.json").is_file()
        assert (out_dir / "classify_predictions.tsv").is_file()
