"""Directory evaluation, report serialization, and CLI entry tests."""

import csv
import io
import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from aquakit.audio_io import AudioBuffer, write_wav
from aquakit.cli_report import (
    EvalConfig,
    Report,
    main,
    pair_directories,
    run_evaluation,
    write_report,
)
from aquakit.errors import ConfigError, PairingError

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "docs" / "report_schema.json"


def write_tone(path, freq, seconds=1.0, noise=0.0, seed=0, sample_rate=48000):
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    sig = 0.4 * np.sin(2 * np.pi * freq * t)
    if noise:
        sig = sig + noise * np.random.default_rng(seed).standard_normal(len(t))
    write_wav(str(path), AudioBuffer(channels=[np.clip(sig, -1, 1)], sample_rate=sample_rate))


@pytest.fixture(scope="module")
def noisy_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("noisy")
    (root / "ref").mkdir()
    (root / "test").mkdir()
    for i in range(3):
        write_tone(root / "ref" / f"t{i}.wav", 220.0 * (i + 1))
        write_tone(root / "test" / f"t{i}.wav", 220.0 * (i + 1), noise=0.01, seed=i)
    return root


@pytest.fixture(scope="module")
def identity_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("identity")
    (root / "ref").mkdir()
    (root / "test").mkdir()
    for i in range(2):
        for side in ("ref", "test"):
            write_tone(root / side / f"same{i}.wav", 330.0 + 110.0 * i)
    return root


class TestEvalConfig:
    def test_deduplicates_metrics(self):
        config = EvalConfig(ref_dir="r", test_dir="t", metrics=["mse", "snr", "mse"])
        assert config.metrics == ["mse", "snr"]

    def test_splits_pair_and_corpus_metrics(self):
        config = EvalConfig(ref_dir="r", test_dir="t", metrics=["fad", "mse", "peaq", "mmd"])
        assert config.pair_metrics == ["mse", "peaq"]
        assert config.corpus_metrics == ["fad", "mmd"]

    def test_rejects_empty_metrics(self):
        with pytest.raises(ConfigError):
            EvalConfig(ref_dir="r", test_dir="t", metrics=[])

    def test_rejects_unknown_metric(self):
        with pytest.raises(ConfigError, match="pesq"):
            EvalConfig(ref_dir="r", test_dir="t", metrics=["pesq"])

    def test_rejects_bad_enums(self):
        base = dict(ref_dir="r", test_dir="t", metrics=["mse"])
        with pytest.raises(ConfigError):
            EvalConfig(align="pad", **base)
        with pytest.raises(ConfigError):
            EvalConfig(embeddings="vggish", **base)
        with pytest.raises(ConfigError):
            EvalConfig(emb_format="parquet", **base)
        with pytest.raises(ConfigError):
            EvalConfig(mmd_estimator="jackknife", **base)
        with pytest.raises(ConfigError):
            EvalConfig(out_format="xml", **base)

    def test_embedding_paths_must_pair(self):
        with pytest.raises(ConfigError):
            EvalConfig(ref_dir="r", test_dir="t", metrics=["fad"], ref_emb="only.csv")

    def test_rejects_zero_jobs(self):
        with pytest.raises(ConfigError):
            EvalConfig(ref_dir="r", test_dir="t", metrics=["mse"], jobs=0)

    def test_echo_matches_schema_contract(self):
        config = EvalConfig(ref_dir="r", test_dir="t", metrics=["mse"])
        schema = json.loads(SCHEMA_PATH.read_text())
        required = schema["properties"]["config"]["required"]
        assert sorted(config.echo()) == sorted(required)
        for hidden in ("out", "out_format", "jobs", "peaq_debug_dump"):
            assert hidden not in config.echo()


class TestPairing:
    def test_pairs_sorted_by_name(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
            for name in ("zeta.wav", "alpha.wav", "mid.wav"):
                write_tone(tmp_path / side / name, 440.0, seconds=0.05)
        result = pair_directories(str(tmp_path / "ref"), str(tmp_path / "test"))
        assert [name for name, _, _ in result.pairs] == ["alpha.wav", "mid.wav", "zeta.wav"]
        assert result.unmatched_ref == []
        assert result.unmatched_test == []

    def test_ignores_non_wav_and_subdirs(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
            write_tone(tmp_path / side / "a.wav", 440.0, seconds=0.05)
            (tmp_path / side / "notes.txt").write_text("x")
            (tmp_path / side / "nested").mkdir()
        result = pair_directories(str(tmp_path / "ref"), str(tmp_path / "test"))
        assert [name for name, _, _ in result.pairs] == ["a.wav"]

    def test_unmatched_reported(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
            write_tone(tmp_path / side / "both.wav", 440.0, seconds=0.05)
        write_tone(tmp_path / "ref" / "ref_only.wav", 440.0, seconds=0.05)
        write_tone(tmp_path / "test" / "test_only.wav", 440.0, seconds=0.05)
        result = pair_directories(str(tmp_path / "ref"), str(tmp_path / "test"))
        assert result.unmatched_ref == ["ref_only.wav"]
        assert result.unmatched_test == ["test_only.wav"]

    def test_missing_directory(self, tmp_path):
        (tmp_path / "ref").mkdir()
        with pytest.raises(PairingError, match="test directory"):
            pair_directories(str(tmp_path / "ref"), str(tmp_path / "nope"))

    def test_no_common_names_lists_both_sides(self, tmp_path):
        for side, name in (("ref", "left.wav"), ("test", "right.wav")):
            (tmp_path / side).mkdir()
            write_tone(tmp_path / side / name, 440.0, seconds=0.05)
        with pytest.raises(PairingError) as excinfo:
            pair_directories(str(tmp_path / "ref"), str(tmp_path / "test"))
        assert "left.wav" in str(excinfo.value)
        assert "right.wav" in str(excinfo.value)

    def test_unknown_pairing_mode(self, tmp_path):
        with pytest.raises(ConfigError):
            pair_directories(str(tmp_path), str(tmp_path), pairing="by_index")


class TestRunEvaluation:
    def test_identity_metrics(self, identity_corpus):
        report = run_evaluation(EvalConfig(
            ref_dir=str(identity_corpus / "ref"),
            test_dir=str(identity_corpus / "test"),
            metrics=["mse", "snr"],
        ))
        assert len(report.pairs) == 2
        for row in report.pairs:
            assert row["metrics"]["mse"] == 0.0
            assert row["metrics"]["snr"] == float("inf")
        assert report.aggregate["mse"]["mean"] == 0.0
        assert report.errors == []

    def test_identity_fad_near_zero(self, identity_corpus):
        report = run_evaluation(EvalConfig(
            ref_dir=str(identity_corpus / "ref"),
            test_dir=str(identity_corpus / "test"),
            metrics=["fad"],
        ))
        assert report.corpus_metrics["fad"] == pytest.approx(0.0, abs=1e-6)

    def test_identity_mmd_near_zero(self, identity_corpus):
        report = run_evaluation(EvalConfig(
            ref_dir=str(identity_corpus / "ref"),
            test_dir=str(identity_corpus / "test"),
            metrics=["mmd"],
        ))
        # identical sets cancel exactly in theory; the cubic kernel sums
        # are ~1e18 here, so allow for float cancellation residue
        assert report.corpus_metrics["mmd"] == pytest.approx(0.0, abs=1e-3)

    def test_noisy_metrics_move(self, noisy_corpus):
        report = run_evaluation(EvalConfig(
            ref_dir=str(noisy_corpus / "ref"),
            test_dir=str(noisy_corpus / "test"),
            metrics=["mse", "snr", "si_sdr"],
        ))
        for row in report.pairs:
            assert row["metrics"]["mse"] > 0.0
            assert 20.0 < row["metrics"]["snr"] < 40.0
        assert report.aggregate["snr"]["min"] <= report.aggregate["snr"]["max"]

    def test_corrupt_pair_recorded_not_fatal(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
            write_tone(tmp_path / side / "ok.wav", 440.0)
            (tmp_path / side / "bad.wav").write_bytes(b"RIFF not really a wav")
        report = run_evaluation(EvalConfig(
            ref_dir=str(tmp_path / "ref"),
            test_dir=str(tmp_path / "test"),
            metrics=["mse"],
        ))
        assert len(report.pairs) == 1
        assert report.pairs[0]["ref_file"].endswith("ok.wav")
        assert any("bad.wav" in e for e in report.errors)

    def test_unmatched_files_recorded(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
            write_tone(tmp_path / side / "both.wav", 440.0, seconds=0.25)
        write_tone(tmp_path / "ref" / "extra.wav", 440.0, seconds=0.25)
        report = run_evaluation(EvalConfig(
            ref_dir=str(tmp_path / "ref"),
            test_dir=str(tmp_path / "test"),
            metrics=["mse"],
        ))
        assert any("extra.wav" in e and "unmatched" in e for e in report.errors)

    def test_length_mismatch_strict_vs_truncate(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
        write_tone(tmp_path / "ref" / "a.wav", 440.0, seconds=1.0)
        write_tone(tmp_path / "test" / "a.wav", 440.0, seconds=0.9)
        base = dict(
            ref_dir=str(tmp_path / "ref"),
            test_dir=str(tmp_path / "test"),
            metrics=["mse"],
        )
        strict = run_evaluation(EvalConfig(align="strict", **base))
        assert strict.pairs == []
        assert any("a.wav" in e for e in strict.errors)
        lenient = run_evaluation(EvalConfig(align="truncate", **base))
        assert len(lenient.pairs) == 1
        assert any("truncat" in w for w in lenient.pairs[0]["warnings"])
        assert lenient.pairs[0]["metrics"]["mse"] == pytest.approx(0.0, abs=1e-12)

    def test_jobs_do_not_change_report(self, noisy_corpus, tmp_path):
        base = dict(
            ref_dir=str(noisy_corpus / "ref"),
            test_dir=str(noisy_corpus / "test"),
            metrics=["mse", "snr", "fad"],
        )
        serial = run_evaluation(EvalConfig(jobs=1, **base))
        parallel = run_evaluation(EvalConfig(jobs=4, **base))
        one, two = tmp_path / "one.json", tmp_path / "two.json"
        write_report(serial, str(one))
        write_report(parallel, str(two))
        assert one.read_bytes() == two.read_bytes()

    def test_external_embeddings_skip_extraction(self, identity_corpus, tmp_path):
        rng = np.random.default_rng(4)
        rows = rng.standard_normal((16, 6))
        for name in ("r.csv", "t.csv"):
            lines = "\n".join(",".join(f"{v:.8f}" for v in row) for row in rows)
            (tmp_path / name).write_text(lines + "\n")
        report = run_evaluation(EvalConfig(
            ref_dir=str(identity_corpus / "ref"),
            test_dir=str(identity_corpus / "test"),
            metrics=["fad"],
            ref_emb=str(tmp_path / "r.csv"),
            test_emb=str(tmp_path / "t.csv"),
        ))
        assert report.corpus_metrics["fad"] == pytest.approx(0.0, abs=1e-9)

    def test_missing_embedding_file_is_config_error(self, identity_corpus):
        with pytest.raises(ConfigError):
            run_evaluation(EvalConfig(
                ref_dir=str(identity_corpus / "ref"),
                test_dir=str(identity_corpus / "test"),
                metrics=["fad"],
                ref_emb="/nonexistent/r.csv",
                test_emb="/nonexistent/t.csv",
            ))

    def test_peaq_metric_and_debug_dump(self, identity_corpus, tmp_path):
        dump_dir = tmp_path / "dumps"
        report = run_evaluation(EvalConfig(
            ref_dir=str(identity_corpus / "ref"),
            test_dir=str(identity_corpus / "test"),
            metrics=["peaq"],
            peaq_debug_dump=str(dump_dir),
        ))
        for row in report.pairs:
            assert row["metrics"]["peaq"] >= -0.2
        dumps = sorted(p.name for p in dump_dir.iterdir())
        assert dumps == ["same0.json", "same1.json"]
        loaded = json.loads((dump_dir / "same0.json").read_text())
        assert "movs" in loaded and "frames" in loaded


def minimal_report(**overrides):
    fields = dict(
        tool_version="0.0.0",
        config={"metrics": ["mse"]},
        pairs=[],
        corpus_metrics={},
        aggregate={},
        errors=[],
    )
    fields.update(overrides)
    return Report(**fields)


class TestWriteReport:
    def test_canonical_float_and_nonfinite_encoding(self, tmp_path):
        report = minimal_report(
            pairs=[{
                "ref_file": "r/a.wav",
                "test_file": "t/a.wav",
                "metrics": {"mse": 1.0 / 3.0, "snr": float("inf"), "kl": float("nan")},
                "warnings": [],
            }],
            corpus_metrics={"fad": float("-inf")},
        )
        path = tmp_path / "r.json"
        write_report(report, str(path))
        text = path.read_text()
        assert '"mse":0.333333333' in text.replace(" ", "")
        assert '"snr":"inf"' in text.replace(" ", "")
        assert '"kl":"nan"' in text.replace(" ", "")
        assert '"fad":"-inf"' in text.replace(" ", "")
        parsed = json.loads(text)
        assert parsed["pairs"][0]["metrics"]["snr"] == "inf"

    def test_keys_sorted(self, tmp_path):
        path = tmp_path / "r.json"
        write_report(minimal_report(), str(path))
        parsed = json.loads(path.read_text())
        assert list(parsed) == sorted(parsed)

    def test_repeated_writes_identical(self, tmp_path):
        report = minimal_report(corpus_metrics={"fad": 0.12345678901234})
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_report(report, str(a))
        write_report(report, str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_empty_pairs_still_valid(self, tmp_path):
        path = tmp_path / "r.json"
        write_report(minimal_report(), str(path))
        assert json.loads(path.read_text())["pairs"] == []

    def test_csv_layout(self, tmp_path):
        report = minimal_report(
            config={"metrics": ["mse", "snr"]},
            pairs=[{
                "ref_file": "r/a.wav",
                "test_file": "t/a.wav",
                "metrics": {"mse": 0.25, "snr": 12.0},
                "warnings": ["resampled"],
            }],
            aggregate={"mse": {"mean": 0.25, "min": 0.25, "max": 0.25}},
            errors=["b.wav: unreadable"],
        )
        path = tmp_path / "r.csv"
        write_report(report, str(path), format="csv")
        lines = path.read_text().splitlines()
        data = [line for line in lines if not line.startswith("#")]
        rows = list(csv.reader(io.StringIO("\n".join(data))))
        assert rows[0] == ["pair", "mse", "snr", "warnings"]
        assert rows[1] == ["a.wav", "0.25", "12", "resampled"]
        comments = [line for line in lines if line.startswith("#")]
        assert any("unreadable" in line for line in comments)
        assert any("aggregate mse" in line for line in comments)

    def test_stdout_destination(self, capsys):
        write_report(minimal_report(), "-")
        out = capsys.readouterr().out
        assert json.loads(out)["tool_version"] == "0.0.0"

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            write_report(minimal_report(), str(tmp_path / "r.xml"), format="xml")


class TestMain:
    def test_happy_path_json(self, noisy_corpus, tmp_path):
        out = tmp_path / "report.json"
        code = main([
            "--ref-dir", str(noisy_corpus / "ref"),
            "--test-dir", str(noisy_corpus / "test"),
            "--metrics", "mse,snr,fad",
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        schema = json.loads(SCHEMA_PATH.read_text())
        jsonschema.validate(report, schema)
        assert len(report["pairs"]) == 3

    def test_report_with_failures_validates(self, tmp_path):
        for side in ("ref", "test"):
            (tmp_path / side).mkdir()
            write_tone(tmp_path / side / "ok.wav", 440.0, seconds=0.25)
            (tmp_path / side / "bad.wav").write_bytes(b"junk")
        write_tone(tmp_path / "ref" / "extra.wav", 440.0, seconds=0.25)
        out = tmp_path / "report.json"
        code = main([
            "--ref-dir", str(tmp_path / "ref"),
            "--test-dir", str(tmp_path / "test"),
            "--metrics", "mse",
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        jsonschema.validate(report, json.loads(SCHEMA_PATH.read_text()))
        assert len(report["errors"]) == 2

    def test_missing_required_argument(self, capsys):
        assert main(["--ref-dir", "somewhere"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_metric(self, noisy_corpus, capsys):
        code = main([
            "--ref-dir", str(noisy_corpus / "ref"),
            "--test-dir", str(noisy_corpus / "test"),
            "--metrics", "mse,bogus",
        ])
        assert code == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_directory(self, capsys):
        code = main([
            "--ref-dir", "/nonexistent/ref",
            "--test-dir", "/nonexistent/test",
            "--metrics", "mse",
        ])
        assert code == 1

    def test_unwritable_output(self, noisy_corpus, capsys):
        code = main([
            "--ref-dir", str(noisy_corpus / "ref"),
            "--test-dir", str(noisy_corpus / "test"),
            "--metrics", "mse",
            "--out", "/nonexistent/dir/report.json",
        ])
        assert code == 2

    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
        assert "aquakit" in capsys.readouterr().out

    def test_csv_to_stdout(self, noisy_corpus, capsys):
        code = main([
            "--ref-dir", str(noisy_corpus / "ref"),
            "--test-dir", str(noisy_corpus / "test"),
            "--metrics", "mse",
            "--format", "csv",
        ])
        assert code == 0
        assert capsys.readouterr().out.startswith("pair,mse")
