import json
import logging

import pytest
from click.testing import CliRunner

from chunkstack.cli.config_file import parse_config_lines, resolve_train_config
from chunkstack.cli.main import cli, format_setting
from chunkstack.cli.manifest import blob_hash, manifest_path_for

TINY_TRAIN = [
    "--profile", "tiny", "--content-len", "20", "--max-chunks", "4", "--dtype", "f64",
    "--epochs", "2", "--max-steps", "3", "--batch-size", "8", "--lr", "0.01",
]


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture(autouse=True)
def restore_root_logging():
    """configure_logging swaps the root handlers; put pytest's back afterwards"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def error_line(result):
    return json.loads(result.stderr.strip().splitlines()[-1])


def echoed(result):
    return dict(line.split("=", 1) for line in result.stdout.strip().splitlines() if "=" in line)


@pytest.fixture
def workspace(runner, tmp_path):
    """Synthetic keyword corpus plus a vocabulary built from it"""
    corpus = tmp_path / "corpus"
    result = runner.invoke(
        cli,
        [
            "synth", "--output", str(corpus), "--signal", "keyword", "--n-docs", "16",
            "--n-test-docs", "8", "--vocab-size", "20", "--doc-len-mean", "40",
            "--doc-len-jitter", "4", "--seed", "3",
        ],
    )
    assert result.exit_code == 0, result.stderr
    vocab = tmp_path / "vocab.txt"
    result = runner.invoke(
        cli, ["vocab-build", "--corpus", str(corpus / "train.jsonl"), "--corpus", str(corpus / "test.jsonl"),
              "--size", "40", "--output", str(vocab)],
    )
    assert result.exit_code == 0, result.stderr
    return tmp_path, corpus, vocab


class TestConfigResolution:
    """Preset, config file and flag layering"""

    def test_finetune_preset_dry_run(self, runner):
        result = runner.invoke(cli, ["train", "--preset", "finetune", "--dry-run"])
        assert result.exit_code == 0, result.stderr
        config = echoed(result)
        assert config["lr"] == "3e-5"
        assert config["grad_accum_steps"] == "2"
        assert config["warmup_steps"] == "150"
        assert config["max_steps"] == "none"

    @pytest.mark.parametrize(
        "value, text",
        [(3e-05, "3e-5"), (1.5e-10, "1.5e-10"), (1e20, "1e20"), (0.01, "0.01"), (0.0, "0.0"), (None, "none"), (150, "150"), (True, "True")],
    )
    def test_setting_echo_form(self, value, text):
        assert format_setting(value) == text

    def test_flags_beat_file_beat_preset(self, runner, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# overrides\nlr = 0.5\nbatch-size=4\n\nmode=frozen\n", encoding="utf-8")
        result = runner.invoke(
            cli, ["train", "--preset", "finetune", "--config", str(path), "--batch-size", "2", "--dry-run"]
        )
        assert result.exit_code == 0, result.stderr
        config = echoed(result)
        assert (config["lr"], config["batch_size"], config["grad_accum_steps"], config["mode"]) == (
            "0.5", "2", "2", "frozen"
        )

    def test_unknown_setting_names_line(self, runner, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("lr=0.1\nlearning_rate=0.2\n", encoding="utf-8")
        result = runner.invoke(cli, ["train", "--config", str(path), "--dry-run"])
        assert result.exit_code == 1
        error = error_line(result)
        assert error["error"] == "Validation error"
        assert error["command"] == "train"
        assert f"{path}:2" in error["message"]

    def test_invalid_value_is_a_validation_error(self, runner):
        result = runner.invoke(cli, ["train", "--lr", "-1", "--dry-run"])
        assert result.exit_code == 1
        assert error_line(result)["error"] == "Validation error"

    def test_parse_config_lines(self):
        assert parse_config_lines(["--max-chunks=3", "seed = 7"]) == {"max_chunks": "3", "seed": "7"}
        with pytest.raises(ValueError, match="key=value"):
            parse_config_lines(["lr 0.1"])

    def test_resolve_without_layers(self):
        assert resolve_train_config().lr == 3e-5


class TestUsage:
    def test_unknown_subcommand(self, runner):
        assert runner.invoke(cli, ["bogus"]).exit_code == 2

    def test_train_needs_inputs(self, runner):
        result = runner.invoke(cli, ["train", "--preset", "frozen"])
        assert result.exit_code == 2
        assert "--corpus" in result.stderr

    def test_gradcheck_needs_tiny_geometry(self, runner):
        assert runner.invoke(cli, ["gradcheck", "--no-tiny"]).exit_code == 2

    def test_gradcheck_needs_double_precision(self, runner):
        result = runner.invoke(cli, ["gradcheck", "--dtype", "f32"])
        assert result.exit_code == 1
        assert "f64" in error_line(result)["message"]

    def test_version(self, runner):
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "chunkstack" in result.stdout


class TestGradcheckCommand:
    def test_reports_json(self, runner, tmp_path):
        manifest = tmp_path / "gradcheck.json"
        result = runner.invoke(cli, ["gradcheck", "--tiny", "--dtype", "f64", "--manifest", str(manifest)])
        assert result.exit_code == 0, result.stderr
        payload = json.loads(result.stdout)
        assert payload["passed"] is True
        assert payload["max_rel_err"] <= 1e-4
        assert payload["n_scalars"] > 0
        assert json.loads(manifest.read_text(encoding="utf-8"))["command"] == "gradcheck"


class TestWorkflow:
    """synth -> vocab-build -> train -> eval / predict / baseline"""

    def test_synth_outputs(self, workspace):
        _, corpus, vocab = workspace
        assert {p.name for p in corpus.iterdir()} >= {"train.jsonl", "test.jsonl", "spec.json", "manifest.json"}
        assert vocab.read_text(encoding="utf-8").splitlines()[:3] == ["[PAD]", "[UNK]", "[CLS]"]
        manifest = json.loads(manifest_path_for(vocab).read_text(encoding="utf-8"))
        assert manifest["command"] == "vocab-build"
        assert manifest["inputs"][str(corpus / "train.jsonl")] == blob_hash((corpus / "train.jsonl").read_bytes())

    def test_train_eval_predict(self, runner, workspace):
        tmp_path, corpus, vocab = workspace
        checkpoint = tmp_path / "model.ckpt"
        result = runner.invoke(
            cli,
            ["train", "--corpus", str(corpus / "train.jsonl"), "--vocab", str(vocab), "--output", str(checkpoint)]
            + TINY_TRAIN,
        )
        assert result.exit_code == 0, result.stderr
        summary = echoed(result)
        assert summary["steps"] == "3"
        assert summary["checkpoint"] == str(checkpoint)
        assert manifest_path_for(checkpoint).exists()

        result = runner.invoke(
            cli, ["eval", "--checkpoint", str(checkpoint), "--vocab", str(vocab), "--corpus", str(corpus / "test.jsonl")]
        )
        assert result.exit_code == 0, result.stderr
        report = json.loads(result.stdout)
        assert report["n_examples"] == 8
        assert 0.0 <= report["accuracy"] <= 1.0

        result = runner.invoke(
            cli, ["predict", "--checkpoint", str(checkpoint), "--vocab", str(vocab), "--corpus", str(corpus / "test.jsonl")]
        )
        assert result.exit_code == 0, result.stderr
        rows = [line.split("\t") for line in result.stdout.strip().splitlines()]
        assert len(rows) == 8
        assert rows[0][0] == "test-000000"
        probs = [float(p) for p in rows[0][2].split(",")]
        assert int(rows[0][1]) == probs.index(max(probs))
        assert sum(probs) == pytest.approx(1.0, abs=1e-5)

    def test_checkpoint_rejects_other_vocabulary(self, runner, workspace):
        tmp_path, corpus, vocab = workspace
        checkpoint = tmp_path / "model.ckpt"
        runner.invoke(
            cli,
            ["train", "--corpus", str(corpus / "train.jsonl"), "--vocab", str(vocab), "--output", str(checkpoint)]
            + TINY_TRAIN,
        )
        other = tmp_path / "other.txt"
        other.write_text(vocab.read_text(encoding="utf-8").replace("tok", "tak"), encoding="utf-8")
        result = runner.invoke(
            cli, ["eval", "--checkpoint", str(checkpoint), "--vocab", str(other), "--corpus", str(corpus / "test.jsonl")]
        )
        assert result.exit_code == 1
        assert "vocabulary" in error_line(result)["message"]

    def test_bow_baseline(self, runner, workspace):
        _, corpus, vocab = workspace
        result = runner.invoke(
            cli,
            ["baseline", "--kind", "bow", "--train", str(corpus / "train.jsonl"), "--test",
             str(corpus / "test.jsonl"), "--vocab", str(vocab), "--bow-steps", "50"],
        )
        assert result.exit_code == 0, result.stderr
        assert json.loads(result.stdout)["n_class"] == 2

    def test_malformed_corpus_is_reported(self, runner, workspace):
        tmp_path, _, vocab = workspace
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id": "a", "text": "x", "label": 0}\n{oops\n', encoding="utf-8")
        result = runner.invoke(
            cli, ["train", "--corpus", str(bad), "--vocab", str(vocab), "--output", str(tmp_path / "m.ckpt")] + TINY_TRAIN
        )
        assert result.exit_code == 1
        assert "line 2" in error_line(result)["message"]


class TestManifest:
    def test_blob_hash_matches_git(self):
        assert blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
        assert blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"

    def test_manifest_path(self, tmp_path):
        assert manifest_path_for(tmp_path) == tmp_path / "manifest.json"
        assert manifest_path_for(tmp_path / "m.ckpt") == tmp_path / "m.ckpt.manifest.json"
