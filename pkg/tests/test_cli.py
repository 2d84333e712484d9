import json

import pytest

from apps.cli.services import load_config, parse_overrides, render_config
from main import cli_dispatch
from shared.errors import ConfigError


@pytest.fixture
def log_args(tmp_path):
    return ["--log-dir", str(tmp_path / "logs"), "--log-level", "warning"]


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("hidden=8\nbeam=3\n# comment\ntask=wikipedia\n")
    config = load_config(str(path), {"beam": "2", "seed": None})
    assert config.hidden == 8
    assert config.beam == 2
    assert config.task == "wikipedia"
    assert config.has_global_style and config.n_styles == 4
    assert config.effective_bank_cap == 30


def test_defaults_follow_task():
    config = load_config()
    assert config.task == "argument"
    assert config.effective_bank_cap == 70
    assert config.n_styles == 3
    assert load_config(overrides={"task": "abstract"}).n_styles == 0
    assert load_config(overrides={"style_enabled": "false"}).n_styles == 0


def test_unknown_key_is_named(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("hiden=8\n")
    with pytest.raises(ConfigError) as excinfo:
        load_config(str(path))
    assert excinfo.value.field == "hiden"


@pytest.mark.parametrize("overrides, field", [
    ({"hidden": "7"}, "hidden"),
    ({"threshold": "1.5"}, "threshold"),
    ({"lm_pretrain": "true"}, "lm_pretrain"),
])
def test_invalid_values_are_named(overrides, field):
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides=overrides)
    assert excinfo.value.field == field


def test_train_refuses_decode_options():
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides={"beam": "3"}, scope="train")
    assert excinfo.value.field == "beam"


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.env"))


def test_parse_overrides():
    assert parse_overrides(["Beam=3", "task = wikipedia"]) == {"beam": "3", "task": "wikipedia"}
    with pytest.raises(ConfigError):
        parse_overrides(["beam"])


def test_render_config_round_trips(tmp_path):
    config = load_config(overrides={"hidden": "8", "checkpoint": "runs/x"})
    path = tmp_path / "run.env"
    path.write_text(render_config(config) + "\n")
    assert load_config(str(path)) == config


def test_exit_codes(tmp_path, log_args):
    assert cli_dispatch(log_args + ["synth"]) == 2
    assert cli_dispatch(log_args + ["synth", "--out", str(tmp_path / "c.jsonl"), "--set", "colour=red"]) == 2
    assert cli_dispatch(log_args + ["no-such-command"]) == 2
    assert cli_dispatch(log_args + ["generate", "--out", str(tmp_path / "g.jsonl"),
                                    "--input", str(tmp_path / "missing.jsonl")]) == 2


def test_synth_and_label(tmp_path, log_args):
    corpus = tmp_path / "corpus.jsonl"
    labeled = tmp_path / "labeled.jsonl"
    assert cli_dispatch(log_args + ["synth", "--n", "5", "--seed", "3", "--out", str(corpus)]) == 0
    lines = corpus.read_text().splitlines()
    assert len(lines) == 5
    assert {"id", "topic", "keyphrases", "targets"} <= set(json.loads(lines[0]))
    assert cli_dispatch(log_args + ["label", "--input", str(corpus), "--out", str(labeled),
                                    "--keep-functional-only"]) == 0
    assert len(labeled.read_text().splitlines()) == 5


def test_label_rejects_out_of_range_style(tmp_path, log_args):
    corpus = tmp_path / "corpus.jsonl"
    record = {"id": "s1", "topic": ["tax"], "keyphrases": [["tax", "cut"]],
              "targets": [{"tokens": ["the", "tax", "cut", "."], "selection": [0], "style": 7}]}
    corpus.write_text(json.dumps(record) + "\n")
    assert cli_dispatch(log_args + ["label", "--input", str(corpus), "--report"]) == 2


def test_pipeline(tmp_path, log_args):
    corpus = str(tmp_path / "corpus.jsonl")
    run_dir = tmp_path / "run"
    generations = str(tmp_path / "gen.jsonl")
    plans = str(tmp_path / "plans.jsonl")
    table = tmp_path / "eval.txt"
    tiny = ["--set", "embed=4", "--set", "layers=1", "--hidden", "8", "--epochs", "1", "--batch-size", "4"]

    assert cli_dispatch(log_args + ["synth", "--n", "6", "--out", corpus]) == 0
    assert cli_dispatch(log_args + ["train", "--train", corpus, "--dev", corpus,
                                    "--output-dir", str(run_dir)] + tiny) == 0
    assert (run_dir / "checkpoint" / "best" / "manifest.json").exists()
    assert (run_dir / "checkpoint" / "loss_curve.csv").exists()
    assert (run_dir / "run_config.env").exists()

    assert cli_dispatch(log_args + ["generate", "--input", corpus, "--checkpoint", str(run_dir / "checkpoint"),
                                    "--out", generations, "--oracle-plan", "--beam", "2", "--dump-plan", plans,
                                    "--set", "max_sentence_tokens=4"]) == 0
    records = [json.loads(line) for line in open(generations)]
    assert len(records) == 6
    assert all(len(r["sentences"]) == len(r["plan"]) for r in records)
    assert [json.loads(line)["id"] for line in open(plans)] == [r["id"] for r in records]

    assert cli_dispatch(log_args + ["evaluate", "--generations", generations, "--references", corpus,
                                    "--out", str(table), "--bins", "3"]) == 0
    text = table.read_text()
    assert "BLEU-2" in text and "Sel-F1" in text
    assert "Pearson r" in text


def test_evaluate_needs_something_to_do(tmp_path, log_args):
    corpus = str(tmp_path / "corpus.jsonl")
    assert cli_dispatch(log_args + ["synth", "--n", "2", "--out", corpus]) == 0
    assert cli_dispatch(log_args + ["evaluate", "--references", corpus]) == 2


def test_default_config_snapshot():
    config = load_config()
    assert (config.hidden, config.layers, config.dropout) == (512, 2, 0.2)
    assert (config.lr, config.acc_init, config.clip, config.batch_size) == (0.15, 0.1, 2.0, 64)
    assert (config.beam, config.vocab_size, config.max_sentences, config.threshold) == (5, 50000, 10, 0.5)
    assert load_config(overrides={"task": "wikipedia"}).effective_bank_cap == 30
    assert load_config(overrides={"beam": "1"}).beam == 1


def test_synth_is_byte_identical(tmp_path, log_args):
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (first, second):
        assert cli_dispatch(log_args + ["synth", "--seed", "7", "--n", "8", "--out", str(path)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_train_rejects_decode_flags(tmp_path, log_args):
    corpus = str(tmp_path / "corpus.jsonl")
    assert cli_dispatch(log_args + ["synth", "--n", "2", "--out", corpus]) == 0
    assert cli_dispatch(log_args + ["train", "--train", corpus, "--set", "beam=3"]) == 2
    assert cli_dispatch(log_args + ["train", "--train", corpus, "--beam", "3"]) == 2


def test_pipeline_is_reproducible(tmp_path, log_args):
    corpus = str(tmp_path / "corpus.jsonl")
    assert cli_dispatch(log_args + ["synth", "--n", "4", "--out", corpus]) == 0
    outputs = []
    for name in ("one", "two"):
        run_dir = tmp_path / name
        assert cli_dispatch(log_args + ["train", "--train", corpus, "--output-dir", str(run_dir), "--hidden", "6",
                                        "--set", "embed=3", "--epochs", "2", "--batch-size", "2"]) == 0
        generations = run_dir / "gen.jsonl"
        table = run_dir / "eval.txt"
        assert cli_dispatch(log_args + ["generate", "--input", corpus, "--checkpoint", str(run_dir / "checkpoint"),
                                        "--out", str(generations), "--set", "max_sentence_tokens=5",
                                        "--max-sentences", "3"]) == 0
        assert cli_dispatch(log_args + ["evaluate", "--generations", str(generations), "--references", corpus,
                                        "--out", str(table)]) == 0
        outputs.append((generations.read_bytes(), table.read_bytes()))
    assert outputs[0] == outputs[1]
