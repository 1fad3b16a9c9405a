import json

import pytest

from argbound.cli import main
from argbound.corpus import parse_conll


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synthetic corpus plus a small trained joint checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "train.conll"
    assert run_cli("synth", "--out", str(data), "--sentences", "60", "--seed", "3") == 0

    config = {
        "model": "joint",
        "hidden_size": 6,
        "attention_hidden": 5,
        "embedding_dim": 8,
        "epochs": 3,
        "batch_size": 10,
        "learning_rate": 0.01,
        "dropout": 0.0,
        "l2": 0.00001,
        "seed": 3,
        "train_path": str(data),
        "output_path": str(root / "model.json"),
        "validation_fraction": 0.15,
    }
    config_path = root / "run.json"
    config_path.write_text(json.dumps(config))
    assert run_cli("train", "--config", str(config_path)) == 0
    return {
        "root": root,
        "data": data,
        "config": config,
        "config_path": config_path,
        "model": root / "model.json",
    }


class TestSynth:
    def test_output_parses_with_markers(self, tmp_path):
        out = tmp_path / "synth.conll"
        assert run_cli("synth", "--out", str(out), "--sentences", "25", "--seed", "1") == 0
        corpus = parse_conll(out.read_text())
        assert len(corpus.sentences()) == 25
        assert any(s.argumentative for s in corpus.sentences())

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.conll", tmp_path / "b.conll"
        run_cli("synth", "--out", str(a), "--sentences", "20", "--seed", "7")
        run_cli("synth", "--out", str(b), "--sentences", "20", "--seed", "7")
        assert a.read_bytes() == b.read_bytes()

    def test_embedding_file_loads(self, tmp_path):
        out = tmp_path / "synth.conll"
        emb = tmp_path / "vec.txt"
        run_cli(
            "synth", "--out", str(out), "--sentences", "10", "--seed", "2",
            "--embeddings-out", str(emb), "--dim", "4",
        )
        from argbound.autodiff import Prng
        from argbound.embeddings import load_embedding_text

        table = load_embedding_text(str(emb), 4, Prng(0))
        assert len(table.words) == 50


class TestTrain:
    def test_checkpoint_loadable(self, workspace):
        from argbound.checkpoint import load_checkpoint

        ckpt = load_checkpoint(str(workspace["model"]))
        assert ckpt.model_kind == "joint"
        assert ckpt.epoch >= 1

    def test_same_seed_byte_identical_checkpoints(self, workspace):
        root = workspace["root"]
        config = dict(workspace["config"])
        for name in ("r1.json", "r2.json"):
            config["output_path"] = str(root / name)
            config_path = root / f"cfg_{name}"
            config_path.write_text(json.dumps(config))
            assert run_cli("train", "--config", str(config_path)) == 0
        assert (root / "r1.json").read_bytes() == (root / "r2.json").read_bytes()

    def test_unknown_config_key_exits_2(self, workspace, capsys):
        bad = workspace["root"] / "bad.json"
        bad.write_text(json.dumps({**workspace["config"], "learning_rte": 0.1}))
        assert run_cli("train", "--config", str(bad)) == 2
        assert "learning_rte" in capsys.readouterr().err

    def test_missing_config_exits_2(self, workspace):
        assert run_cli("train", "--config", str(workspace["root"] / "nope.json")) == 2

    def test_parse_error_exits_3_with_line(self, workspace, capsys, tmp_path):
        bad_data = tmp_path / "bad.conll"
        bad_data.write_text("a\tO\nb\tQ\n")
        assert (
            run_cli("train", "--config", str(workspace["config_path"]), "--train", str(bad_data))
            == 3
        )
        assert "line 2" in capsys.readouterr().err

    def test_epochs_zero_writes_initial_weights(self, workspace, tmp_path):
        config = dict(workspace["config"])
        config["epochs"] = 0
        config["output_path"] = str(tmp_path / "init.json")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        assert run_cli("train", "--config", str(path)) == 0
        from argbound.checkpoint import load_checkpoint

        ckpt = load_checkpoint(config["output_path"])
        assert ckpt.epoch == 0
        assert ckpt.best_val_score == float("-inf")

    def test_preset_expands(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"preset": "wikipedia", "epochs": -1}))
        assert run_cli("train", "--config", str(cfg)) == 2  # bad epochs, but preset accepted
        cfg.write_text(json.dumps({"preset": "unknown"}))
        assert run_cli("train", "--config", str(cfg)) == 2
        assert "preset" in capsys.readouterr().err

    def test_undersampling_config(self, workspace, tmp_path, capsys):
        config = dict(workspace["config"])
        config["undersample_ratio"] = 1.0
        config["epochs"] = 1
        config["output_path"] = str(tmp_path / "us.json")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        assert run_cli("train", "--config", str(path)) == 0

    def test_num_layers_config(self, workspace, tmp_path):
        config = dict(workspace["config"])
        config["num_layers"] = 2
        config["epochs"] = 1
        config["output_path"] = str(tmp_path / "stack.json")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        assert run_cli("train", "--config", str(path)) == 0
        from argbound.checkpoint import load_checkpoint, model_from_checkpoint

        model = model_from_checkpoint(load_checkpoint(config["output_path"]))
        assert len(model.bilstm_stack) == 2

    def test_binary_params_flag(self, workspace, tmp_path):
        config = dict(workspace["config"])
        config["output_path"] = str(tmp_path / "bin.json")
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        assert run_cli("train", "--config", str(path), "--binary-params") == 0
        assert (tmp_path / "bin.json.bin").exists()
        from argbound.checkpoint import load_checkpoint

        assert load_checkpoint(config["output_path"]).model_kind == "joint"


class TestPredict:
    def test_outputs_are_deterministic(self, workspace, tmp_path):
        out1, out2 = tmp_path / "p1.conll", tmp_path / "p2.conll"
        for out in (out1, out2):
            assert (
                run_cli(
                    "predict", "--model", str(workspace["model"]),
                    "--input", str(workspace["data"]), "--output", str(out),
                )
                == 0
            )
        assert out1.read_bytes() == out2.read_bytes()

    def test_structure_preserved_and_probs_attached(self, workspace, tmp_path):
        out = tmp_path / "pred.conll"
        run_cli(
            "predict", "--model", str(workspace["model"]),
            "--input", str(workspace["data"]), "--output", str(out),
        )
        gold = parse_conll(workspace["data"].read_text())
        pred = parse_conll(out.read_text())
        assert [d.id for d in pred.documents] == [d.id for d in gold.documents]
        for g, p in zip(gold.sentences(), pred.sentences()):
            assert g.tokens == p.tokens
        assert "# arg_prob=" in out.read_text()  # joint model attaches probabilities

    def test_tagger_output_line_count_matches_input(self, workspace, tmp_path):
        # non-classifier checkpoints attach no comments, so the line counts
        # must match exactly
        config = dict(workspace["config"])
        config.update(model="bilstm-crf", epochs=1, output_path=str(tmp_path / "crf.json"))
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        assert run_cli("train", "--config", str(cfg)) == 0
        out = tmp_path / "pred.conll"
        assert (
            run_cli(
                "predict", "--model", config["output_path"],
                "--input", str(workspace["data"]), "--output", str(out),
            )
            == 0
        )
        assert len(out.read_text().splitlines()) == len(
            workspace["data"].read_text().splitlines()
        )

    def test_classifier_checkpoint_rejected_for_predict(self, workspace, tmp_path):
        config = dict(workspace["config"])
        config.update(
            model="classifier",
            epochs=1,
            output_path=str(tmp_path / "cls.json"),
            selection_metric="classification_f1",
        )
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(config))
        assert run_cli("train", "--config", str(cfg)) == 0
        assert (
            run_cli(
                "predict", "--model", config["output_path"],
                "--input", str(workspace["data"]), "--output", str(tmp_path / "o.conll"),
            )
            == 4
        )

    def test_round_trip_self_evaluation_is_perfect(self, workspace, tmp_path, capsys):
        out = tmp_path / "pred.conll"
        run_cli(
            "predict", "--model", str(workspace["model"]),
            "--input", str(workspace["data"]), "--output", str(out),
        )
        assert run_cli("evaluate", "--gold", str(out), "--pred", str(out), "--mode", "token") == 0
        assert "macro_f1=1.000000" in capsys.readouterr().out

    def test_unreadable_checkpoint_exits_4(self, workspace, tmp_path):
        missing = tmp_path / "missing.json"
        assert (
            run_cli(
                "predict", "--model", str(missing),
                "--input", str(workspace["data"]), "--output", str(tmp_path / "o.conll"),
            )
            == 4
        )


class TestEvaluate:
    def _write(self, path, text):
        path.write_text(text)
        return str(path)

    def test_hand_example_macro(self, tmp_path, capsys):
        gold = self._write(tmp_path / "gold.conll", "a\tB\nb\tI\nc\tO\nd\tO\n")
        pred = self._write(tmp_path / "pred.conll", "a\tB\nb\tO\nc\tO\nd\tO\n")
        assert run_cli("evaluate", "--gold", gold, "--pred", pred, "--mode", "token") == 0
        out = capsys.readouterr().out
        assert "macro_f1=0.600000" in out
        assert "f1_B=1.000000" in out
        assert "f1_I=0.000000" in out
        assert "f1_O=0.800000" in out

    def test_span_mode_off_by_one_below_one(self, tmp_path, capsys):
        gold = self._write(tmp_path / "gold.conll", "a\tB\nb\tI\nc\tO\n")
        pred = self._write(tmp_path / "pred.conll", "a\tB\nb\tI\nc\tI\n")
        assert run_cli("evaluate", "--gold", gold, "--pred", pred, "--mode", "span") == 0
        out = capsys.readouterr().out
        assert "span_f1=0.000000" in out

    def test_classify_mode(self, tmp_path, capsys):
        gold = self._write(tmp_path / "g.conll", "a\tB\n\nb\tO\n")
        pred = self._write(tmp_path / "p.conll", "a\tB\n\nb\tO\n")
        assert run_cli("evaluate", "--gold", gold, "--pred", pred, "--mode", "classify") == 0
        assert "cls_f1=1.000000" in capsys.readouterr().out

    def test_token_mismatch_exits_5_naming_position(self, tmp_path, capsys):
        gold = self._write(tmp_path / "g.conll", "a\tB\nb\tI\n")
        pred = self._write(tmp_path / "p.conll", "a\tB\nDIFFERENT\tI\n")
        assert run_cli("evaluate", "--gold", gold, "--pred", pred, "--mode", "token") == 5
        err = capsys.readouterr().err
        assert "sentence 0" in err and "token 1" in err

    def test_sentence_count_mismatch_exits_5(self, tmp_path):
        gold = self._write(tmp_path / "g.conll", "a\tB\n\nb\tO\n")
        pred = self._write(tmp_path / "p.conll", "a\tB\n")
        assert run_cli("evaluate", "--gold", gold, "--pred", pred) == 5


class TestGradcheck:
    @pytest.mark.parametrize("kind", ["bilstm", "bilstm-crf", "classifier", "joint"])
    def test_all_kinds_pass(self, kind, capsys):
        assert run_cli("gradcheck", "--model", kind, "--seed", "11") == 0
        assert "worst=" in capsys.readouterr().out

    def test_joint_detached(self, capsys):
        assert run_cli("gradcheck", "--model", "joint", "--seed", "11", "--detach-p") == 0
        assert "skipped" in capsys.readouterr().out

    def test_failure_exits_1_listing_parameters(self, capsys, monkeypatch):
        monkeypatch.setattr("argbound.cli.GRADCHECK_TOLERANCE", 1e-12)
        assert run_cli("gradcheck", "--model", "bilstm", "--seed", "11") == 1
        captured = capsys.readouterr()
        assert "FAILED parameters" in captured.err


class TestStats:
    def test_reports_counts(self, workspace, capsys):
        assert run_cli("stats", "--data", str(workspace["data"])) == 0
        out = capsys.readouterr().out
        assert "sentences=60" in out
        assert "documents=" in out and "spans=" in out

    def test_parse_error_exits_3(self, tmp_path):
        bad = tmp_path / "bad.conll"
        bad.write_text("nonsense line\n")
        assert run_cli("stats", "--data", str(bad)) == 3


def test_env_seed_default(monkeypatch):
    monkeypatch.setenv("ARGBOUND_SEED", "77")
    from argbound.cli import default_seed

    assert default_seed() == 77
    monkeypatch.setenv("ARGBOUND_SEED", "junk")
    assert default_seed() == 0
