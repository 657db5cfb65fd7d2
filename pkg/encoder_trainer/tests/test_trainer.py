"""Smoke tests on a tiny randomly initialized local BERT — no network, no GPU."""

import json

import pytest

from encoder_trainer import TrainerConfig, TrainerError, train_encoder
from encoder_trainer.trainer import load_stage_file, main

LABELS = ("negative", "positive")

VOCAB = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + \
    [f"negativew{i:02d}" for i in range(10)] + \
    [f"positivew{i:02d}" for i in range(10)] + \
    [f"filler{i:02d}" for i in range(20)]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    from transformers import BertConfig, BertForSequenceClassification, BertTokenizerFast

    root = tmp_path_factory.mktemp("tiny_bert")
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizerFast(str(vocab_file), do_lower_case=True)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=32,
                        num_hidden_layers=2, num_attention_heads=2,
                        intermediate_size=64, max_position_embeddings=64,
                        num_labels=2)
    model = BertForSequenceClassification(config)
    model_dir = root / "model"
    model.save_pretrained(model_dir)
    tokenizer.save_pretrained(model_dir)
    return str(model_dir)


def write_stage(path, rows):
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    return str(path)


def synth_rows(prefix, n, start=0):
    rows = []
    for i in range(start, start + n):
        label = LABELS[i % 2]
        text = f"{label}w{i % 10:02d} filler{i % 20:02d} {label}w{(i + 3) % 10:02d}"
        rows.append({"id": f"{prefix}-{i:04d}", "text": text, "label": label})
    return rows


@pytest.fixture(scope="session")
def stage_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("stages")
    return {
        "stage1": write_stage(root / "train_stage1.jsonl", synth_rows("s1", 30)),
        "stage2": write_stage(root / "train_stage2.jsonl", synth_rows("s2", 20)),
        "eval": write_stage(root / "eval.jsonl", synth_rows("ev", 16, start=100)),
    }


class TestLoadStageFile:
    def test_valid(self, stage_files):
        rows = load_stage_file(stage_files["stage1"], LABELS)
        assert len(rows) == 30
        assert set(rows[0]) == {"id", "text", "label"}

    def test_missing_file(self):
        with pytest.raises(TrainerError, match="not found"):
            load_stage_file("/nonexistent.jsonl", LABELS)

    def test_missing_field(self, tmp_path):
        path = write_stage(tmp_path / "bad.jsonl", [{"id": "a", "text": "x"}])
        with pytest.raises(TrainerError, match="missing field label"):
            load_stage_file(path, LABELS)

    def test_unknown_label(self, tmp_path):
        path = write_stage(tmp_path / "bad.jsonl",
                           [{"id": "a", "text": "x", "label": "meh"}])
        with pytest.raises(TrainerError, match="unknown label"):
            load_stage_file(path, LABELS)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(TrainerError, match="line 1"):
            load_stage_file(str(path), LABELS)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(TrainerError, match="no records"):
            load_stage_file(str(path), LABELS)


class TestConfig:
    def test_no_stages(self):
        with pytest.raises(TrainerError):
            TrainerConfig("m", (), "e", "o")

    def test_duplicate_labels(self):
        with pytest.raises(TrainerError):
            TrainerConfig("m", ("s",), "e", "o", label_names=("x", "x"))

    def test_bad_epochs(self):
        with pytest.raises(TrainerError):
            TrainerConfig("m", ("s",), "e", "o", epochs_per_stage=0)


class TestTrainEncoder:
    def run(self, tiny_model_dir, stage_files, out_dir, stages=None, seed=7):
        config = TrainerConfig(
            model_name=tiny_model_dir,
            stage_files=tuple(stages or (stage_files["stage1"], stage_files["stage2"])),
            eval_file=stage_files["eval"],
            out_dir=str(out_dir),
            epochs_per_stage=1, batch_size=8, max_seq_len=16,
            seed=seed, device="cpu", save_checkpoint=False)
        return train_encoder(config)

    def test_smoke_predictions_schema_and_coverage(self, tiny_model_dir, stage_files, tmp_path):
        result = self.run(tiny_model_dir, stage_files, tmp_path / "out")
        lines = result.predictions_path.read_text().splitlines()
        eval_ids = {json.loads(l)["id"]
                    for l in open(stage_files["eval"]).read().splitlines()}
        seen = set()
        for line in lines:
            row = json.loads(line)
            assert set(row) == {"doc_id", "label", "score"}
            assert row["label"] in LABELS
            assert 0.0 <= row["score"] <= 1.0
            assert (row["label"] == "positive") == (row["score"] >= 0.5)
            seen.add(row["doc_id"])
        assert seen == eval_ids

    def test_manifest_contents(self, tiny_model_dir, stage_files, tmp_path):
        result = self.run(tiny_model_dir, stage_files, tmp_path / "out")
        manifest = json.loads(result.manifest_path.read_text())
        assert manifest["config"]["seed"] == 7
        assert manifest["stage_sizes"] == {"train_stage1.jsonl": 30,
                                           "train_stage2.jsonl": 20}
        assert manifest["eval_size"] == 16
        assert len(manifest["training_log"]) == 2  # 2 stages x 1 epoch
        assert "torch" in manifest["environment"]

    def test_stage_order_respected(self, tiny_model_dir, stage_files, tmp_path):
        fwd = self.run(tiny_model_dir, stage_files, tmp_path / "a")
        rev = self.run(tiny_model_dir, stage_files, tmp_path / "b",
                       stages=(stage_files["stage2"], stage_files["stage1"]))
        assert [s for s, _, _ in fwd.training_log] == \
            ["train_stage1.jsonl", "train_stage2.jsonl"]
        assert [s for s, _, _ in rev.training_log] == \
            ["train_stage2.jsonl", "train_stage1.jsonl"]

    def test_schema_error_before_training(self, tiny_model_dir, stage_files, tmp_path):
        bad = write_stage(tmp_path / "bad.jsonl", [{"id": "a", "text": "x"}])
        with pytest.raises(TrainerError, match="missing field"):
            self.run(tiny_model_dir, stage_files, tmp_path / "out",
                     stages=(stage_files["stage1"], bad))
        assert not (tmp_path / "out").exists()


class TestCli:
    def test_usage_error(self, capsys):
        assert main(["--model", "m"]) == 1

    def test_data_error(self, tmp_path, capsys):
        assert main(["--model", "m", "--stages", "/nonexistent.jsonl",
                     "--eval-file", "/nonexistent.jsonl", "--seed", "1",
                     "--out", str(tmp_path)]) == 2

    def test_end_to_end(self, tiny_model_dir, stage_files, tmp_path, capsys):
        rc = main(["--model", tiny_model_dir,
                   "--stages", stage_files["stage1"],
                   "--eval-file", stage_files["eval"],
                   "--epochs", "1", "--batch-size", "8", "--max-seq-len", "16",
                   "--seed", "3", "--device", "cpu", "--no-checkpoint",
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "predictions.jsonl").exists()
        assert (tmp_path / "out" / "trainer_manifest.json").exists()
