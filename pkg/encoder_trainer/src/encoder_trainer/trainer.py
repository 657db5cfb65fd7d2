"""Sequential-stage ("curriculum") fine-tuning of a transformer encoder.

Reads stage files (train_stage1.jsonl, train_stage2.jsonl, ...) and an eval
file, each a JSONL of {"id", "text", "label"} records, fine-tunes one
checkpoint over the stages in the listed order, and writes predictions on the
eval file in the standard predictions.jsonl schema:

    {"doc_id": ..., "label": ..., "score": ...}

where score is the probability of the positive class (index 1 of
label_names). A trainer_manifest.json captures the config and environment so
runs can be audited. Stage files are schema-validated before any training
starts.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path


class TrainerError(Exception):
    """Raised for config or stage-file contract violations."""


@dataclass(frozen=True)
class TrainerConfig:
    model_name: str
    stage_files: tuple[str, ...]
    eval_file: str
    out_dir: str
    label_names: tuple[str, str] = ("negative", "positive")
    epochs_per_stage: int = 5
    batch_size: int = 16
    learning_rate: float = 2e-5
    max_seq_len: int = 256
    seed: int = 0
    device: str = "auto"
    save_checkpoint: bool = True

    def __post_init__(self):
        if not self.stage_files:
            raise TrainerError("at least one stage file is required")
        if len(self.label_names) != 2 or self.label_names[0] == self.label_names[1]:
            raise TrainerError("label_names must be two distinct labels")
        for f in ("epochs_per_stage", "batch_size"):
            if getattr(self, f) < 1:
                raise TrainerError(f"{f} must be >= 1")

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class TrainerResult:
    predictions_path: Path
    manifest_path: Path
    checkpoint_dir: Path | None
    # (stage name, epoch, mean loss) in training order
    training_log: list[tuple[str, int, float]] = field(default_factory=list)


def load_stage_file(path, label_names) -> list[dict]:
    """Read one JSONL stage/eval file, enforcing the exported-file contract."""
    path = Path(path)
    if not path.exists():
        raise TrainerError(f"stage file not found: {path}")
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TrainerError(f"{path}: line {lineno}: invalid JSON") from exc
            for key in ("id", "text", "label"):
                if key not in row:
                    raise TrainerError(f"{path}: line {lineno}: missing field {key}")
            if row["label"] not in label_names:
                raise TrainerError(
                    f"{path}: line {lineno}: unknown label {row['label']!r}")
            rows.append({"id": str(row["id"]), "text": str(row["text"]),
                         "label": row["label"]})
    if not rows:
        raise TrainerError(f"{path}: no records")
    return rows


def _pick_device(name: str):
    import torch

    if name != "auto":
        return torch.device(name)
    return torch.device("cuda" if torch.cuda.is_available() else "cpu")


def _batches(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def train_encoder(config: TrainerConfig) -> TrainerResult:
    # Validate every input file before touching the model (fail fast).
    stages = [(Path(p).name, load_stage_file(p, config.label_names))
              for p in config.stage_files]
    eval_rows = load_stage_file(config.eval_file, config.label_names)

    import torch
    from torch.optim import AdamW
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    torch.manual_seed(config.seed)
    device = _pick_device(config.device)
    label_to_id = {name: i for i, name in enumerate(config.label_names)}

    tokenizer = AutoTokenizer.from_pretrained(config.model_name)
    model = AutoModelForSequenceClassification.from_pretrained(
        config.model_name,
        num_labels=2,
        id2label={i: n for n, i in label_to_id.items()},
        label2id=dict(label_to_id),
    )
    model.to(device)
    optimizer = AdamW(model.parameters(), lr=config.learning_rate)

    def encode(rows):
        enc = tokenizer([r["text"] for r in rows], truncation=True,
                        max_length=config.max_seq_len, padding=True,
                        return_tensors="pt")
        return {k: v.to(device) for k, v in enc.items()}

    log: list[tuple[str, int, float]] = []
    generator = torch.Generator().manual_seed(config.seed)
    model.train()
    for stage_name, rows in stages:
        for epoch in range(1, config.epochs_per_stage + 1):
            order = torch.randperm(len(rows), generator=generator).tolist()
            shuffled = [rows[i] for i in order]
            total, n_batches = 0.0, 0
            for batch in _batches(shuffled, config.batch_size):
                inputs = encode(batch)
                labels = torch.tensor([label_to_id[r["label"]] for r in batch],
                                      device=device)
                out = model(**inputs, labels=labels)
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()
                total += float(out.loss.detach())
                n_batches += 1
            log.append((stage_name, epoch, total / n_batches))

    model.eval()
    predictions = []
    with torch.no_grad():
        for batch in _batches(eval_rows, config.batch_size):
            logits = model(**encode(batch)).logits
            scores = torch.softmax(logits, dim=-1)[:, 1].tolist()
            for row, score in zip(batch, scores):
                label = config.label_names[1] if score >= 0.5 else config.label_names[0]
                predictions.append({"doc_id": row["id"], "label": label,
                                    "score": score})

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pred_path = out_dir / "predictions.jsonl"
    with open(pred_path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p) + "\n")

    checkpoint_dir = None
    if config.save_checkpoint:
        checkpoint_dir = out_dir / "checkpoint"
        model.save_pretrained(checkpoint_dir)
        tokenizer.save_pretrained(checkpoint_dir)

    import transformers

    manifest_path = out_dir / "trainer_manifest.json"
    manifest = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "config": config.to_dict(),
        "stage_sizes": {name: len(rows) for name, rows in stages},
        "eval_size": len(eval_rows),
        "training_log": [{"stage": s, "epoch": e, "mean_loss": l}
                         for s, e, l in log],
        "environment": {
            "python": platform.python_version(),
            "torch": torch.__version__,
            "transformers": transformers.__version__,
            "device": str(device),
        },
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    return TrainerResult(pred_path, manifest_path, checkpoint_dir, log)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="encoder-trainer",
        description="Fine-tune a transformer encoder on exported stage files.")
    ap.add_argument("--model", required=True, help="model name or local path")
    ap.add_argument("--stages", nargs="+", required=True,
                    help="stage files, trained in the listed order")
    ap.add_argument("--eval-file", required=True)
    ap.add_argument("--labels", default="negative,positive",
                    help="comma-separated label names; second is positive")
    ap.add_argument("--epochs", type=int, default=5)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--lr", type=float, default=2e-5)
    ap.add_argument("--max-seq-len", type=int, default=256)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--device", default="auto")
    ap.add_argument("--no-checkpoint", action="store_true")
    ap.add_argument("--out", required=True)
    try:
        args = ap.parse_args(argv)
    except SystemExit:
        return 1
    labels = tuple(args.labels.split(","))
    try:
        config = TrainerConfig(
            model_name=args.model, stage_files=tuple(args.stages),
            eval_file=args.eval_file, out_dir=args.out, label_names=labels,
            epochs_per_stage=args.epochs, batch_size=args.batch_size,
            learning_rate=args.lr, max_seq_len=args.max_seq_len,
            seed=args.seed, device=args.device,
            save_checkpoint=not args.no_checkpoint)
        result = train_encoder(config)
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.predictions_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
