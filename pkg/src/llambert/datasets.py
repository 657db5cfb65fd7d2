"""Turn label sets into training plans, inject label noise, and build
nested subset sweeps.

A TrainingPlan is an ordered curriculum: each stage is a list of
(doc_id, label, source) records, trained in order on one shared weight
vector. Stage files exported here are the contract consumed by both the
native classifier and the external encoder trainer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from .annotate import LabelSet
from .corpus import Corpus
from .rng import SplitMix64


class DatasetError(ValueError):
    pass


class Strategy(str, Enum):
    BASELINE = "baseline"
    LLAMBERT_TRAIN = "llambert_train"
    LLAMBERT_TRAIN_EXTRA = "llambert_train_extra"
    COMBINED = "combined_extra_then_train"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        for s in cls:
            if s.value == name:
                return s
        raise DatasetError(f"unknown strategy {name!r}; choose from "
                           f"{[s.value for s in cls]}")


@dataclass(frozen=True)
class StageRecord:
    doc_id: str
    label: str
    source: str


@dataclass(frozen=True)
class TrainingPlan:
    stages: tuple  # (stage_name, tuple of StageRecord)
    eval_split: str

    def stage_sizes(self) -> list[int]:
        return [len(records) for _, records in self.stages]


def _gold_records(corpus: Corpus, split: str) -> list[StageRecord]:
    return [
        StageRecord(i, corpus[i].gold_label, "gold")
        for i in corpus.split_ids(split)
        if corpus[i].gold_label is not None
    ]


def _llm_records(labels: Optional[LabelSet], corpus: Corpus, split: str) -> list[StageRecord]:
    if labels is None:
        return []
    out = []
    for doc_id in sorted(labels.records):
        doc = corpus.get(doc_id)
        if doc is not None and doc.split == split:
            rec = labels.records[doc_id]
            out.append(StageRecord(doc_id, rec.label, rec.source))
    return out


def _guard_leakage(records: list[StageRecord], corpus: Corpus, eval_split: str) -> list[StageRecord]:
    kept = []
    for rec in records:
        doc = corpus.get(rec.doc_id)
        if doc is not None and doc.split == eval_split:
            continue  # never train on eval documents
        kept.append(rec)
    return kept


def build_plan(strategy: Strategy, corpus: Corpus, gold_labels: Optional[LabelSet] = None,
               llm_labels: Optional[LabelSet] = None, eval_split: str = "test") -> TrainingPlan:
    """Materialize one of the four training strategies.

    baseline: gold(train). llambert_train: llm(train).
    llambert_train_extra: llm(train) + llm(extra).
    combined_extra_then_train: stage 1 llm(extra), stage 2 gold(train).
    Documents discarded by the parser simply never appear in llm_labels.
    """
    strategy = Strategy.parse(strategy) if isinstance(strategy, str) else strategy
    if gold_labels is not None:
        gold_train = [
            StageRecord(i, gold_labels.records[i].label, "gold")
            for i in sorted(gold_labels.records)
        ]
    else:
        gold_train = _gold_records(corpus, "train")

    def need(records, what):
        if not records:
            raise DatasetError(f"strategy {strategy.value!r} needs {what}, got 0 records")
        return records

    if strategy is Strategy.BASELINE:
        stages = [("gold_train", need(gold_train, "gold labels on train"))]
    elif strategy is Strategy.LLAMBERT_TRAIN:
        stages = [("llm_train", need(_llm_records(llm_labels, corpus, "train"),
                                     "llm labels on train"))]
    elif strategy is Strategy.LLAMBERT_TRAIN_EXTRA:
        merged = _llm_records(llm_labels, corpus, "train") + _llm_records(llm_labels, corpus, "extra")
        stages = [("llm_train_extra", need(merged, "llm labels on train/extra"))]
    else:  # COMBINED
        stages = [
            ("llm_extra", need(_llm_records(llm_labels, corpus, "extra"), "llm labels on extra")),
            ("gold_train", need(gold_train, "gold labels on train")),
        ]

    guarded = []
    for name, records in stages:
        records = _guard_leakage(records, corpus, eval_split)
        seen = set()
        unique = []
        for rec in records:
            if rec.doc_id not in seen:
                seen.add(rec.doc_id)
                unique.append(rec)
        if not unique:
            raise DatasetError(f"stage {name!r} is empty after leakage filtering")
        guarded.append((name, tuple(unique)))
    return TrainingPlan(stages=tuple(guarded), eval_split=eval_split)


def _round_half_away(x: float) -> int:
    return int(x + 0.5) if x >= 0 else -int(-x + 0.5)


def inject_noise(records, fraction: float, seed: int, label_names) -> list[StageRecord]:
    """Flip exactly round(fraction * n) labels, selected without replacement;
    flipped records get source "noise". Everything else is untouched,
    including order."""
    if not (0.0 <= fraction <= 1.0):
        raise DatasetError(f"fraction must be in [0, 1], got {fraction}")
    records = list(records)
    n = len(records)
    k = _round_half_away(fraction * n)
    rng = SplitMix64(seed)
    flip = set(rng.sample(list(range(n)), k))
    a, b = label_names
    out = []
    for i, rec in enumerate(records):
        if i in flip:
            out.append(StageRecord(rec.doc_id, b if rec.label == a else a, "noise"))
        else:
            out.append(rec)
    return out


def size_sweep(records, sizes, seed: int):
    """Nested seeded subsets: one shared shuffle, each size is a prefix, so
    subset(s1) is contained in subset(s2) whenever s1 < s2. Subsets keep the
    original record order."""
    records = list(records)
    n = len(records)
    for prev, cur in zip(sizes, sizes[1:]):
        if cur <= prev:
            raise DatasetError(f"sizes must be strictly increasing, got {list(sizes)}")
    for s in sizes:
        if s > n:
            raise DatasetError(f"size {s} exceeds stage size {n}")
        if s < 0:
            raise DatasetError(f"size {s} is negative")
    perm = list(range(n))
    SplitMix64(seed).shuffle(perm)
    out = []
    for s in sizes:
        chosen = sorted(perm[:s])
        out.append((s, [records[i] for i in chosen]))
    return out


DEFAULT_SIZE_GRID = (500, 1000, 2500, 5000, 10000, 25000)


def default_size_grid(n: int) -> list[int]:
    grid = [s for s in DEFAULT_SIZE_GRID if s < n]
    grid.append(n)
    return grid


def export_stage(records, corpus: Corpus, path) -> None:
    """Write one stage file: {"id","text","label"} per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            doc = corpus.get(rec.doc_id)
            if doc is None:
                raise DatasetError(f"stage references unknown doc {rec.doc_id!r}")
            fh.write(json.dumps({"id": rec.doc_id, "text": doc.text, "label": rec.label},
                                ensure_ascii=False) + "\n")


def export_plan(plan: TrainingPlan, corpus: Corpus, out_dir) -> list[str]:
    """Write train_stage1.jsonl[, train_stage2.jsonl] and eval.jsonl (gold
    labels of the eval split). Returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, (_, records) in enumerate(plan.stages, start=1):
        path = out / f"train_stage{i}.jsonl"
        export_stage(records, corpus, path)
        written.append(str(path))
    eval_path = out / "eval.jsonl"
    eval_records = _gold_records(corpus, plan.eval_split)
    export_stage(eval_records, corpus, eval_path)
    written.append(str(eval_path))
    return written


def load_stage(path) -> list[dict]:
    """Read a stage file back as a list of {"id","text","label"} dicts."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            for key in ("id", "text", "label"):
                if key not in obj:
                    raise DatasetError(f"{path} line {lineno}: missing field {key}")
            out.append(obj)
    return out
