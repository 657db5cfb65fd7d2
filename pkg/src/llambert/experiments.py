"""Sweep orchestration: retrain the native classifier from scratch per
grid point (and per seed) and aggregate accuracies for plotting."""

from __future__ import annotations

from .classifier import Hyper, predict, train
from .datasets import StageRecord, inject_noise, size_sweep
from .evalkit import MetricsReport, evaluate
from .rng import subseed


def rows_to_records(rows, source: str = "gold") -> list[StageRecord]:
    return [StageRecord(row["id"], row["label"], source) for row in rows]


def _train_eval(records, texts, eval_rows, label_names, hyper, seed) -> MetricsReport:
    stage = [(texts[r.doc_id], r.label) for r in records]
    model = train([stage], label_names, hyper, seed)
    preds = predict(model, [(row["id"], row["text"]) for row in eval_rows])
    gold = {row["id"]: row["label"] for row in eval_rows}
    return evaluate(preds, gold, label_names)


def _aggregate(reports, label_names) -> MetricsReport:
    confusion = [[0, 0], [0, 0]]
    n = 0
    for rep in reports:
        for i in range(2):
            for j in range(2):
                confusion[i][j] += rep.confusion[i][j]
        n += rep.n
    accuracy = (confusion[0][0] + confusion[1][1]) / n
    return MetricsReport(n=n, accuracy=accuracy,
                         confusion=(tuple(confusion[0]), tuple(confusion[1])),
                         label_names=tuple(label_names))


def run_noise_sweep(stage_rows, eval_rows, label_names, fractions, n_seeds: int,
                    base_seed: int, hyper: Hyper = Hyper()):
    """Accuracy vs injected-noise fraction; each point retrains from scratch
    for each seed. Returns [(fraction, aggregated MetricsReport, per-seed
    accuracies)]."""
    texts = {row["id"]: row["text"] for row in stage_rows}
    records = rows_to_records(stage_rows)
    out = []
    for fraction in fractions:
        reports = []
        for s in range(n_seeds):
            noisy = inject_noise(records, fraction, subseed(base_seed, "noise", fraction, s),
                                 label_names)
            reports.append(_train_eval(noisy, texts, eval_rows, label_names, hyper,
                                       subseed(base_seed, "train", fraction, s)))
        out.append((fraction, _aggregate(reports, label_names),
                    [r.accuracy for r in reports]))
    return out


def run_size_sweep(stage_rows, eval_rows, label_names, sizes, n_seeds: int,
                   base_seed: int, hyper: Hyper = Hyper()):
    """Accuracy vs training-set size over nested seeded subsets."""
    texts = {row["id"]: row["text"] for row in stage_rows}
    records = rows_to_records(stage_rows)
    per_size = {s: [] for s in sizes}
    for s in range(n_seeds):
        subsets = size_sweep(records, sizes, subseed(base_seed, "size", s))
        for size, subset in subsets:
            per_size[size].append(
                _train_eval(subset, texts, eval_rows, label_names, hyper,
                            subseed(base_seed, "train", size, s))
            )
    return [(size, _aggregate(per_size[size], label_names),
             [r.accuracy for r in per_size[size]]) for size in sizes]
