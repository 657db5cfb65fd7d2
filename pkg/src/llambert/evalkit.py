"""Metrics, agreement, seed confidence intervals, sweep reports, and the
blind error-annotation workflow."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from scipy import stats

from .rng import SplitMix64

HUMAN_SENTIMENTS = ("positive", "negative", "mixed")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    n: int
    accuracy: float
    confusion: tuple  # 2x2 counts, rows = gold, cols = predicted; index 1 = positive
    label_names: tuple
    discard_count: int = 0
    manifest_ref: str = ""

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "confusion": [list(row) for row in self.confusion],
            "confusion_orientation": "rows=gold, cols=predicted",
            "label_names": list(self.label_names),
            "discard_count": self.discard_count,
            "manifest_ref": self.manifest_ref,
        }


@dataclass(frozen=True)
class SeedInterval:
    mean: float
    half_width: float
    n_seeds: int
    values: tuple

    def render(self, digits: int = 2) -> str:
        return f"{self.mean:.{digits}f} (±{self.half_width:.{digits}f})"


@dataclass(frozen=True)
class HumanAnnotation:
    doc_id: str
    sentiment: str

    def __post_init__(self):
        if self.sentiment not in HUMAN_SENTIMENTS:
            raise EvalError(f"sentiment must be one of {HUMAN_SENTIMENTS}, "
                            f"got {self.sentiment!r}")


def evaluate(predictions: Iterable, gold: dict, label_names,
             discard_count: int = 0, manifest_ref: str = "") -> MetricsReport:
    """Exact accuracy and 2x2 confusion over predictions vs a doc_id->label
    gold map."""
    label_names = tuple(label_names)
    index = {label_names[0]: 0, label_names[1]: 1}
    confusion = [[0, 0], [0, 0]]
    n = 0
    for pred in predictions:
        if pred.doc_id not in gold:
            raise EvalError(f"no gold label for predicted doc {pred.doc_id!r}")
        g = gold[pred.doc_id]
        if g not in index or pred.label not in index:
            raise EvalError(f"label outside {label_names}: gold={g!r} pred={pred.label!r}")
        confusion[index[g]][index[pred.label]] += 1
        n += 1
    if n == 0:
        raise EvalError("no predictions to evaluate")
    accuracy = (confusion[0][0] + confusion[1][1]) / n
    return MetricsReport(
        n=n,
        accuracy=accuracy,
        confusion=(tuple(confusion[0]), tuple(confusion[1])),
        label_names=label_names,
        discard_count=discard_count,
        manifest_ref=manifest_ref,
    )


def agreement(labels_a: dict, labels_b: dict):
    """Disagreement rate over the id intersection of two doc_id->label maps.

    Returns (disagreement_rate, intersection_size); symmetric in a/b.
    """
    common = set(labels_a) & set(labels_b)
    if not common:
        raise EvalError("label sets have no ids in common")
    differ = sum(1 for i in common if labels_a[i] != labels_b[i])
    return differ / len(common), len(common)


def ci_over_seeds(values) -> SeedInterval:
    """Two-sided 95% Student-t interval over per-seed metric values."""
    values = tuple(float(v) for v in values)
    n = len(values)
    if n < 2:
        raise EvalError(f"need at least 2 seed values, got {n}")
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    s = math.sqrt(var)
    if s == 0.0:
        half = 0.0
    else:
        half = float(stats.t.ppf(0.975, n - 1)) * s / math.sqrt(n)
    return SeedInterval(mean=mean, half_width=half, n_seeds=n, values=values)


def sample_errors(predictions: Iterable, gold: dict, n: int, seed: int,
                  texts: Optional[dict] = None, export_path=None):
    """Seeded sample (without replacement) of up to n ids where the
    prediction disagrees with gold; optionally export a blind CSV of
    (doc_id, text) for human annotation."""
    wrong = sorted(p.doc_id for p in predictions
                   if p.doc_id in gold and p.label != gold[p.doc_id])
    take = min(n, len(wrong))
    sampled = sorted(SplitMix64(seed).sample(wrong, take))
    if export_path is not None:
        if texts is None:
            raise EvalError("texts map required to export the blind CSV")
        with open(export_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["doc_id", "text"])
            for doc_id in sampled:
                writer.writerow([doc_id, texts[doc_id]])
    return sampled


def load_human_annotations(path) -> list[HumanAnnotation]:
    """Read human_annotations.csv with columns doc_id, sentiment."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(HumanAnnotation(doc_id=row["doc_id"], sentiment=row["sentiment"].strip()))
    return out


def crosstab_human(annotations: Iterable[HumanAnnotation], predictions: Iterable):
    """2x3 table: rows = model output (positive, negative), columns = human
    sentiment (positive, negative, mixed)."""
    pred_by_id = {p.doc_id: p.label for p in predictions}
    table = [[0, 0, 0], [0, 0, 0]]
    for ann in annotations:
        if ann.doc_id not in pred_by_id:
            raise EvalError(f"no prediction for annotated doc {ann.doc_id!r}")
        model_label = pred_by_id[ann.doc_id]
        row = 0 if model_label == "positive" else 1
        table[row][HUMAN_SENTIMENTS.index(ann.sentiment)] += 1
    return (tuple(table[0]), tuple(table[1]))


def render_crosstab(table) -> str:
    lines = ["model      " + "  ".join(f"{c:>8}" for c in HUMAN_SENTIMENTS)]
    for name, row in zip(("positive", "negative"), table):
        lines.append(f"{name:<10} " + "  ".join(f"{v:>8}" for v in row))
    return "\n".join(lines)


def sweep_report(points, csv_path=None):
    """Sort (x, MetricsReport) points, reject duplicate x, and render the
    x/accuracy/n CSV used for plotting."""
    points = sorted(points, key=lambda p: p[0])
    xs = [x for x, _ in points]
    if len(set(xs)) != len(xs):
        raise EvalError(f"duplicate x values in sweep: {xs}")
    rows = [(x, report.accuracy, report.n) for x, report in points]
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "accuracy", "n"])
            for x, acc, n in rows:
                writer.writerow([x, f"{acc:.6f}", n])
    return rows


def save_report(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def load_report(path) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return MetricsReport(
        n=obj["n"],
        accuracy=obj["accuracy"],
        confusion=tuple(tuple(row) for row in obj["confusion"]),
        label_names=tuple(obj["label_names"]),
        discard_count=obj.get("discard_count", 0),
        manifest_ref=obj.get("manifest_ref", ""),
    )
