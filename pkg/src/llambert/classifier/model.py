"""The native classifier: hashed unigram+bigram counts into a logistic
regression trained by mini-batch SGD, one shared weight vector across
curriculum stages.

Features are hashed with 64-bit FNV-1a XOR-folded to d bits; the bias lives
at the reserved index 2^d, so weight vectors have 2^d + 1 entries.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..datasets import TrainingPlan, load_stage
from ..rng import SplitMix64, subseed
from ._backend import KERNEL_BACKEND, kernels

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

MODEL_VERSION = 1

BIAS_VALUE = 1.0


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    indices: np.ndarray  # int64, unique, sorted; includes the bias index 2^d
    values: np.ndarray  # float64 counts
    d: int


@dataclass(frozen=True)
class Hyper:
    d: int = 18
    learning_rate: float = 0.1
    l2: float = 1e-6
    epochs: int = 5
    batch_size: int = 16

    def __post_init__(self):
        if not (10 <= self.d <= 26):
            raise ClassifierError(f"d must be in [10, 26], got {self.d}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ClassifierError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {"d": self.d, "learning_rate": self.learning_rate, "l2": self.l2,
                "epochs": self.epochs, "batch_size": self.batch_size}


@dataclass
class LinearModel:
    weights: np.ndarray  # float64, length 2^d + 1
    hyper: Hyper
    label_names: tuple
    seed: int
    training_log: list = field(default_factory=list)  # (stage, epoch, mean loss)

    @property
    def d(self) -> int:
        return self.hyper.d


@dataclass(frozen=True)
class Prediction:
    doc_id: str
    label: str
    score: float  # positive-class probability; label is positive iff score >= 0.5


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def featurize(text: str, d: int) -> FeatureVector:
    """Hash unigram and bigram counts to [0, 2^d); always includes the bias
    feature, so even empty text yields a usable vector."""
    toks = tokenize(text)
    keys = [t.encode("utf-8") for t in toks]
    keys += [f"{a} {b}".encode("utf-8") for a, b in zip(toks, toks[1:])]
    bias_index = 1 << d
    if not keys:
        return FeatureVector(
            indices=np.array([bias_index], dtype=np.int64),
            values=np.array([BIAS_VALUE], dtype=np.float64),
            d=d,
        )
    hashed = kernels.hash_tokens(keys, d)
    idx, counts = np.unique(hashed, return_counts=True)
    indices = np.append(idx, bias_index)
    values = np.append(counts.astype(np.float64), BIAS_VALUE)
    return FeatureVector(indices=indices, values=values, d=d)


def build_csr(vectors: Iterable[FeatureVector]):
    """Pack feature vectors into CSR arrays (indptr, indices, values)."""
    vectors = list(vectors)
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for i, v in enumerate(vectors):
        indptr[i + 1] = indptr[i] + len(v.indices)
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.empty(0, np.int64)
    values = np.concatenate([v.values for v in vectors]) if vectors else np.empty(0, np.float64)
    return indptr, indices.astype(np.int64), values.astype(np.float64)


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_and_grad(model: LinearModel, batch: list):
    """Mean log loss plus (l2/2)|w|^2 over the touched coordinates, and the
    sparse gradient over those coordinates.

    batch: list of (FeatureVector, y) with y in {0.0, 1.0}.
    Returns (loss, (indices, grad_values)).
    """
    if not batch:
        raise ClassifierError("batch must be non-empty")
    w = model.weights
    l2 = model.hyper.l2
    n = len(batch)
    touched = np.unique(np.concatenate([fv.indices for fv, _ in batch]))
    pos_of = {int(j): k for k, j in enumerate(touched)}
    grad = np.zeros(len(touched), dtype=np.float64)
    loss = 0.0
    for fv, y in batch:
        z = float(w[fv.indices] @ fv.values)
        loss += float(np.logaddexp(0.0, z) - y * z)
        p = float(_stable_sigmoid(np.array([z]))[0])
        g = (p - y) / n
        for j, v in zip(fv.indices, fv.values):
            grad[pos_of[int(j)]] += g * v
    loss = loss / n + 0.5 * l2 * float(w[touched] @ w[touched])
    grad += l2 * w[touched]
    if not np.isfinite(loss):
        raise ClassifierError("non-finite loss (divergence)")
    return loss, (touched, grad)


def train(stages: list, label_names, hyper: Hyper, seed: int,
          stage_names: Optional[list] = None) -> LinearModel:
    """Train over ordered stages of (text, label) pairs on one shared weight
    vector; the learning-rate schedule restarts per stage, mirroring one
    fine-tuning run per stage.
    """
    if not stages or any(not stage for stage in stages):
        raise ClassifierError("every stage must be non-empty")
    label_names = tuple(label_names)
    positive = label_names[1]
    if stage_names is None:
        stage_names = [f"stage{i}" for i in range(1, len(stages) + 1)]
    w = np.zeros((1 << hyper.d) + 1, dtype=np.float64)
    model = LinearModel(weights=w, hyper=hyper, label_names=label_names, seed=seed)
    for s_i, (stage_name, stage) in enumerate(zip(stage_names, stages), start=1):
        vectors = [featurize(text, hyper.d) for text, _ in stage]
        indptr, indices, values = build_csr(vectors)
        labels = np.array([1.0 if lab == positive else 0.0 for _, lab in stage])
        step = 0
        for epoch in range(1, hyper.epochs + 1):
            order = list(range(len(stage)))
            SplitMix64(subseed(seed, "epoch", s_i, epoch)).shuffle(order)
            order = np.array(order, dtype=np.int64)
            loss_sum, steps = kernels.sgd_epoch(
                w, indptr, indices, values, labels, order,
                hyper.learning_rate, hyper.l2, hyper.batch_size, step,
            )
            step += steps
            mean_loss = loss_sum / len(stage)
            if not np.isfinite(mean_loss):
                raise ClassifierError(
                    f"training diverged (non-finite loss) at stage {stage_name!r} epoch {epoch}"
                )
            model.training_log.append((stage_name, epoch, mean_loss))
    return model


def train_plan(plan: TrainingPlan, corpus, hyper: Hyper, seed: int) -> LinearModel:
    stages = []
    names = []
    for name, records in plan.stages:
        names.append(name)
        stages.append([(corpus[r.doc_id].text, r.label) for r in records])
    return train(stages, corpus.label_names, hyper, seed, stage_names=names)


def train_files(stage_paths: list, label_names, hyper: Hyper, seed: int) -> LinearModel:
    stages = []
    for path in stage_paths:
        rows = load_stage(path)
        stages.append([(row["text"], row["label"]) for row in rows])
    return train(stages, label_names, hyper, seed)


def predict(model: LinearModel, docs: Iterable) -> list[Prediction]:
    """One prediction per (doc_id, text) pair (Document objects also work);
    pure and order-preserving."""
    pairs = []
    for doc in docs:
        if hasattr(doc, "id"):
            pairs.append((doc.id, doc.text))
        else:
            pairs.append((doc[0], doc[1]))
    vectors = [featurize(text, model.d) for _, text in pairs]
    indptr, indices, values = build_csr(vectors)
    scores = kernels.predict_scores(model.weights, indptr, indices, values)
    out = []
    for (doc_id, _), score in zip(pairs, scores):
        label = model.label_names[1] if score >= 0.5 else model.label_names[0]
        out.append(Prediction(doc_id=doc_id, label=label, score=float(score)))
    return out


def save_model(model: LinearModel, path) -> None:
    meta = {
        "format": "llambert-model",
        "version": MODEL_VERSION,
        "hyper": model.hyper.to_dict(),
        "label_names": list(model.label_names),
        "seed": model.seed,
        "training_log": [[s, e, loss] for s, e, loss in model.training_log],
        "kernel_backend": KERNEL_BACKEND,
    }
    np.savez_compressed(path, weights=model.weights, meta=np.array(json.dumps(meta)))


def load_model(path) -> LinearModel:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    if meta.get("format") != "llambert-model" or meta.get("version") != MODEL_VERSION:
        raise ClassifierError(f"unsupported model file (meta={meta.get('format')!r} "
                              f"v{meta.get('version')!r})")
    return LinearModel(
        weights=data["weights"],
        hyper=Hyper(**meta["hyper"]),
        label_names=tuple(meta["label_names"]),
        seed=meta["seed"],
        training_log=[(s, e, loss) for s, e, loss in meta["training_log"]],
    )
