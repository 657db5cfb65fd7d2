"""Corpus ingestion, persistence, and deterministic sampling.

Canonical on-disk form is JSONL: a header line with task metadata followed by
one document per line. The IMDb directory layout and the UMLS TSV export are
ingested into the same in-memory Corpus.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .rng import SplitMix64

SPLITS = ("train", "test", "extra", "unsplit")

CORPUS_FORMAT = "llambert-corpus"
CORPUS_VERSION = 1


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    split: str = "unsplit"
    gold_label: Optional[str] = None
    synonyms: Optional[tuple] = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if not self.text.strip():
            raise CorpusError(f"document {self.id!r}: text empty after trim")
        if self.split not in SPLITS:
            raise CorpusError(f"document {self.id!r}: unknown split {self.split!r}")


class Corpus:
    """Immutable keyed collection of documents for one labeling task."""

    def __init__(self, task_id: str, label_names, documents: Iterable[Document] = ()):
        label_names = tuple(label_names)
        if len(label_names) != 2 or label_names[0] == label_names[1]:
            raise CorpusError(f"label_names must be two distinct names, got {label_names!r}")
        self.task_id = task_id
        self.label_names = label_names  # index 1 is the positive class
        self._docs: dict[str, Document] = {}
        for doc in documents:
            self._add(doc)

    def _add(self, doc: Document) -> None:
        if doc.id in self._docs:
            raise CorpusError(f"duplicate document id {doc.id!r}")
        if doc.gold_label is not None and doc.gold_label not in self.label_names:
            raise CorpusError(
                f"document {doc.id!r}: gold_label {doc.gold_label!r} not in {self.label_names}"
            )
        self._docs[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def get(self, doc_id: str) -> Optional[Document]:
        return self._docs.get(doc_id)

    def ids(self) -> list[str]:
        return sorted(self._docs)

    def documents(self) -> list[Document]:
        return [self._docs[i] for i in self.ids()]

    def split_ids(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise CorpusError(f"unknown split {split!r}")
        return sorted(i for i, d in self._docs.items() if d.split == split)

    def split_sizes(self) -> dict[str, int]:
        sizes = {s: 0 for s in SPLITS}
        for d in self._docs.values():
            sizes[d.split] += 1
        return sizes

    @property
    def positive_label(self) -> str:
        return self.label_names[1]

    @property
    def negative_label(self) -> str:
        return self.label_names[0]

    def opposite(self, label: str) -> str:
        if label == self.label_names[0]:
            return self.label_names[1]
        if label == self.label_names[1]:
            return self.label_names[0]
        raise CorpusError(f"label {label!r} not in {self.label_names}")


def _doc_from_obj(obj: dict, lineno: int) -> Document:
    for key in ("id", "text"):
        if key not in obj:
            raise CorpusError(f"line {lineno}: missing field {key}")
    split = obj.get("split", "unsplit")
    if split not in SPLITS:
        raise CorpusError(f"line {lineno}: unknown split {split!r}")
    synonyms = obj.get("synonyms")
    return Document(
        id=obj["id"],
        text=obj["text"],
        split=split,
        gold_label=obj.get("gold_label"),
        synonyms=tuple(synonyms) if synonyms is not None else None,
    )


def ingest_jsonl(path, task_id: str, label_names) -> Corpus:
    """Read a header-less JSONL file of documents into a Corpus."""
    corpus = Corpus(task_id, label_names)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            try:
                corpus._add(_doc_from_obj(obj, lineno))
            except CorpusError as exc:
                if "duplicate" in str(exc):
                    raise CorpusError(f"line {lineno}: {exc}") from exc
                raise
    return corpus


_IMDB_LEAVES = {
    ("train", "pos"): ("train", "positive"),
    ("train", "neg"): ("train", "negative"),
    ("test", "pos"): ("test", "positive"),
    ("test", "neg"): ("test", "negative"),
    ("train", "unsup"): ("extra", None),
}


def ingest_imdb_dir(root) -> Corpus:
    """Map the standard IMDb review directory tree to a Corpus.

    train/pos and train/neg become gold-labeled train docs, test/* the test
    split, and train/unsup the unlabeled "extra" split. Ids are the file paths
    relative to the root so they stay unique and stable.
    """
    root = Path(root)
    docs = []
    found_any = False
    for (d1, d2), (split, gold) in _IMDB_LEAVES.items():
        leaf = root / d1 / d2
        if not leaf.is_dir():
            continue
        found_any = True
        for name in sorted(os.listdir(leaf)):
            path = leaf / name
            if not path.is_file():
                continue
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise CorpusError(f"unreadable file {path}") from exc
            docs.append(
                Document(id=f"{d1}/{d2}/{name}", text=text, split=split, gold_label=gold)
            )
    if not found_any:
        raise CorpusError(f"{root} contains none of the IMDb leaf directories")
    return Corpus("imdb", ("negative", "positive"), docs)


def ingest_umls_tsv(path, split: str = "test") -> Corpus:
    """Read a UMLS concept export: concept_id <TAB> preferred term <TAB>
    ;-separated synonyms [<TAB> yes/no gold label]."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise CorpusError(f"line {lineno}: expected at least 2 tab-separated columns")
            concept_id, term = cols[0], cols[1]
            synonyms = tuple(s for s in cols[2].split(";") if s) if len(cols) > 2 else ()
            gold = None
            if len(cols) > 3 and cols[3].strip():
                gold = cols[3].strip().lower()
                if gold not in ("yes", "no"):
                    raise CorpusError(f"line {lineno}: gold label must be yes/no, got {cols[3]!r}")
            docs.append(
                Document(id=concept_id, text=term, split=split, gold_label=gold, synonyms=synonyms)
            )
    return Corpus("umls", ("no", "yes"), docs)


def sample_subset(corpus: Corpus, split: str, n: int, seed: int) -> list[str]:
    """n distinct ids from a split, seeded, returned in ascending id order."""
    ids = corpus.split_ids(split)
    if n < 0 or n > len(ids):
        raise CorpusError(f"cannot sample {n} ids from split {split!r} of size {len(ids)}")
    rng = SplitMix64(seed)
    return sorted(rng.sample(ids, n))


def save_corpus(corpus: Corpus, path) -> None:
    header = {
        "format": CORPUS_FORMAT,
        "version": CORPUS_VERSION,
        "task_id": corpus.task_id,
        "label_names": list(corpus.label_names),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for doc in corpus.documents():
            obj = {"id": doc.id, "text": doc.text, "split": doc.split}
            if doc.gold_label is not None:
                obj["gold_label"] = doc.gold_label
            if doc.synonyms is not None:
                obj["synonyms"] = list(doc.synonyms)
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.strip():
            raise CorpusError("empty corpus file: missing header line")
        header = json.loads(first)
        if header.get("format") != CORPUS_FORMAT:
            raise CorpusError(f"not a corpus file (format={header.get('format')!r})")
        if header.get("version") != CORPUS_VERSION:
            raise CorpusError(
                f"unsupported corpus version {header.get('version')!r}, expected {CORPUS_VERSION}"
            )
        corpus = Corpus(header["task_id"], header["label_names"])
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            corpus._add(_doc_from_obj(json.loads(line), lineno))
    return corpus
