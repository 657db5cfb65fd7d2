"""Seeded synthetic corpus generator for desk-scale experiments.

Documents are bags of tokens drawn mostly from a class-specific lexicon plus
a shared background vocabulary, so the task is linearly separable-ish: easy
enough for the native classifier, noisy enough to exercise the pipeline.
"""

from __future__ import annotations

from .corpus import Corpus, Document
from .rng import SplitMix64, subseed

N_CLASS_WORDS = 40
N_SHARED_WORDS = 200
DOC_LENGTH = 30
CLASS_WORD_PROB = 0.7


def make_synthetic_corpus(n_train: int, n_test: int, n_extra: int, seed: int,
                          task_id: str = "synth",
                          label_names=("negative", "positive")) -> Corpus:
    """Balanced gold-labeled corpus with the given split sizes. Every split
    (including extra) carries gold labels so the mock oracle can respond."""
    neg_words = [f"{label_names[0]}w{i:02d}" for i in range(N_CLASS_WORDS)]
    pos_words = [f"{label_names[1]}w{i:02d}" for i in range(N_CLASS_WORDS)]
    shared = [f"filler{i:03d}" for i in range(N_SHARED_WORDS)]
    lexicons = {label_names[0]: neg_words, label_names[1]: pos_words}

    docs = []
    for split, count in (("train", n_train), ("test", n_test), ("extra", n_extra)):
        for i in range(count):
            label = label_names[i % 2]
            doc_id = f"{split}-{i:06d}"
            rng = SplitMix64(subseed(seed, split, i))
            words = []
            for _ in range(DOC_LENGTH):
                if rng.next_float() < CLASS_WORD_PROB:
                    pool = lexicons[label]
                else:
                    pool = shared
                words.append(pool[rng.randbelow(len(pool))])
            docs.append(Document(id=doc_id, text=" ".join(words), split=split,
                                 gold_label=label))
    return Corpus(task_id, label_names, docs)
