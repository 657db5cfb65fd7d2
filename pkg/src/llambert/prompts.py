"""Declarative chat-prompt templates with k-shot exemplar assembly.

Rendering is bit-exact and deterministic: the same spec and document always
produce the same message list, the same flat llama2-style [INST] text, and
the same 64-bit content hash. Golden fixture files in the test suite pin the
exact bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .corpus import Corpus, Document
from .rng import fnv1a64

WRAPPERS = ("llama2-inst", "plain-messages")

PLACEHOLDER = "{document}"

DEFAULT_EXEMPLAR_CHAR_BUDGET = 2000

IMDB_SYSTEM = "Please answer with 'positive' or 'negative' only!"
IMDB_USER_TEMPLATE = (
    "Decide if the following movie review is positive or negative: \n"
    "{document}\n"
    "If the movie review is positive please answer 'positive',\n"
    "if the movie review is negative please answer 'negative'.\n"
    "Make your decision based on the whole text."
)

UMLS_SYSTEM = "Please answer with a 'yes' or a 'no' only!"
UMLS_USER_TEMPLATE = (
    "Decide if the term: {document}\n"
    "is related to the human nervous system.\n"
    "Exclude the only vascular structures,\n"
    "even if connected to the nervous system.\n"
    "If multiple examples or terms with multiple words are given,\n"
    "treat them all as a whole and make your decision based on that."
)


class PromptError(ValueError):
    pass


def _normalize_surface(s: str) -> str:
    return s.strip().lower()


@dataclass(frozen=True)
class PromptSpec:
    task_id: str
    system_text: str
    user_template: str
    label_lexicon: dict  # label name -> list of surface strings; [0] is canonical
    exemplars: tuple = ()  # (Document, label) pairs, in prompt order
    wrapper: str = "llama2-inst"
    exemplar_char_budget: int = DEFAULT_EXEMPLAR_CHAR_BUDGET

    def __post_init__(self):
        if self.user_template.count(PLACEHOLDER) != 1:
            raise PromptError(
                f"user_template must contain {PLACEHOLDER} exactly once "
                f"(found {self.user_template.count(PLACEHOLDER)})"
            )
        if self.wrapper not in WRAPPERS:
            raise PromptError(f"unknown wrapper {self.wrapper!r}")
        if len(self.label_lexicon) != 2:
            raise PromptError("label_lexicon must map exactly two labels")
        surfaces = []
        for label, surfs in self.label_lexicon.items():
            if not surfs:
                raise PromptError(f"label {label!r} has no surface strings")
            surfaces.extend(_normalize_surface(s) for s in surfs)
        for i, a in enumerate(surfaces):
            for j, b in enumerate(surfaces):
                if i != j and a in b:
                    raise PromptError(
                        f"surface strings overlap after normalization: {a!r} is inside {b!r}"
                    )
        for _, label in self.exemplars:
            if label not in self.label_lexicon:
                raise PromptError(f"exemplar label {label!r} not in lexicon")

    @property
    def k(self) -> int:
        return len(self.exemplars)

    def canonical_surface(self, label: str) -> str:
        return self.label_lexicon[label][0]


@dataclass(frozen=True)
class RenderedPrompt:
    messages: tuple  # (role, content) pairs
    flat_text: str
    prompt_hash: str  # 16 hex digits (64-bit FNV-1a of flat_text)


def document_slot(doc: Document) -> str:
    """The text substituted for the placeholder; concepts with synonyms get
    the preferred term plus its synonyms joined by ';'."""
    if doc.synonyms:
        return ";".join([doc.text, *doc.synonyms])
    return doc.text


def truncate_at_word(text: str, budget: int) -> str:
    if len(text) <= budget:
        return text
    cut = text.rfind(" ", 0, budget + 1)
    if cut <= 0:
        cut = budget
    return text[:cut].rstrip()


def _flat_render(system_text: str, turns: list) -> str:
    """llama2-style flat rendering: first [INST] block carries the <<SYS>>
    header, exemplar answers follow their [/INST] on the same line."""
    parts = []
    user_i = 0
    pending = None
    for role, content in turns:
        if role == "user":
            if pending is not None:
                parts.append(pending)
                pending = None
            if user_i == 0:
                pending = f"[INST] <<SYS>>\n{system_text}\n<</SYS>>\n{content}\n[/INST]"
            else:
                pending = f"[INST] {content}\n[/INST]"
            user_i += 1
        else:
            pending += f" {content}\n"
            parts.append(pending)
            pending = None
    if pending is not None:
        parts.append(pending)
    return "".join(parts)


def render(spec: PromptSpec, document: Document) -> RenderedPrompt:
    """Render the k exemplar turn pairs followed by the queried document."""
    if not document.text.strip():
        raise PromptError(f"document {document.id!r} has empty text")
    turns = []
    for ex_doc, ex_label in spec.exemplars:
        slot = truncate_at_word(document_slot(ex_doc), spec.exemplar_char_budget)
        turns.append(("user", spec.user_template.replace(PLACEHOLDER, slot)))
        turns.append(("assistant", spec.canonical_surface(ex_label)))
    turns.append(("user", spec.user_template.replace(PLACEHOLDER, document_slot(document))))
    flat = _flat_render(spec.system_text, turns)
    messages = tuple([("system", spec.system_text), *turns])
    return RenderedPrompt(
        messages=messages,
        flat_text=flat,
        prompt_hash=f"{fnv1a64(flat.encode('utf-8')):016x}",
    )


def _pick_exemplars(source, want_labels, lexicon) -> tuple:
    """Deterministically pick gold-labeled docs matching the wanted label
    sequence, scanning in ascending id order."""
    if isinstance(source, Corpus):
        pool = source.documents()
    else:
        pool = sorted(source, key=lambda d: d.id)
    chosen = []
    used = set()
    for want in want_labels:
        hit = None
        for doc in pool:
            if doc.id in used or doc.gold_label != want:
                continue
            hit = doc
            break
        if hit is None:
            raise PromptError(f"not enough exemplar candidates with gold label {want!r}")
        used.add(hit.id)
        chosen.append((hit, want))
    return tuple(chosen)


def _alternating(first: str, second: str, k: int) -> list:
    return [first if i % 2 == 0 else second for i in range(k)]


def default_imdb_spec(k: int, exemplar_source=None, composition=None) -> PromptSpec:
    """IMDb sentiment spec. 1-shot uses a negative exemplar, 2-shot negative
    then positive (counteracts the positive bias small chat models show);
    override with an explicit composition list."""
    lexicon = {"positive": ["positive"], "negative": ["negative"]}
    if composition is None:
        composition = _alternating("negative", "positive", k)
    if len(composition) != k:
        raise PromptError(f"composition has {len(composition)} labels for k={k}")
    exemplars = _pick_exemplars(exemplar_source, composition, lexicon) if k else ()
    return PromptSpec(
        task_id="imdb",
        system_text=IMDB_SYSTEM,
        user_template=IMDB_USER_TEMPLATE,
        label_lexicon=lexicon,
        exemplars=exemplars,
    )


def default_umls_spec(k: int, exemplar_source=None, composition=None) -> PromptSpec:
    """Nervous-system concept spec; 1-shot uses one 'yes' exemplar."""
    lexicon = {"yes": ["yes"], "no": ["no"]}
    if composition is None:
        composition = _alternating("yes", "no", k)
    if len(composition) != k:
        raise PromptError(f"composition has {len(composition)} labels for k={k}")
    exemplars = _pick_exemplars(exemplar_source, composition, lexicon) if k else ()
    return PromptSpec(
        task_id="umls",
        system_text=UMLS_SYSTEM,
        user_template=UMLS_USER_TEMPLATE,
        label_lexicon=lexicon,
        exemplars=exemplars,
    )


_HEREDOC_OPEN = re.compile(r"^(\w[\w.]*)\s*<<<\s*$")
_KV = re.compile(r"^(\w[\w.]*)\s*=\s*(.*)$")


def load_prompt_spec(path, corpus: Optional[Corpus] = None) -> PromptSpec:
    """Load a spec from a plain-text config file.

    Syntax: `key = value` lines, multi-line strings as `key <<<` ... `>>>`,
    labels as `label.<name> = surface1, surface2`, optional exemplars as
    `exemplar = <doc_id> <label>` resolved against the given corpus.
    """
    fields = {}
    lexicon = {}
    exemplar_refs = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _HEREDOC_OPEN.match(line)
        if m:
            body = []
            while i < len(lines) and lines[i].strip() != ">>>":
                body.append(lines[i])
                i += 1
            if i == len(lines):
                raise PromptError(f"{path}: unterminated <<< block for {m.group(1)}")
            i += 1
            fields[m.group(1)] = "\n".join(body)
            continue
        m = _KV.match(line)
        if not m:
            raise PromptError(f"{path}: cannot parse line {i}: {line!r}")
        key, value = m.group(1), m.group(2).strip()
        if key.startswith("label."):
            lexicon[key[len("label."):]] = [s.strip() for s in value.split(",") if s.strip()]
        elif key == "exemplar":
            doc_id, _, label = value.partition(" ")
            exemplar_refs.append((doc_id.strip(), label.strip()))
        else:
            fields[key] = value
    exemplars = []
    for doc_id, label in exemplar_refs:
        if corpus is None:
            raise PromptError("config declares exemplars but no corpus was given")
        if doc_id not in corpus:
            raise PromptError(f"exemplar doc {doc_id!r} not found in corpus")
        exemplars.append((corpus[doc_id], label))
    return PromptSpec(
        task_id=fields.get("task_id", "custom"),
        system_text=fields.get("system_text", ""),
        user_template=fields.get("user_template", ""),
        label_lexicon=lexicon,
        exemplars=tuple(exemplars),
        wrapper=fields.get("wrapper", "llama2-inst"),
        exemplar_char_budget=int(fields.get("exemplar_char_budget", DEFAULT_EXEMPLAR_CHAR_BUDGET)),
    )
