import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from llambert.annotate import (
    GARBAGE_TEXT,
    AnnotateError,
    HttpChatBackend,
    LlmBackendConfig,
    MockOracleBackend,
    OracleParams,
    ResponseCache,
    annotate,
    label_subset,
    load_label_set,
    make_backend,
    mock_oracle_respond,
    parse_response,
    save_label_set,
)
from llambert.corpus import sample_subset
from llambert.prompts import default_imdb_spec
from llambert.synth import make_synthetic_corpus

GOLDEN = Path(__file__).parent / "data" / "golden"

IMDB_LEXICON = {"positive": ["positive"], "negative": ["negative"]}
YESNO_LEXICON = {"yes": ["yes"], "no": ["no"]}


def mock_config(eps=0.0, delta=0.0, seed=0):
    return LlmBackendConfig(kind="mock_oracle",
                            oracle_params=OracleParams(eps, delta, seed))


class TestParseResponse:
    CASES = [
        # exact answers
        ("positive", "positive"),
        ("negative", "negative"),
        ("Positive", "positive"),
        ("NEGATIVE", "negative"),
        ("  positive  ", "positive"),
        ("positive.", "positive"),
        ("'positive'", "positive"),
        ('"negative"', "negative"),
        ("positive!", "positive"),
        ("negative\n", "negative"),
        # chatty answers
        ("Sure! The review is negative.", "negative"),
        ("The sentiment of this review is positive.", "positive"),
        ("I would classify this as negative overall.", "negative"),
        ("Answer: positive", "positive"),
        ("My answer is 'negative'.", "negative"),
        ("positive, without a doubt", "positive"),
        ("This is clearly a negative review", "negative"),
        ("The review is positive\nHope that helps!", "positive"),
        ("negative - the reviewer hated it", "negative"),
        ("It's positive :)", "positive"),
        # both labels -> ambiguous
        ("It is both positive and negative.", "ambiguous"),
        ("positive or negative", "ambiguous"),
        ("not negative, so positive", "ambiguous"),
        ("positive negative", "ambiguous"),
        # no label at all
        ("", "no-label"),
        ("   ", "no-label"),
        ("I cannot determine that.", "no-label"),
        ("maybe", "no-label"),
        ("neutral", "no-label"),
        ("good film", "no-label"),
        ("pos", "no-label"),
        ("neg", "no-label"),
        # whole-word rule: derived forms must not match
        ("positively charming", "no-label"),
        ("negatively portrayed", "no-label"),
        ("positives outweigh the rest", "no-label"),
        ("a positive-negative blend", "ambiguous"),
        # non-ASCII and noise
        ("très positive", "positive"),
        ("ответ: negative", "negative"),
        ("👍 positive 👍", "positive"),
        ("ｐｏｓｉｔｉｖｅ", "no-label"),
        ("positive ", "positive"),
        (" negative", "negative"),
        # garbage
        ("qwertyuiop", "no-label"),
        ("12345", "no-label"),
        ("{}", "no-label"),
        ("null", "no-label"),
        ("[INST] positive [/INST]", "positive"),
        ("POSITIVE POSITIVE POSITIVE", "positive"),
        ("the word 'positive' appears, as does 'negative'", "ambiguous"),
        ("Based on my analysis the answer you seek is: positive", "positive"),
        ("I'm sorry, I can't help with that.", "no-label"),
    ]

    @pytest.mark.parametrize("text,expected", CASES)
    def test_canned_cases(self, text, expected):
        assert parse_response(text, IMDB_LEXICON) == expected

    def test_yes_no_lexicon(self):
        assert parse_response("yes", YESNO_LEXICON) == "yes"
        assert parse_response("No.", YESNO_LEXICON) == "no"
        assert parse_response("Yes, it is related.", YESNO_LEXICON) == "yes"

    @given(st.text(max_size=200))
    @settings(max_examples=300, deadline=None)
    def test_total_on_arbitrary_text(self, text):
        out = parse_response(text, IMDB_LEXICON)
        assert out in ("positive", "negative", "ambiguous", "no-label")


class TestMockOracle:
    def setup_method(self):
        self.corpus = make_synthetic_corpus(100, 0, 0, seed=1)

    def test_clean_oracle_returns_gold(self):
        doc = self.corpus[self.corpus.split_ids("train")[0]]
        out = mock_oracle_respond(doc, doc.gold_label, OracleParams(0, 0, 1),
                                  self.corpus.label_names)
        assert out == doc.gold_label

    def test_eps_one_always_flips(self):
        params = OracleParams(1.0, 0.0, 7)
        for i in self.corpus.split_ids("train")[:20]:
            doc = self.corpus[i]
            out = mock_oracle_respond(doc, doc.gold_label, params, self.corpus.label_names)
            assert out == self.corpus.opposite(doc.gold_label)

    def test_delta_one_always_garbage(self):
        params = OracleParams(0.0, 1.0, 7)
        doc = self.corpus[self.corpus.split_ids("train")[0]]
        assert mock_oracle_respond(doc, doc.gold_label, params,
                                   self.corpus.label_names) == GARBAGE_TEXT

    def test_order_independence(self):
        params = OracleParams(0.3, 0.2, 42)
        ids = self.corpus.split_ids("train")
        fwd = [mock_oracle_respond(self.corpus[i], self.corpus[i].gold_label, params,
                                   self.corpus.label_names) for i in ids]
        rev = [mock_oracle_respond(self.corpus[i], self.corpus[i].gold_label, params,
                                   self.corpus.label_names) for i in reversed(ids)]
        assert fwd == list(reversed(rev))

    def test_missing_gold_errors(self):
        doc = self.corpus[self.corpus.split_ids("train")[0]]
        with pytest.raises(AnnotateError):
            mock_oracle_respond(doc, None, OracleParams(0, 0, 1), self.corpus.label_names)

    def test_flip_fraction_within_binomial_band(self):
        eps = 0.1
        corpus = make_synthetic_corpus(4000, 0, 0, seed=3)
        params = OracleParams(eps, 0.0, 17)
        flips = 0
        for i in corpus.split_ids("train"):
            doc = corpus[i]
            if mock_oracle_respond(doc, doc.gold_label, params, corpus.label_names) \
                    != doc.gold_label:
                flips += 1
        n = len(corpus.split_ids("train"))
        sigma = math.sqrt(eps * (1 - eps) * n)
        assert abs(flips - eps * n) < 4 * sigma

    def test_invalid_rates_rejected(self):
        with pytest.raises(AnnotateError):
            OracleParams(0.7, 0.6, 1)
        with pytest.raises(AnnotateError):
            OracleParams(-0.1, 0.0, 1)


class CountingBackend(MockOracleBackend):
    def __init__(self, config, corpus):
        super().__init__(config, corpus)
        self.calls = 0

    def complete(self, document, prompt):
        self.calls += 1
        return super().complete(document, prompt)


class TestAnnotateAndCache:
    def test_cache_idempotence(self, small_synth, tmp_path):
        spec = default_imdb_spec(0)
        ids = small_synth.split_ids("train")[:30]
        cache = ResponseCache(tmp_path / "cache.jsonl")
        backend = CountingBackend(mock_config(seed=5), small_synth)
        first, d1 = annotate(ids, spec, backend, cache)
        assert backend.calls == 30 and not d1
        second, d2 = annotate(ids, spec, backend, cache)
        assert backend.calls == 30  # all served from cache
        assert [r.response_text for r in first] == [r.response_text for r in second]

    def test_cache_survives_reload(self, small_synth, tmp_path):
        spec = default_imdb_spec(0)
        ids = small_synth.split_ids("train")[:10]
        path = tmp_path / "cache.jsonl"
        backend = CountingBackend(mock_config(seed=5), small_synth)
        annotate(ids, spec, backend, ResponseCache(path))
        backend2 = CountingBackend(mock_config(seed=5), small_synth)
        annotate(ids, spec, backend2, ResponseCache(path))
        assert backend2.calls == 0

    def test_responses_sorted_by_doc_id(self, small_synth):
        spec = default_imdb_spec(0)
        ids = list(reversed(small_synth.split_ids("train")[:20]))
        responses, _ = annotate(ids, spec, MockOracleBackend(mock_config(seed=1), small_synth))
        assert [r.doc_id for r in responses] == sorted(r.doc_id for r in responses)


class TestLabelSubset:
    def test_clean_oracle_identity(self, small_synth):
        spec = default_imdb_spec(0)
        ids = small_synth.split_ids("train")[:100]
        backend = make_backend(mock_config(0, 0, seed=2), small_synth)
        labels = label_subset(ids, spec, backend)
        assert len(labels.records) == 100
        assert not labels.discards
        assert all(labels.records[i].label == small_synth[i].gold_label for i in ids)

    def test_garbage_all_discarded(self, small_synth):
        spec = default_imdb_spec(0)
        ids = small_synth.split_ids("train")[:50]
        backend = make_backend(mock_config(0, 1.0, seed=2), small_synth)
        labels = label_subset(ids, spec, backend)
        assert not labels.records
        assert len(labels.discards) == 50
        assert all(d.reason == "no-label" for d in labels.discards)

    def test_partition_covers_ids_exactly_once(self, small_synth):
        spec = default_imdb_spec(0)
        ids = small_synth.split_ids("train")[:80]
        backend = make_backend(mock_config(0.2, 0.3, seed=9), small_synth)
        labels = label_subset(ids, spec, backend)
        record_ids = set(labels.records)
        discard_ids = {d.doc_id for d in labels.discards}
        assert not (record_ids & discard_ids)
        assert record_ids | discard_ids == set(ids)

    def test_golden_counts(self):
        golden = json.loads((GOLDEN / "mock_oracle_counts.json").read_text())
        corpus = make_synthetic_corpus(2000, 0, 0, seed=golden["corpus_seed"])
        ids = sample_subset(corpus, "train", golden["n"], seed=golden["sample_seed"])
        spec = default_imdb_spec(0)

        def counts(eps, delta):
            backend = make_backend(mock_config(eps, delta, golden["oracle_seed"]), corpus)
            ls = label_subset(ids, spec, backend)
            flips = sum(1 for i, r in ls.records.items() if r.label != corpus[i].gold_label)
            return {"records": len(ls.records), "discards": len(ls.discards), "flips": flips}

        assert counts(0.05, 0.0) == golden["eps_0.05_delta_0"]
        assert counts(0.0, 0.1) == golden["eps_0_delta_0.1"]
        assert counts(0.0461, 0.0) == golden["eps_0.0461_delta_0"]

    def test_save_and_load_round_trip(self, small_synth, tmp_path):
        spec = default_imdb_spec(0)
        ids = small_synth.split_ids("train")[:40]
        backend = make_backend(mock_config(0, 0.2, seed=4), small_synth)
        labels = label_subset(ids, spec, backend, out_dir=tmp_path)
        loaded = load_label_set(tmp_path / "labels.jsonl", small_synth.task_id)
        assert set(loaded.records) == set(labels.records)
        assert {d.doc_id for d in loaded.discards} == {d.doc_id for d in labels.discards}


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


class FakeSession:
    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.requests.append((url, json))
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def http_config(**kw):
    kw.setdefault("kind", "http_chat")
    kw.setdefault("base_url", "http://llm.example")
    kw.setdefault("model_name", "test-model")
    return LlmBackendConfig(**kw)


class TestHttpBackend:
    def ok(self, content):
        return FakeResponse(200, {"choices": [{"message": {"content": content}}]})

    def test_request_shape(self, tiny_corpus):
        session = FakeSession([self.ok("positive")])
        backend = HttpChatBackend(http_config(), tiny_corpus, session)
        spec = default_imdb_spec(0)
        responses, discards = annotate(["d5"], spec, backend)
        assert not discards
        url, body = session.requests[0]
        assert url == "http://llm.example/v1/chat/completions"
        assert body["model"] == "test-model"
        assert body["temperature"] == 0.0
        assert body["max_tokens"] == 8
        assert body["messages"][0]["role"] == "system"
        assert responses[0].response_text == "positive"

    def test_retry_then_success(self, tiny_corpus):
        from llambert.annotate import RetryPolicy

        session = FakeSession([FakeResponse(500), self.ok("negative")])
        cfg = http_config(retry=RetryPolicy(3, 0.0, 1.0))
        backend = HttpChatBackend(cfg, tiny_corpus, session)
        responses, discards = annotate(["d5"], default_imdb_spec(0), backend)
        assert responses[0].response_text == "negative"
        assert not discards

    def test_exhausted_retries_become_transport_discard(self, tiny_corpus):
        from llambert.annotate import RetryPolicy

        session = FakeSession([FakeResponse(500)] * 3)
        cfg = http_config(retry=RetryPolicy(3, 0.0, 1.0))
        backend = HttpChatBackend(cfg, tiny_corpus, session)
        responses, discards = annotate(["d5"], default_imdb_spec(0), backend)
        assert not responses
        assert discards[0].reason == "transport"

    def test_malformed_reply_is_protocol_discard(self, tiny_corpus):
        session = FakeSession([FakeResponse(200, {"unexpected": True})])
        backend = HttpChatBackend(http_config(), tiny_corpus, session)
        responses, discards = annotate(["d5"], default_imdb_spec(0), backend)
        assert not responses
        assert discards[0].reason == "protocol"
