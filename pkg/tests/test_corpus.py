import json

import numpy as np
import pytest

from s2ut import toylang
from s2ut.corpus import Corpus, gen_toy_corpus, sample_duration_subset
from s2ut.rng import RngStream
from s2ut.toylang import ToyLanguageSpec, translate, translate_back


SPEC = ToyLanguageSpec()


def small_corpus(seed=1, n=(30, 8, 8)):
    return gen_toy_corpus(SPEC, *n, seed=seed)


def test_translation_invertible_on_vocab():
    rng = RngStream(0)
    for _ in range(50):
        sent = toylang.sample_sentence(SPEC, rng)
        assert translate_back(SPEC, translate(SPEC, sent)) == sent


def test_translation_is_not_identity():
    sent = ["bo", "ka", "ri"]
    out = translate(SPEC, sent)
    assert out == ["kilo", "ena", "rua"]


def test_motifs_have_no_adjacent_duplicates():
    for lang in (SPEC.src_lang, SPEC.tgt_lang):
        for tok in SPEC.tokens(lang):
            raw = toylang.sentence_to_raw_units(SPEC, lang, [tok, tok])
            red = toylang.sentence_to_reduced_units(SPEC, lang, [tok, tok])
            assert len(red) == 6
            # reduction of the raw form gives exactly the symbol string
            collapsed = [u for i, u in enumerate(raw) if i == 0 or raw[i - 1] != u]
            assert collapsed == red


def test_tokens_round_trip_through_reduced_units():
    rng = RngStream(5)
    for lang in (SPEC.src_lang, SPEC.tgt_lang):
        for _ in range(20):
            sent = toylang.sample_sentence(SPEC, rng)
            if lang == SPEC.tgt_lang:
                sent = translate(SPEC, sent)
            units = toylang.sentence_to_reduced_units(SPEC, lang, sent)
            assert toylang.tokens_from_reduced_units(SPEC, lang, units) == sent


def test_empty_corpus():
    corpus = gen_toy_corpus(SPEC, 0, 0, 0, seed=1)
    assert corpus.examples == []
    for split in ("train", "dev", "test"):
        assert corpus.split(split) == []


def test_corpus_fields_populated_and_consistent():
    corpus = small_corpus()
    assert len(corpus.split("train")) == 30
    for e in corpus.examples:
        assert e.src_text and e.tgt_text and e.tgt_units
        src_tokens = e.src_text.split()
        assert translate(SPEC, src_tokens) == e.tgt_text.split()
        # stored units equal the deterministic motif string of the target
        expect = toylang.sentence_to_reduced_units(SPEC, SPEC.tgt_lang, e.tgt_text.split())
        assert e.tgt_units == expect
        # duration matches the raw frame count
        raw = toylang.sentence_to_raw_units(SPEC, SPEC.src_lang, src_tokens)
        assert e.duration_s == pytest.approx(len(raw) * 0.02)


def test_same_seed_byte_identical_jsonl(tmp_path):
    for name in ("a", "b"):
        small_corpus(seed=3).save(tmp_path / name)
    a = (tmp_path / "a" / "corpus.jsonl").read_bytes()
    b = (tmp_path / "b" / "corpus.jsonl").read_bytes()
    assert a == b
    ca = (tmp_path / "a" / "codebook" / "centroids.bin").read_bytes()
    cb = (tmp_path / "b" / "codebook" / "centroids.bin").read_bytes()
    assert ca == cb


def test_jsonl_round_trip_lossless(tmp_path):
    corpus = small_corpus(seed=4, n=(6, 3, 3))
    corpus.save(tmp_path / "c")
    loaded = Corpus.load(tmp_path / "c")
    assert loaded.spec == corpus.spec
    assert len(loaded.examples) == len(corpus.examples)
    for a, b in zip(corpus.examples, loaded.examples):
        assert a.to_json() == b.to_json()
        assert np.array_equal(
            corpus.wave(a).samples.astype("<f4"), loaded.wave(b).samples.astype("<f4")
        )
    # saving the loaded corpus again reproduces the bytes
    loaded.save(tmp_path / "c2")
    assert (tmp_path / "c" / "corpus.jsonl").read_bytes() == (tmp_path / "c2" / "corpus.jsonl").read_bytes()


def test_word_distributions_within_3_sigma():
    # Monte Carlo frequency oracle on dev/test draws
    corpus = gen_toy_corpus(SPEC, 100, 400, 400, seed=1)
    for split in ("dev", "test"):
        tokens = [t for e in corpus.split(split) for t in e.src_text.split()]
        n = len(tokens)
        lex_p = (1.0 - SPEC.digit_rate) / len(SPEC.src_words)
        for word in SPEC.src_words:
            count = sum(1 for t in tokens if t == word)
            sigma = (n * lex_p * (1 - lex_p)) ** 0.5
            assert abs(count - n * lex_p) <= 3.0 * sigma + 1e-9, word
        digit_count = sum(1 for t in tokens if t.isdigit())
        p = SPEC.digit_rate
        sigma = (n * p * (1 - p)) ** 0.5
        assert abs(digit_count - n * p) <= 3.0 * sigma


def test_duration_subset_budget_zero_and_full():
    corpus = small_corpus(seed=5)
    empty = sample_duration_subset(corpus, 0.0, seed=1)
    assert empty.split("train") == []
    assert len(empty.split("dev")) == len(corpus.split("dev"))
    total = sum(e.duration_s for e in corpus.split("train"))
    whole = sample_duration_subset(corpus, total + 1.0, seed=1)
    assert len(whole.split("train")) == len(corpus.split("train"))


def test_duration_subset_overshoot_at_most_one_example():
    corpus = small_corpus(seed=6)
    budget = 5.0
    sub = sample_duration_subset(corpus, budget, seed=2)
    total = sum(e.duration_s for e in sub.split("train"))
    assert total <= budget + max(e.duration_s for e in corpus.split("train"))
    # saturating: the walk only stops once the budget is reached
    assert total >= budget or len(sub.split("train")) == len(corpus.split("train"))


def test_duration_subset_monotone_supersets():
    corpus = small_corpus(seed=7)
    prev_ids: set = set()
    for budget in (2.0, 5.0, 9.0, 14.0):
        sub = sample_duration_subset(corpus, budget, seed=3)
        ids = {e.id for e in sub.split("train")}
        assert prev_ids <= ids
        prev_ids = ids


def test_duration_subset_ratio_fidelity():
    corpus = gen_toy_corpus(SPEC, 220, 2, 2, seed=8)
    total = sum(e.duration_s for e in corpus.split("train"))
    budgets = {10: 0.1 * total, 30: 0.3 * total, 50: 0.5 * total, 100: total}
    realized = {}
    for pct, budget in budgets.items():
        sub = sample_duration_subset(corpus, budget, seed=4)
        realized[pct] = sum(e.duration_s for e in sub.split("train"))
    for a in (10, 30, 50):
        ratio = realized[a] / realized[100]
        assert abs(ratio - a / 100) / (a / 100) < 0.05


def test_gen_rejects_empty_vocab():
    with pytest.raises(ValueError):
        ToyLanguageSpec(src_words=(), tgt_words=())


def test_weak_flag_survives_round_trip(tmp_path):
    corpus = small_corpus(seed=9, n=(3, 1, 1))
    corpus.examples[0].weak = True
    corpus.save(tmp_path / "w")
    line = (tmp_path / "w" / "corpus.jsonl").read_text().splitlines()[0]
    assert json.loads(line)["weak"] is True
    loaded = Corpus.load(tmp_path / "w")
    assert loaded.examples[0].weak and not loaded.examples[1].weak
