import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from ensemble_ssl.data import (PAD, UNK, Example, Resources, SplitPools, Vocabulary, build_vocab,
                               load_corpus, load_tsv_map, masked_labels, preprocess, save_corpus,
                               stratified_split, tokenize)


class TestPreprocess:
    def test_fixed_pipeline_order(self):
        res = Resources(stopwords={"today"}, emoji={":(": "sad_face"})
        assert preprocess("Feeling SAD today :( http://x.co", res) == "feeling sad sad_face"

    def test_empty(self):
        assert preprocess("") == ""

    def test_identity_under_empty_resources(self):
        assert preprocess("hello") == "hello"

    def test_dialect_before_stopwords(self):
        res = Resources(stopwords={"you"}, dialect={"u": "you", "gr8": "great"})
        assert preprocess("U are GR8 !!", res) == "are great"

    def test_longest_emoji_surface_wins(self):
        res = Resources(emoji={":(": "sad", ":-(": "very_sad"})
        assert preprocess("ok :-( :(", res) == "ok very_sad sad"

    def test_www_urls_and_whitespace(self):
        assert preprocess("  see   www.example.com/x?y=1 now\t\n") == "see now"

    @given(st.text(alphabet=st.sampled_from(list("abcXYZ :()!?#_-/.\t\n😀")), max_size=60))
    @settings(max_examples=300)
    def test_idempotent(self, text):
        res = Resources(stopwords={"a", "the"}, emoji={"😀": "grin", ":(": "sad_face"},
                        dialect={"xyz": "formal"})
        once = preprocess(text, res)
        assert preprocess(once, res) == once


class TestVocab:
    def test_frequency_order(self):
        v = build_vocab(["a a b"], min_freq=1)
        assert v.stoi == {"<pad>": PAD, "<unk>": UNK, "a": 2, "b": 3}

    def test_nothing_passes_threshold(self, caplog):
        v = build_vocab(["a"], min_freq=2)
        assert len(v) == 2
        assert "min_freq" in caplog.text

    def test_lexicographic_tie_break(self):
        v = build_vocab(["b a"])
        assert v["a"] == 2 and v["b"] == 3

    def test_frozen_rejects_insert(self):
        v = build_vocab(["a"])
        with pytest.raises(ValueError):
            v.add("zzz")

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            build_vocab([])

    def test_roundtrip(self, tmp_path):
        v = build_vocab(["x y y z z z"])
        v.save(tmp_path / "v.txt")
        assert Vocabulary.load(tmp_path / "v.txt").itos == v.itos


class TestTokenize:
    vocab = Vocabulary(["a", "b"]).freeze()

    def test_lookup(self):
        assert tokenize("a b", self.vocab, 8).tokens == [2, 3]

    def test_unknown(self):
        assert tokenize("a z", Vocabulary(["a"]), 8).tokens == [2, UNK]

    def test_truncation(self):
        v = Vocabulary(["a", "b", "c"])
        seq = tokenize("a b c", v, max_len=2)
        assert seq.tokens == [2, 3] and seq.original_length == 3

    def test_degenerate(self):
        seq = tokenize("", self.vocab)
        assert seq.tokens == [PAD] and seq.degenerate

    @given(st.lists(st.sampled_from(["a", "b", "q", "zz", "é"]), max_size=30), st.integers(1, 10))
    def test_total(self, words, max_len):
        seq = tokenize(" ".join(words), self.vocab, max_len)
        assert all(0 <= t < len(self.vocab) for t in seq.tokens)
        assert 1 <= len(seq.tokens) <= max_len


def _balanced(n, n_classes=2):
    return [Example(f"e{i}", f"t{i}", i % n_classes) for i in range(n)]


class TestSplit:
    def test_default_proportions_exact(self):
        pools = stratified_split(_balanced(100), (0.2, 0.6, 0.2), seed=0)
        corpus = _balanced(100)
        assert len(pools.labeled) == 20 and len(pools.unlabeled) == 60 and len(pools.test) == 20
        for part in (pools.labeled, pools.test):
            assert Counter(corpus[i].label for i in part) == {0: 10, 1: 10}

    def test_all_labeled(self):
        pools = stratified_split(_balanced(10), (1, 0, 0))
        assert pools.labeled == list(range(10)) and not pools.unlabeled and not pools.test

    def test_deterministic(self):
        c = _balanced(50)
        assert stratified_split(c, seed=9) == stratified_split(c, seed=9)
        assert stratified_split(c, seed=9) != stratified_split(c, seed=10)

    def test_too_small_class(self):
        c = _balanced(10) + [Example("rare", "x", None)]
        with pytest.raises(ValueError, match="no label"):
            stratified_split(c)
        c = [Example(f"a{i}", "t", 0) for i in range(10)] + [Example("b", "t", 1)]
        with pytest.raises(ValueError, match="class 1"):
            stratified_split(c)

    def test_bad_fractions(self):
        with pytest.raises(ValueError):
            stratified_split(_balanced(10), (0.5, 0.6, 0.2))

    @given(counts=st.lists(st.integers(3, 60), min_size=2, max_size=2),
           lab=st.floats(0.05, 0.6), test=st.floats(0.05, 0.3), seed=st.integers(0, 99))
    @settings(max_examples=200, deadline=None)
    def test_cover_and_stratification(self, counts, lab, test, seed):
        corpus = [Example(f"c{c}_{i}", "t", c) for c in range(2) for i in range(counts[c])]
        pools = stratified_split(corpus, (lab, 1 - lab - test, test), seed=seed)
        n = len(corpus)
        parts = [set(pools.labeled), set(pools.unlabeled), set(pools.test)]
        assert sum(map(len, parts)) == n and set().union(*parts) == set(range(n))
        for part in (pools.labeled, pools.test):
            if not part:
                continue
            for c in range(2):
                share = sum(corpus[i].label == c for i in part) / len(part)
                assert abs(share - counts[c] / n) <= 1 / len(part) + 1e-12

    def test_by_language(self):
        corpus = [Example(f"{lang}{i}", "t", i % 2, lang) for lang in ("ar", "en") for i in range(40)]
        pools = stratified_split(corpus, seed=1, by_lang=True)
        assert Counter(corpus[i].lang for i in pools.test) == {"ar": 8, "en": 8}

    def test_manifest_roundtrip(self, tmp_path):
        corpus = _balanced(30)
        pools = stratified_split(corpus, seed=4)
        pools.save(tmp_path / "s.json", corpus)
        manifest = json.loads((tmp_path / "s.json").read_text())
        assert set(manifest) == {"seed", "labeled", "unlabeled", "test"}
        assert SplitPools.load(tmp_path / "s.json", corpus) == pools

    def test_unlabeled_labels_masked(self):
        corpus = _balanced(30)
        pools = stratified_split(corpus, seed=4)
        y = masked_labels(corpus, pools)
        assert all(y[i] == -1 for i in pools.unlabeled + pools.test)
        assert all(y[i] == corpus[i].label for i in pools.labeled)


class TestIO:
    def test_corpus_roundtrip(self, tmp_path):
        corpus = [Example("1", "héllo wörld", 1, "es"), Example("2", "x", None, "ar")]
        save_corpus(corpus, tmp_path / "c.jsonl")
        assert load_corpus(tmp_path / "c.jsonl") == corpus

    def test_duplicate_ids(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": "1", "text": "a"}\n{"id": "1", "text": "b"}\n')
        with pytest.raises(ValueError, match="duplicate"):
            load_corpus(p)

    def test_invalid_label(self):
        with pytest.raises(ValueError):
            Example("x", "t", 3)

    def test_tsv(self, tmp_path):
        p = tmp_path / "e.tsv"
        p.write_text(":)\thappy_face\n\n:(\tsad_face\n", encoding="utf-8")
        assert load_tsv_map(p) == {":)": "happy_face", ":(": "sad_face"}

    def test_resources_dir(self, tmp_path):
        (tmp_path / "stopwords.txt").write_text("the\na\n")
        (tmp_path / "emoji.tsv").write_text(":)\thappy\n")
        res = Resources.from_dir(tmp_path)
        assert res.stopwords == {"the", "a"} and res.emoji == {":)": "happy"} and res.dialect == {}
