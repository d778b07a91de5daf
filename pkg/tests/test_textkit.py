"""Tokenizer, vocabulary, count-matrix, and TF-IDF contracts."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from askwell.textkit import (
    NgramCounter,
    TfidfEncoder,
    Vocabulary,
    build_vocabulary,
    ngram_features,
    tfidf,
    tokenize,
    word_count,
)


class TestTokenize:
    def test_lowercases_and_splits_on_punctuation(self):
        assert tokenize("Help! We need PIZZA, now...") == ["help", "we", "need", "pizza", "now"]

    def test_urls_removed_entirely(self):
        toks = tokenize("proof here http://imgur.com/a/xyz and www.example.com/page end")
        assert toks == ["proof", "here", "and", "end"]
        assert "imgur" not in toks and "com" not in toks

    def test_internal_apostrophes_kept(self):
        assert tokenize("it's my gf's birthday") == ["it's", "my", "gf's", "birthday"]

    def test_digits_are_separators(self):
        assert tokenize("room4rent 2nite") == ["room", "rent", "nite"]

    def test_empty_and_whitespace(self):
        assert tokenize("") == []
        assert tokenize("  \n\t ") == []
        assert word_count("") == 0

    @given(st.text(max_size=200))
    def test_tokens_are_lowercase_alpha(self, s):
        for t in tokenize(s):
            assert t == t.lower()
            assert all(c.isalpha() or c == "'" for c in t)

    def test_word_count_matches_tokenize(self):
        s = "One two, three... FOUR five's"
        assert word_count(s) == len(tokenize(s)) == 5


class TestVocabulary:
    def test_min_df_filters_rare_terms(self):
        docs = ["apple banana", "apple cherry", "apple banana date"]
        vocab = build_vocabulary(docs, min_df=2)
        assert list(vocab.terms) == ["apple", "banana"]
        assert vocab.df == (3, 2)
        assert vocab.n_docs == 3

    def test_terms_sorted_lexicographically(self):
        vocab = build_vocabulary(["zebra apple mango"] * 2, min_df=1)
        assert list(vocab.terms) == sorted(vocab.terms)

    def test_df_counts_documents_not_occurrences(self):
        vocab = build_vocabulary(["pizza pizza pizza", "pizza"], min_df=1)
        assert vocab.df[vocab.index()["pizza"]] == 2

    def test_stopwords_excluded(self):
        vocab = build_vocabulary(["the pizza", "the pasta"], min_df=1, stopwords={"the"})
        assert "the" not in vocab.terms
        assert set(vocab.terms) == {"pizza", "pasta"}

    def test_token_filter_applied(self):
        vocab = build_vocabulary(
            ["aa bbbb cc dddd"], min_df=1, token_filter=lambda t: len(t) > 2
        )
        assert set(vocab.terms) == {"bbbb", "dddd"}

    def test_roundtrip_json(self):
        vocab = build_vocabulary(["apple banana", "apple"], min_df=1)
        again = Vocabulary.from_json(vocab.to_json())
        assert again == vocab


class TestCountsAndTfidf:
    def test_tfidf_single_shared_term_value(self):
        # term in 1 of 2 docs appearing twice: tf=2, idf=ln(2)+1
        docs = ["spam spam", "other"]
        vocab = build_vocabulary(docs, min_df=1)
        X = tfidf(docs, vocab)
        j = vocab.index()["spam"]
        assert X[0, j] == pytest.approx(2 * (math.log(2.0) + 1.0))
        assert X[1, j] == 0.0

    def test_tfidf_everywhere_term_gets_idf_one(self):
        docs = ["pizza night", "pizza day"]
        vocab = build_vocabulary(docs, min_df=1)
        X = tfidf(docs, vocab)
        j = vocab.index()["pizza"]
        assert X[0, j] == pytest.approx(1.0)

    def test_matrix_shape_and_row_order(self):
        docs = ["apple banana", "banana", "cherry apple"]
        vocab = build_vocabulary(docs, min_df=1)
        X = tfidf(docs, vocab)
        assert X.shape == (3, len(vocab))
        assert X[1, vocab.index()["apple"]] == 0.0

    def test_unknown_terms_ignored_at_transform(self):
        vocab = build_vocabulary(["apple"], min_df=1)
        X = tfidf(["apple dragonfruit"], vocab)
        assert X.shape == (1, 1)
        assert X.nnz == 1


class TestNgrams:
    def test_unigram_counts(self):
        X, vocab = ngram_features(["a b a", "b c"], n=1, min_df=1)
        idx = vocab.index()
        assert X[0, idx["a"]] == 2
        assert X[0, idx["b"]] == 1
        assert X[1, idx["c"]] == 1

    def test_bigram_terms_are_underscore_joined(self):
        X, vocab = ngram_features(["good morning good morning"], n=2, min_df=1)
        assert "good_morning" in vocab.terms
        assert X[0, vocab.index()["good_morning"]] == 2
        assert "morning_good" in vocab.terms

    def test_min_df_default_three(self):
        docs = ["rare pair here"] * 2 + ["common here"] * 3
        X, vocab = ngram_features(docs, n=1)
        assert "rare" not in vocab.terms
        assert "common" in vocab.terms and "here" in vocab.terms

    def test_short_doc_has_no_bigrams(self):
        X, vocab = ngram_features(["single", "two words", "two words"], n=2, min_df=1)
        row = X[0].toarray().ravel()
        assert row.sum() == 0

    def test_estimators_round_trip_sklearn_params(self):
        enc = TfidfEncoder(min_df=2)
        assert enc.get_params()["min_df"] == 2
        counter = NgramCounter(n=2, min_df=1).fit(["a b", "a b"])
        X = counter.transform(["a b"])
        assert X.shape[0] == 1


class TestOracleCrossCheck:
    def test_counts_match_bruteforce(self):
        rng = np.random.default_rng(0)
        words = ["pizza", "help", "night", "share", "need"]
        docs = [
            " ".join(words[i] for i in rng.integers(0, len(words), size=rng.integers(1, 12)))
            for _ in range(25)
        ]
        X, vocab = ngram_features(docs, n=1, min_df=1)
        for d, doc in enumerate(docs):
            toks = doc.split()
            for j, term in enumerate(vocab.terms):
                assert X[d, j] == toks.count(term)
