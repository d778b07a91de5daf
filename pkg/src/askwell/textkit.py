"""Tokenization, vocabularies, and TF-IDF / n-gram document-term matrices.

Tokens are lowercase alphabetic runs with internal apostrophes; URLs and
punctuation never reach the token stream.  Matrices are scipy CSR with rows
in document order and columns in lexicographic term order.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

__all__ = [
    "tokenize",
    "word_count",
    "Vocabulary",
    "build_vocabulary",
    "tfidf",
    "ngram_features",
    "TfidfEncoder",
    "NgramCounter",
    "load_wordlist",
]

# URLs are removed before the token scan so their fragments do not pollute
# word counts or lexicon matches.
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase tokens: alphabetic runs, apostrophes allowed inside a run.

    URLs are dropped entirely; all other punctuation and digits act as
    separators.  Deterministic, no locale dependence.
    """
    return _TOKEN_RE.findall(_URL_RE.sub(" ", text.lower()))


def word_count(text: str) -> int:
    """Number of tokens produced by :func:`tokenize`."""
    return len(tokenize(text))


def load_wordlist(path) -> frozenset[str]:
    """Read a plain-text word list, one entry per line; blanks ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term inventory with document frequencies.

    ``terms`` is lexicographically sorted and defines column order for every
    matrix built against this vocabulary.
    """

    terms: tuple[str, ...]
    df: tuple[int, ...]
    n_docs: int

    def __post_init__(self):
        if list(self.terms) != sorted(self.terms):
            raise ValueError("vocabulary terms must be lexicographically sorted")
        if len(self.terms) != len(self.df):
            raise ValueError("terms and df length mismatch")

    def __len__(self) -> int:
        return len(self.terms)

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def to_json(self) -> str:
        return json.dumps(
            {"terms": list(self.terms), "df": list(self.df), "n_docs": self.n_docs}
        )

    @classmethod
    def from_json(cls, payload: str) -> "Vocabulary":
        d = json.loads(payload)
        return cls(tuple(d["terms"]), tuple(d["df"]), int(d["n_docs"]))


def _doc_tokens(docs: Sequence[str]) -> list[list[str]]:
    return [tokenize(d) for d in docs]


def _grams(tokens: list[str], n: int) -> list[str]:
    if n == 1:
        return tokens
    return ["_".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def build_vocabulary(
    docs: Sequence[str],
    min_df: int = 5,
    token_filter: Callable[[str], bool] | None = None,
    stopwords: Iterable[str] | None = None,
) -> Vocabulary:
    """Collect terms with document frequency >= ``min_df``.

    Stopwords are removed before counting; ``token_filter`` (if given) must
    return True for a token to be kept.  Raises ValueError when no term
    survives.
    """
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    stop = frozenset(stopwords) if stopwords else frozenset()
    df_counter: Counter[str] = Counter()
    for toks in _doc_tokens(docs):
        seen = {t for t in toks if t not in stop}
        if token_filter is not None:
            seen = {t for t in seen if token_filter(t)}
        df_counter.update(seen)
    terms = sorted(t for t, c in df_counter.items() if c >= min_df)
    if not terms:
        raise ValueError("no terms survive the vocabulary thresholds")
    return Vocabulary(tuple(terms), tuple(df_counter[t] for t in terms), len(docs))


def _count_matrix(
    token_docs: list[list[str]], vocab: Vocabulary, n: int = 1
) -> sp.csr_matrix:
    idx = vocab.index()
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for toks in token_docs:
        counts = Counter(g for g in _grams(toks, n) if g in idx)
        cols = sorted(idx[g] for g in counts)
        indices.extend(cols)
        # iterate in the same sorted order to keep data aligned with indices
        inv = {idx[g]: c for g, c in counts.items()}
        data.extend(float(inv[c]) for c in cols)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (data, indices, indptr), shape=(len(token_docs), len(vocab)), dtype=np.float64
    )


def tfidf(docs: Sequence[str], vocab: Vocabulary) -> sp.csr_matrix:
    """Raw term count times ``ln(n_docs / df) + 1``, no normalization.

    Documents without any vocabulary term yield all-zero rows.  ``n_docs``
    and ``df`` come from the vocabulary, not from ``docs``, so the weighting
    is stable when transforming held-out documents.
    """
    counts = _count_matrix(_doc_tokens(docs), vocab)
    df = np.asarray(vocab.df, dtype=np.float64)
    idf = np.log(vocab.n_docs / df) + 1.0
    return counts.multiply(sp.csr_matrix(idf)).tocsr()


def ngram_features(
    docs: Sequence[str], n: int, min_df: int = 3
) -> tuple[sp.csr_matrix, Vocabulary]:
    """Count matrix over contiguous ``n``-grams (terms joined with ``_``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    token_docs = _doc_tokens(docs)
    df_counter: Counter[str] = Counter()
    for toks in token_docs:
        df_counter.update(set(_grams(toks, n)))
    terms = sorted(t for t, c in df_counter.items() if c >= min_df)
    if not terms:
        raise ValueError("no n-grams survive the min_df threshold")
    vocab = Vocabulary(
        tuple(terms), tuple(df_counter[t] for t in terms), len(token_docs)
    )
    return _count_matrix(token_docs, vocab, n), vocab


class TfidfEncoder(BaseEstimator, TransformerMixin):
    """Estimator wrapper around :func:`build_vocabulary` + :func:`tfidf`."""

    def __init__(self, min_df: int = 5, stopwords=None, token_filter=None):
        self.min_df = min_df
        self.stopwords = stopwords
        self.token_filter = token_filter

    def fit(self, docs, y=None):
        self.vocabulary_ = build_vocabulary(
            docs, self.min_df, self.token_filter, self.stopwords
        )
        return self

    def transform(self, docs) -> sp.csr_matrix:
        if not hasattr(self, "vocabulary_"):
            raise ValueError("TfidfEncoder is not fitted yet; call fit first")
        return tfidf(docs, self.vocabulary_)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.vocabulary_.terms, dtype=object)


class NgramCounter(BaseEstimator, TransformerMixin):
    """Estimator wrapper around :func:`ngram_features`."""

    def __init__(self, n: int = 1, min_df: int = 3):
        self.n = n
        self.min_df = min_df

    def fit(self, docs, y=None):
        _, self.vocabulary_ = ngram_features(docs, self.n, self.min_df)
        return self

    def transform(self, docs) -> sp.csr_matrix:
        if not hasattr(self, "vocabulary_"):
            raise ValueError("NgramCounter is not fitted yet; call fit first")
        return _count_matrix(_doc_tokens(docs), self.vocabulary_, self.n)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.vocabulary_.terms, dtype=object)
