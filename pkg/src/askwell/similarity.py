"""Giver-receiver interest similarity versus a rewired null model.

For each observed (giver, receiver) pair, similarity is computed over the
subreddit sets both users touched strictly before the request.  The null
model draws uniform giver-receiver combinations from the same populations,
excluding pairs that actually occurred (and self-pairs), so any systematic
excess similarity in the observed pairs is attributable to matching, not to
the populations themselves.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, subreddit_set_before
from .stats import KdeResult, TestResult, gaussian_kde, mann_whitney_u

__all__ = [
    "GiverReceiverPair",
    "load_pairs",
    "pairs_from_corpus",
    "pair_similarity",
    "null_pairs",
    "SimilarityStudy",
    "run_similarity_study",
]

DEFAULT_BANDWIDTHS = {"intersection": 0.5, "jaccard": 0.03}


@dataclass(frozen=True)
class GiverReceiverPair:
    """An observed giving event: who gave, who received, for which request."""

    request_id: str
    giver: str
    receiver: str
    created_at: int

    def __post_init__(self):
        if self.giver == self.receiver:
            raise ValueError(f"pair for {self.request_id}: giver equals receiver")


def load_pairs(path) -> list[GiverReceiverPair]:
    """Read pairs from JSONL: request_id, giver, receiver, created_at."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out.append(
                GiverReceiverPair(
                    request_id=str(d["request_id"]),
                    giver=str(d["giver"]),
                    receiver=str(d["receiver"]),
                    created_at=int(d["created_at"]),
                )
            )
    return out


def pairs_from_corpus(corpus: Corpus) -> list[GiverReceiverPair]:
    """Pairs for every request with a known giver (self-gifts skipped)."""
    out = []
    for r in corpus.requests:
        if r.giver is not None and r.giver != r.requester:
            out.append(GiverReceiverPair(r.id, r.giver, r.requester, r.created_at))
    return out


def pair_similarity(
    giver_subs: frozenset[str], receiver_subs: frozenset[str], metric: str = "intersection"
) -> float:
    """Shared-interest score between two subreddit sets.

    ``intersection`` counts shared communities; ``jaccard`` normalizes by
    the union and is 0 when both sets are empty.
    """
    if metric == "intersection":
        return float(len(giver_subs & receiver_subs))
    if metric == "jaccard":
        union = giver_subs | receiver_subs
        if not union:
            return 0.0
        return len(giver_subs & receiver_subs) / len(union)
    raise ValueError("metric must be 'intersection' or 'jaccard'")


def null_pairs(
    pairs: Sequence[GiverReceiverPair],
    n_samples: int,
    seed: int = 0,
    degree_preserving: bool = False,
) -> tuple[list[GiverReceiverPair], bool]:
    """Rewired (giver, receiver) combinations that never actually occurred.

    Uniform sampling over givers x receivers minus the observed pairs and
    self-pairs; each sampled combination inherits the receiver's request
    (its id and timestamp), so similarity is evaluated at the same moment.
    ``degree_preserving=True`` permutes givers across requests instead,
    keeping each giver's giving count; collisions with observed pairs are
    re-drawn.  Returns (samples, with_replacement_flag); the flag is set
    when ``n_samples`` exceeds the universe of admissible combinations.
    """
    if not pairs:
        raise ValueError("no observed pairs to rewire")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    observed = {(p.giver, p.receiver) for p in pairs}
    by_receiver = {p.receiver: p for p in pairs}
    givers = sorted({p.giver for p in pairs})
    receivers = sorted(by_receiver)

    if degree_preserving:
        giver_list = [p.giver for p in pairs]
        out: list[GiverReceiverPair] = []
        for _ in range(200):
            perm = rng.permutation(len(pairs))
            ok = all(
                giver_list[perm[i]] != pairs[i].receiver
                and (giver_list[perm[i]], pairs[i].receiver) not in observed
                for i in range(len(pairs))
            )
            if ok:
                out = [
                    GiverReceiverPair(
                        pairs[i].request_id,
                        giver_list[perm[i]],
                        pairs[i].receiver,
                        pairs[i].created_at,
                    )
                    for i in range(len(pairs))
                ]
                break
        if not out:
            raise ValueError("could not find an admissible degree-preserving rewiring")
        reps = -(-n_samples // len(out))  # repeat whole rewirings if asked for more
        return (out * reps)[:n_samples], reps > 1

    universe = [
        (g, r)
        for g in givers
        for r in receivers
        if g != r and (g, r) not in observed
    ]
    if not universe:
        raise ValueError("populations too small to exclude the observed pairs")
    with_replacement = n_samples > len(universe)
    idx = (
        rng.integers(0, len(universe), size=n_samples)
        if with_replacement
        else rng.permutation(len(universe))[:n_samples]
    )
    out = []
    for i in idx:
        g, r = universe[i]
        anchor = by_receiver[r]
        out.append(GiverReceiverPair(anchor.request_id, g, r, anchor.created_at))
    return out, with_replacement


@dataclass
class SimilarityStudy:
    """Observed-vs-null similarity distributions and their rank test."""

    metric: str
    actual: np.ndarray
    null: np.ndarray
    test: TestResult
    kde_actual: KdeResult
    kde_null: KdeResult
    with_replacement: bool

    def summary(self) -> dict:
        return {
            "metric": self.metric,
            "n_actual": int(len(self.actual)),
            "n_null": int(len(self.null)),
            "mean_actual": float(self.actual.mean()),
            "mean_null": float(self.null.mean()),
            "u_statistic": self.test.statistic,
            "p_value": self.test.p,
            "tail": self.test.tail,
            "method": self.test.method,
            "null_sampled_with_replacement": self.with_replacement,
        }


def _similarities(
    corpus: Corpus, pairs: Iterable[GiverReceiverPair], metric: str
) -> np.ndarray:
    vals = []
    for p in pairs:
        g = subreddit_set_before(corpus, p.giver, p.created_at)
        r = subreddit_set_before(corpus, p.receiver, p.created_at)
        vals.append(pair_similarity(g, r, metric))
    return np.asarray(vals, dtype=np.float64)


def run_similarity_study(
    corpus: Corpus,
    pairs: Sequence[GiverReceiverPair],
    metric: str = "intersection",
    bandwidth: float | None = None,
    n_null: int | None = None,
    seed: int = 0,
    degree_preserving: bool = False,
    null_override: Sequence[GiverReceiverPair] | None = None,
) -> SimilarityStudy:
    """Compare observed pair similarity against the rewired null.

    ``null_override`` substitutes an explicit null sample (used by the
    no-signal control, which feeds the observed pairs as their own null).
    """
    if metric not in DEFAULT_BANDWIDTHS:
        raise ValueError("metric must be 'intersection' or 'jaccard'")
    if not pairs:
        raise ValueError("no pairs to analyze")
    h = DEFAULT_BANDWIDTHS[metric] if bandwidth is None else float(bandwidth)
    if null_override is not None:
        null_sample, with_repl = list(null_override), False
    else:
        n = n_null if n_null is not None else 10 * len(pairs)
        null_sample, with_repl = null_pairs(pairs, n, seed, degree_preserving)
    actual = _similarities(corpus, pairs, metric)
    null = _similarities(corpus, null_sample, metric)
    test = mann_whitney_u(actual, null, alternative="two-sided")
    return SimilarityStudy(
        metric=metric,
        actual=actual,
        null=null,
        test=test,
        kde_actual=gaussian_kde(actual, h),
        kde_null=gaussian_kde(null, h),
        with_replacement=with_repl,
    )
