"""End-to-end analyses over a request corpus.

Each study takes corpora (already split where relevant), runs extraction,
encoding, fitting, and testing, and returns a report object that can be
serialized to JSON and CSV.  Statistics that parametrize encoders or model
selection are always computed on the development split alone.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import features as F
from . import glm
from .corpus import Corpus, DEFAULT_COMMUNITY, karma_at
from .similarity import GiverReceiverPair
from .stats import binomial_test, delong_test, mann_whitney_u, pearson_r, roc_auc
from .textkit import ngram_features, tfidf, build_vocabulary, _count_matrix, _doc_tokens
from .topics import TopicModel, fit_nmf, top_terms, topic_success_rates

__all__ = [
    "significance_stars",
    "RegressionStudy",
    "run_regression_study",
    "PredictionStudy",
    "run_prediction_study",
    "ReciprocityStudy",
    "run_reciprocity_study",
    "TopicStudy",
    "run_topic_study",
    "CurveSet",
    "run_interpretation_curves",
    "FEATURE_SET_NAMES",
    "TEXT_FEATURES",
    "SOCIAL_FEATURES",
    "TEMPORAL_FEATURES",
]

TEXT_FEATURES = (
    "narrative_craving_decile",
    "narrative_family_decile",
    "narrative_job_decile",
    "narrative_money_decile",
    "narrative_student_decile",
    "gratitude",
    "reciprocity",
    "image",
    "length_100w",
)
SOCIAL_FEATURES = ("karma_decile", "posted_before")
TEMPORAL_FEATURES = ("community_age_decile", "first_half_month")

FEATURE_SET_NAMES = (
    "random",
    "unigram",
    "bigram",
    "trigram",
    "text",
    "social",
    "temporal",
    "temporal+social",
    "temporal+social+text",
    "temporal+social+text+unigram",
)


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _request_text(r) -> str:
    return f"{r.title}\n{r.body}" if r.title else r.body


# ---------------------------------------------------------------------------
# regression study


@dataclass
class RegressionStudy:
    """Unpenalized coefficient table with drop-one likelihood-ratio tests."""

    artifact: glm.ModelArtifact
    rows: list[dict]  # feature, estimate, p, stars
    aggregates: dict
    correlations: dict

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            ["feature", "estimate", "p_value", "stars"],
            [
                [
                    r["feature"],
                    f"{r['estimate']:.4f}",
                    "" if r["p"] is None else f"{r['p']:.6g}",
                    r["stars"],
                ]
                for r in self.rows
            ],
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "rows": self.rows,
                "aggregates": self.aggregates,
                "correlations": self.correlations,
            },
            indent=2,
        )


def run_regression_study(
    dev_corpus: Corpus,
    community: str = DEFAULT_COMMUNITY,
    count_comments: bool = True,
    tol: float = 1e-8,
    max_iters: int = 10000,
) -> RegressionStudy:
    """Fit the 15-feature success model on the development split at zero
    penalty and test each feature by a drop-one likelihood ratio."""
    raws = [F.extract_raw(r, dev_corpus, community=community, count_comments=count_comments) for r in dev_corpus.requests]
    y = np.array([float(r.success) for r in dev_corpus.requests])
    meta = F.fit_encoder(raws)
    X, names = F.encode_matrix(raws, meta, "regression")
    model = glm.fit_model(X, y, names, l1_penalty=0.0, max_iters=max_iters, tol=tol)

    rows = [
        {
            "feature": "(intercept)",
            "estimate": model.intercept,
            "p": None,
            "stars": "",
        }
    ]
    all_names = list(names)
    for name in names:
        reduced = [n for n in all_names if n != name]
        test = glm.likelihood_ratio_test(
            X, y, all_names, all_names, reduced, max_iters, tol, ll_full=model.log_likelihood
        )
        rows.append(
            {
                "feature": name,
                "estimate": model.coefficient(name),
                "p": test.p,
                "stars": significance_stars(test.p),
            }
        )

    first_half = np.array([r.first_half_month for r in raws], dtype=bool)
    order = np.argsort([req.created_at for req in dev_corpus.requests], kind="stable")
    tenth = max(len(order) // 10, 1)
    aggregates = {
        "n_requests": len(dev_corpus.requests),
        "success_rate": float(y.mean()),
        "first_half_success_rate": float(y[first_half].mean()) if first_half.any() else None,
        "second_half_success_rate": float(y[~first_half].mean()) if (~first_half).any() else None,
        "earliest_tenth_success_rate": float(y[order[:tenth]].mean()),
        "latest_tenth_success_rate": float(y[order[-tenth:]].mean()),
    }
    karma = np.array([r.karma for r in raws])
    age_days = np.array([r.account_age_days for r in raws])
    correlations = {}
    try:
        correlations["account_age_karma_r"] = pearson_r(age_days, karma)
    except ValueError:
        correlations["account_age_karma_r"] = None

    artifact = glm.ModelArtifact(
        model=model,
        encoder=meta,
        scheme="regression",
        schema_id=F.schema_id("regression", meta),
        epoch=dev_corpus.epoch,
        corpus_fingerprint=dev_corpus.fingerprint(),
        extra={"study": "regression", "n_dev": len(dev_corpus.requests)},
    )
    return RegressionStudy(artifact, rows, aggregates, correlations)


# ---------------------------------------------------------------------------
# prediction study


@dataclass
class PredictionStudy:
    """Held-out AUC per feature set plus paired AUC comparisons."""

    rows: list[dict]
    comparisons: list[dict]
    encoder_source: str

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            ["feature_set", "n_features", "l1_penalty", "cv_auc", "test_auc", "p_vs_random"],
            [
                [
                    r["feature_set"],
                    r["n_features"],
                    "" if r["l1_penalty"] is None else f"{r['l1_penalty']:.6g}",
                    "" if r["cv_auc"] is None else f"{r['cv_auc']:.4f}",
                    f"{r['test_auc']:.4f}",
                    "" if r["p_vs_random"] is None else f"{r['p_vs_random']:.3g}",
                ]
                for r in self.rows
            ],
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "rows": self.rows,
                "comparisons": self.comparisons,
                "encoder_source": self.encoder_source,
            },
            indent=2,
        )

    def auc(self, feature_set: str) -> float:
        for r in self.rows:
            if r["feature_set"] == feature_set:
                return r["test_auc"]
        raise KeyError(feature_set)


def _select_and_fit(Xdev, ydev, Xtest, n_folds, n_lambdas, seed, standardize):
    lam, cv_table = glm.select_l1_penalty(
        Xdev,
        ydev,
        n_folds=n_folds,
        n_lambdas=n_lambdas,
        seed=seed,
        standardize=standardize,
    )
    est = glm.L1Logistic(lam, max_iters=500, tol=1e-7, standardize=standardize)
    est.fit(Xdev, ydev)
    scores = est.decision_function(Xtest)
    best_cv = max(a for _, a in cv_table)
    return lam, best_cv, scores, est


def run_prediction_study(
    dev_corpus: Corpus,
    test_corpus: Corpus,
    seed: int = 0,
    n_folds: int = 5,
    n_lambdas: int = 6,
    ngram_min_df: int = 3,
    community: str = DEFAULT_COMMUNITY,
    count_comments: bool = True,
) -> PredictionStudy:
    """Compare feature families by held-out AUC.

    N-gram vocabularies, encoder statistics, and penalties are all chosen on
    the development split; the test split is only ever scored.  The paired
    comparisons quantify whether the full interpretable model differs from
    its text-only / history-only reductions and whether adding unigrams on
    top changes anything.
    """
    ydev = np.array([float(r.success) for r in dev_corpus.requests])
    ytest = np.array([float(r.success) for r in test_corpus.requests])
    raws_dev = [F.extract_raw(r, dev_corpus, community=community, count_comments=count_comments) for r in dev_corpus.requests]
    raws_test = [F.extract_raw(r, test_corpus, community=community, count_comments=count_comments) for r in test_corpus.requests]
    meta = F.fit_encoder(raws_dev)
    Xdev, names = F.encode_matrix(raws_dev, meta, "prediction")
    Xtest, _ = F.encode_matrix(raws_test, meta, "prediction")
    col = {n: i for i, n in enumerate(names)}

    docs_dev = [_request_text(r) for r in dev_corpus.requests]
    docs_test = [_request_text(r) for r in test_corpus.requests]

    def dense_set(feature_names):
        idx = [col[n] for n in feature_names]
        return Xdev[:, idx], Xtest[:, idx]

    rows: list[dict] = []
    scores_by_set: dict[str, np.ndarray] = {}

    # theoretical floor: constant scores tie every pair, rank AUC is 1/2
    const = np.zeros(len(ytest))
    rows.append(
        {
            "feature_set": "random",
            "n_features": 0,
            "l1_penalty": None,
            "cv_auc": None,
            "test_auc": roc_auc(const, ytest).auc,
            "p_vs_random": None,
        }
    )

    ngram_cache: dict[int, tuple] = {}
    for n, label in ((1, "unigram"), (2, "bigram"), (3, "trigram")):
        Xd, vocab = ngram_features(docs_dev, n, ngram_min_df)
        Xt = _count_matrix(_doc_tokens(docs_test), vocab, n)
        ngram_cache[n] = (Xd, Xt, vocab)
        lam, cv_auc, scores, _ = _select_and_fit(
            Xd, ydev, Xt, n_folds, n_lambdas, seed, standardize=False
        )
        scores_by_set[label] = scores
        rows.append(_prediction_row(label, Xd.shape[1], lam, cv_auc, scores, ytest))

    named_sets = {
        "text": TEXT_FEATURES,
        "social": SOCIAL_FEATURES,
        "temporal": TEMPORAL_FEATURES,
        "temporal+social": TEMPORAL_FEATURES + SOCIAL_FEATURES,
        "temporal+social+text": TEMPORAL_FEATURES + SOCIAL_FEATURES + TEXT_FEATURES,
    }
    for label, fnames in named_sets.items():
        Xd, Xt = dense_set(fnames)
        lam, cv_auc, scores, _ = _select_and_fit(
            Xd, ydev, Xt, n_folds, n_lambdas, seed, standardize=True
        )
        scores_by_set[label] = scores
        rows.append(_prediction_row(label, Xd.shape[1], lam, cv_auc, scores, ytest))

    # full interpretable model plus unigram counts
    Xd_uni, Xt_uni, _ = ngram_cache[1]
    full_idx = [col[n] for n in named_sets["temporal+social+text"]]
    Xd_mix = sp.hstack([sp.csr_matrix(Xdev[:, full_idx]), Xd_uni]).tocsr()
    Xt_mix = sp.hstack([sp.csr_matrix(Xtest[:, full_idx]), Xt_uni]).tocsr()
    label = "temporal+social+text+unigram"
    lam, cv_auc, scores, _ = _select_and_fit(
        Xd_mix, ydev, Xt_mix, n_folds, n_lambdas, seed, standardize=False
    )
    scores_by_set[label] = scores
    rows.append(_prediction_row(label, Xd_mix.shape[1], lam, cv_auc, scores, ytest))

    comparisons = []
    for a, b in (
        ("temporal+social+text", "text"),
        ("temporal+social+text", "temporal+social"),
        ("temporal+social+text+unigram", "temporal+social+text"),
    ):
        t = delong_test(scores_by_set[a], scores_by_set[b], ytest)
        comparisons.append(
            {
                "model_a": a,
                "model_b": b,
                "z": t.statistic,
                "p": t.p,
                "stars": significance_stars(t.p),
            }
        )
    return PredictionStudy(rows=rows, comparisons=comparisons, encoder_source=meta.source)


def _prediction_row(label, n_features, lam, cv_auc, scores, ytest) -> dict:
    pos = scores[ytest > 0.5]
    neg = scores[ytest <= 0.5]
    mw = mann_whitney_u(pos, neg, alternative="greater")
    return {
        "feature_set": label,
        "n_features": int(n_features),
        "l1_penalty": float(lam),
        "cv_auc": float(cv_auc),
        "test_auc": roc_auc(scores, ytest).auc,
        "p_vs_random": mw.p,
    }


# ---------------------------------------------------------------------------
# reciprocity study


@dataclass
class ReciprocityStudy:
    """Do successful receivers give later, and who does it most?"""

    mode: str
    n_successful: int
    baseline_rate: float
    subgroups: list[dict]
    correlations: dict

    def to_csv(self, path) -> None:
        _write_csv(
            path,
            ["subgroup", "n", "rate", "p_one_sided", "stars"],
            [
                [
                    "all successful",
                    self.n_successful,
                    f"{self.baseline_rate:.4f}",
                    "",
                    "",
                ]
            ]
            + [
                [
                    s["subgroup"],
                    s["n"],
                    f"{s['rate']:.4f}" if s["rate"] is not None else "",
                    f"{s['p']:.4g}" if s["p"] is not None else "",
                    s["stars"],
                ]
                for s in self.subgroups
            ],
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "mode": self.mode,
                "n_successful": self.n_successful,
                "baseline_rate": self.baseline_rate,
                "subgroups": self.subgroups,
                "correlations": self.correlations,
            },
            indent=2,
        )


def run_reciprocity_study(
    corpus: Corpus,
    pairs: Sequence[GiverReceiverPair] | None = None,
    mode: str | None = None,
    community: str = DEFAULT_COMMUNITY,
    top_karma_quantile: float = 0.8,
) -> ReciprocityStudy:
    """Rates of later giving among successful requesters.

    A successful requester "reciprocates" when they appear as a giver on a
    later request (``mode='givers'``, needs giver identities) or, as a
    fallback proxy, when they post again in the community after their own
    request (``mode='community_activity'``).  Subgroup rates (promised to
    repay, expressed gratitude, high-karma) are tested one-sided against the
    baseline.
    """
    successful = [r for r in corpus.requests if r.success]
    if not successful:
        raise ValueError("no successful requests")
    if mode is None:
        mode = "givers" if pairs else "community_activity"
    if mode == "givers":
        if not pairs:
            raise ValueError("mode='givers' requires observed pairs")
        gives: dict[str, list[int]] = {}
        for p in pairs:
            gives.setdefault(p.giver, []).append(p.created_at)
        def reciprocated(r):
            return any(t > r.created_at for t in gives.get(r.requester, ()))
    elif mode == "community_activity":
        def reciprocated(r):
            hist = corpus.user_history(r.requester)
            if hist is None:
                return False
            return any(
                e.created_at > r.created_at
                and e.kind == "post"
                and e.subreddit.lower() == community.lower()
                for e in hist.events
            )
    else:
        raise ValueError("mode must be 'givers' or 'community_activity'")

    flags = np.array([reciprocated(r) for r in successful], dtype=bool)
    baseline = float(flags.mean())

    def subgroup(name, mask):
        n = int(mask.sum())
        if n == 0:
            return {"subgroup": name, "n": 0, "rate": None, "p": None, "stars": ""}
        k = int(flags[mask].sum())
        rate = k / n
        if 0.0 < baseline < 1.0:
            p = binomial_test(k, n, baseline, alternative="greater").p
        else:
            p = None
        return {
            "subgroup": name,
            "n": n,
            "rate": rate,
            "p": p,
            "stars": significance_stars(p) if p is not None else "",
        }

    promised = np.array(
        [F.detect_reciprocity(_request_text(r)) for r in successful], dtype=bool
    )
    grateful = np.array(
        [F.detect_gratitude(_request_text(r)) for r in successful], dtype=bool
    )
    karma = np.array(
        [karma_at(corpus, r.requester, r.created_at) for r in successful],
        dtype=np.float64,
    )
    thresh = float(np.quantile(karma, top_karma_quantile))
    high_karma = karma > thresh

    subgroups = [
        subgroup("promised to repay", promised),
        subgroup("expressed gratitude", grateful),
        subgroup(f"karma top {round((1 - top_karma_quantile) * 100)}%", high_karma),
    ]

    correlations = {}
    pos_fracs = []
    lengths = []
    for r in successful:
        raw = F.extract_raw(r, corpus, community=community)
        pos_fracs.append(raw.pos_sentence_frac)
        lengths.append(raw.n_words)
    for key, vals in (("pos_sentiment_r", pos_fracs), ("length_r", lengths)):
        try:
            correlations[key] = pearson_r(np.asarray(vals), flags.astype(float))
        except ValueError:
            correlations[key] = None

    return ReciprocityStudy(
        mode=mode,
        n_successful=len(successful),
        baseline_rate=baseline,
        subgroups=subgroups,
        correlations=correlations,
    )


# ---------------------------------------------------------------------------
# topic study


@dataclass
class TopicStudy:
    model: TopicModel
    rates: dict[int, float]
    counts: dict[int, int]
    terms: list[list[str]]
    overall_rate: float

    def to_csv(self, path) -> None:
        rows = []
        for t in range(self.model.k):
            rows.append(
                [
                    t,
                    self.counts.get(t, 0),
                    f"{self.rates[t]:.4f}" if t in self.rates else "",
                    " ".join(self.terms[t]),
                ]
            )
        _write_csv(path, ["topic_id", "n_requests", "success_rate", "top_terms"], rows)


def run_topic_study(
    corpus: Corpus,
    k: int = 10,
    target_sparseness: float | None = 0.5,
    min_df: int = 5,
    m_top: int = 15,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-5,
    stopwords=None,
) -> TopicStudy:
    """TF-IDF + sparse NMF topics over request bodies, with per-topic
    success rates (dominant-topic assignment)."""
    docs = [r.body for r in corpus.requests]
    stop = stopwords if stopwords is not None else F.load_stopwords()
    vocab = build_vocabulary(docs, min_df=min_df, stopwords=stop)
    X = tfidf(docs, vocab)
    model = fit_nmf(
        X,
        vocab,
        k=k,
        target_sparseness=target_sparseness,
        max_iters=max_iters,
        tol=tol,
        seed=seed,
    )
    y = [float(r.success) for r in corpus.requests]
    rates = topic_success_rates(model, y)
    dominant = np.argmax(model.W, axis=1)
    counts = {t: int((dominant == t).sum()) for t in range(k) if (dominant == t).any()}
    return TopicStudy(
        model=model,
        rates=rates,
        counts=counts,
        terms=top_terms(model, m_top),
        overall_rate=float(np.mean(y)),
    )


# ---------------------------------------------------------------------------
# interpretation curves


@dataclass
class CurveSet:
    """Model-implied success probabilities along interpretable sweeps."""

    length_words: np.ndarray
    length_curves: dict[str, np.ndarray]  # narrative -> probability
    karma_deciles: np.ndarray
    karma_curve: np.ndarray
    reference: dict

    def to_csv(self, path_length, path_karma) -> None:
        header = ["words"] + list(self.length_curves)
        rows = [
            [int(w)] + [f"{self.length_curves[n][i]:.6f}" for n in self.length_curves]
            for i, w in enumerate(self.length_words)
        ]
        _write_csv(path_length, header, rows)
        _write_csv(
            path_karma,
            ["karma_decile", "probability"],
            [
                [int(d), f"{self.karma_curve[i]:.6f}"]
                for i, d in enumerate(self.karma_deciles)
            ],
        )


def run_interpretation_curves(
    artifact: glm.ModelArtifact,
    max_words: int = 300,
    step: int = 5,
) -> CurveSet:
    """Sweeps of the fitted regression model.

    Length curves: one narrative active at a time, word count swept from 0
    to ``max_words``, karma and community age pinned at the decile codes of
    their development-split medians.  Karma curve: deciles 1..10 at the
    median request length.  All other binaries are off.
    """
    if artifact.scheme != "regression":
        raise ValueError("interpretation curves need a regression-scheme artifact")
    meta = artifact.encoder
    model = artifact.model
    karma_code = F.decile_code(meta.medians["karma"], meta.deciles["karma"])
    age_code = F.decile_code(
        meta.medians["community_age_months"], meta.deciles["community_age_months"]
    )
    median_words = meta.medians["n_words"]

    def base_values() -> dict[str, float]:
        vals = {n: 0.0 for n in model.feature_names}
        vals["community_age_decile"] = float(age_code)
        vals["karma_decile"] = float(karma_code)
        return vals

    words = np.arange(0, max_words + 1, step, dtype=np.float64)
    length_curves: dict[str, np.ndarray] = {}
    for name in ("job", "family", "money", "student", "craving"):
        probs = np.empty(len(words))
        for i, w in enumerate(words):
            vals = base_values()
            vals[f"narrative_{name}"] = 1.0
            vals["length_100w"] = w / 100.0
            probs[i] = glm.predict_probability(
                model, F.FeatureVector(artifact.schema_id, vals)
            )
        length_curves[name] = probs

    deciles = np.arange(1, 11, dtype=np.float64)
    karma_curve = np.empty(len(deciles))
    for i, d in enumerate(deciles):
        vals = base_values()
        vals["karma_decile"] = float(d)
        vals["length_100w"] = median_words / 100.0
        karma_curve[i] = glm.predict_probability(
            model, F.FeatureVector(artifact.schema_id, vals)
        )

    return CurveSet(
        length_words=words,
        length_curves=length_curves,
        karma_deciles=deciles,
        karma_curve=karma_curve,
        reference={
            "karma_decile": karma_code,
            "community_age_decile": age_code,
            "median_words": median_words,
        },
    )
