"""Request feature extraction and encoding.

Two stages, deliberately separated:

1. ``extract_raw``: text detectors and point-in-time history lookups produce
   a :class:`RawFeatures` record per request.  No corpus statistics enter
   here.
2. ``fit_encoder`` / ``encode``: medians and decile boundaries estimated on
   the development split only (:class:`EncoderMeta`) turn raw records into
   model-ready vectors.  Encoding held-out or live requests reuses the
   frozen meta, so no statistic ever leaks from evaluation data.

Narrative and sentiment fractions are computed over the request body; the
boolean detectors (gratitude, reciprocity, image, emoticon) scan title and
body so a link or thank-you in the title still counts.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import (
    Corpus,
    RequestRecord,
    DEFAULT_COMMUNITY,
    first_activity_at,
    karma_at,
    posted_in_community_before,
)
from .textkit import load_wordlist, tokenize, word_count

__all__ = [
    "NARRATIVES",
    "load_narrative_lexicons",
    "load_sentiment_lexicons",
    "load_stopwords",
    "detect_narratives",
    "detect_gratitude",
    "detect_reciprocity",
    "detect_image",
    "sentiment_features",
    "temporal_features",
    "RawFeatures",
    "extract_raw",
    "extract_raw_draft",
    "EncoderMeta",
    "fit_encoder",
    "encode",
    "encode_matrix",
    "FeatureVector",
    "FeatureEncoder",
    "REGRESSION_FEATURES",
    "PREDICTION_FEATURES",
]

NARRATIVES = ("money", "job", "student", "family", "craving")

# Canonical detector patterns (applied to lowercased text).
RECIPROCITY_PATTERNS = (
    r"\bpay(?:ing)?\s+(?:it|this)\s+(?:forward|back)\b",
    r"\breturn\s+the\s+favor\b",
)
IMAGE_URL_PATTERN = r"https?://[^\s?]+\.(?:jpe?g|png|gif)(?:\?\S*)?"
IMGUR_PATTERN = r"https?://(?:[\w-]+\.)?imgur\.com/\S+"
EMOTICON_PATTERN = r"[:;=]['\-]?[()DPp](?![A-Za-z])"

GRATITUDE_TOKENS = frozenset(
    ["thank", "thanks", "thankful", "grateful", "gratitude", "appreciate", "appreciated"]
)

_RECIPROCITY_RE = [re.compile(p) for p in RECIPROCITY_PATTERNS]
_IMAGE_RE = re.compile(f"(?:{IMAGE_URL_PATTERN})|(?:{IMGUR_PATTERN})", re.IGNORECASE)
_EMOTICON_RE = re.compile(EMOTICON_PATTERN)
_SENTENCE_SPLIT_RE = re.compile(r"[.!?;\n]+")


def _read_packaged(name: str) -> frozenset[str]:
    ref = resources.files("askwell.data").joinpath(name)
    return frozenset(
        line.strip().lower()
        for line in ref.read_text(encoding="utf-8").splitlines()
        if line.strip()
    )


def load_narrative_lexicons(paths: Mapping[str, str] | None = None) -> dict[str, frozenset[str]]:
    """The five narrative word lists; ``paths`` overrides individual files."""
    out = {}
    for name in NARRATIVES:
        if paths and name in paths:
            out[name] = load_wordlist(paths[name])
        else:
            out[name] = _read_packaged(f"narrative_{name}.txt")
    return out


def load_sentiment_lexicons(
    positive_path=None, negative_path=None
) -> tuple[frozenset[str], frozenset[str]]:
    pos = load_wordlist(positive_path) if positive_path else _read_packaged("sentiment_positive.txt")
    neg = load_wordlist(negative_path) if negative_path else _read_packaged("sentiment_negative.txt")
    return pos, neg


def load_stopwords(path=None) -> frozenset[str]:
    return load_wordlist(path) if path else _read_packaged("stopwords.txt")


def detect_narratives(
    text: str, lexicons: Mapping[str, Iterable[str]]
) -> dict[str, tuple[int, float]]:
    """Per narrative: (token hits, hits / word count).  Empty text gives 0s."""
    toks = tokenize(text)
    n = len(toks)
    out = {}
    for name, words in lexicons.items():
        wordset = words if isinstance(words, frozenset) else frozenset(words)
        count = sum(1 for t in toks if t in wordset)
        out[name] = (count, count / n if n else 0.0)
    return out


def detect_gratitude(text: str) -> bool:
    """Any gratitude cue token (thank/thanks/thankful/grateful/...)."""
    return any(t in GRATITUDE_TOKENS for t in tokenize(text))


def detect_reciprocity(text: str) -> bool:
    """Promise to repay: 'pay it/this forward/back' or 'return the favor'."""
    low = text.lower()
    return any(rx.search(low) for rx in _RECIPROCITY_RE)


def detect_image(text: str) -> bool:
    """URL whose path ends in an image extension, or any imgur link."""
    return bool(_IMAGE_RE.search(text))


def detect_emoticon(text: str) -> bool:
    return bool(_EMOTICON_RE.search(text))


def sentiment_features(
    text: str, pos_lexicon: frozenset[str], neg_lexicon: frozenset[str]
) -> dict[str, float]:
    """Sentence- and word-level sentiment fractions plus emoticon presence.

    A sentence (split on ``.!?;`` and newlines) is positive when it has more
    positive than negative lexicon tokens, negative in the mirror case.
    Fractions are over non-empty sentences / total tokens; zero when there
    are none.
    """
    sentences = [s for s in _SENTENCE_SPLIT_RE.split(text) if tokenize(s)]
    pos_s = neg_s = 0
    for s in sentences:
        toks = tokenize(s)
        p = sum(1 for t in toks if t in pos_lexicon)
        m = sum(1 for t in toks if t in neg_lexicon)
        if p > m:
            pos_s += 1
        elif m > p:
            neg_s += 1
    toks = tokenize(text)
    n = len(toks)
    pos_w = sum(1 for t in toks if t in pos_lexicon)
    neg_w = sum(1 for t in toks if t in neg_lexicon)
    n_s = len(sentences)
    return {
        "pos_sentence_frac": pos_s / n_s if n_s else 0.0,
        "neg_sentence_frac": neg_s / n_s if n_s else 0.0,
        "pos_word_frac": pos_w / n if n else 0.0,
        "neg_word_frac": neg_w / n if n else 0.0,
        "has_emoticon": float(detect_emoticon(text)),
    }


def _months_between(epoch: int, t: int) -> int:
    d0 = datetime.fromtimestamp(epoch, tz=timezone.utc)
    d1 = datetime.fromtimestamp(t, tz=timezone.utc)
    months = (d1.year - d0.year) * 12 + (d1.month - d0.month)
    anchor0 = (d0.day, d0.hour, d0.minute, d0.second)
    anchor1 = (d1.day, d1.hour, d1.minute, d1.second)
    if anchor1 < anchor0:
        months -= 1
    return months


def temporal_features(created_at: int, epoch: int) -> dict[str, int]:
    """Calendar features (UTC): community age in whole months, month, weekday
    (0=Monday), hour, day of month, and first-half-of-month (day <= 15)."""
    if created_at < epoch:
        raise ValueError("created_at precedes the community epoch")
    d = datetime.fromtimestamp(created_at, tz=timezone.utc)
    return {
        "community_age_months": _months_between(epoch, created_at),
        "month": d.month,
        "weekday": d.weekday(),
        "hour": d.hour,
        "day_of_month": d.day,
        "first_half_month": int(d.day <= 15),
    }


@dataclass(frozen=True)
class RawFeatures:
    """Everything measured about one request before any corpus statistics."""

    narrative_frac: dict[str, float]
    gratitude: bool
    reciprocity: bool
    has_image: bool
    pos_sentence_frac: float
    neg_sentence_frac: float
    pos_word_frac: float
    neg_word_frac: float
    has_emoticon: bool
    n_words: int
    karma: float
    posted_before: bool
    account_age_days: float
    community_age_months: int
    first_half_month: int
    month: int
    weekday: int
    hour: int
    day_of_month: int

    def __post_init__(self):
        for name, frac in self.narrative_frac.items():
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"narrative fraction out of range for {name}: {frac}")
        for frac in (
            self.pos_sentence_frac,
            self.neg_sentence_frac,
            self.pos_word_frac,
            self.neg_word_frac,
        ):
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"sentiment fraction out of range: {frac}")


@dataclass
class _LexiconBundle:
    narratives: dict[str, frozenset[str]]
    positive: frozenset[str]
    negative: frozenset[str]

    @classmethod
    def default(cls) -> "_LexiconBundle":
        pos, neg = load_sentiment_lexicons()
        return cls(load_narrative_lexicons(), pos, neg)


_DEFAULT_LEXICONS: _LexiconBundle | None = None


def _lexicons(bundle: _LexiconBundle | None) -> _LexiconBundle:
    global _DEFAULT_LEXICONS
    if bundle is not None:
        return bundle
    if _DEFAULT_LEXICONS is None:
        _DEFAULT_LEXICONS = _LexiconBundle.default()
    return _DEFAULT_LEXICONS


def _raw_from_text(
    title: str,
    body: str,
    lex: _LexiconBundle,
    karma: float,
    posted_before: bool,
    account_age_days: float,
    created_at: int,
    epoch: int,
) -> RawFeatures:
    both = f"{title}\n{body}" if title else body
    narr = detect_narratives(body, lex.narratives)
    senti = sentiment_features(body, lex.positive, lex.negative)
    temporal = temporal_features(created_at, epoch)
    return RawFeatures(
        narrative_frac={k: v[1] for k, v in narr.items()},
        gratitude=detect_gratitude(both),
        reciprocity=detect_reciprocity(both),
        has_image=detect_image(both),
        pos_sentence_frac=senti["pos_sentence_frac"],
        neg_sentence_frac=senti["neg_sentence_frac"],
        pos_word_frac=senti["pos_word_frac"],
        neg_word_frac=senti["neg_word_frac"],
        has_emoticon=bool(senti["has_emoticon"]) or detect_emoticon(both),
        n_words=word_count(body),
        karma=float(karma),
        posted_before=bool(posted_before),
        account_age_days=float(account_age_days),
        community_age_months=temporal["community_age_months"],
        first_half_month=temporal["first_half_month"],
        month=temporal["month"],
        weekday=temporal["weekday"],
        hour=temporal["hour"],
        day_of_month=temporal["day_of_month"],
    )


def extract_raw(
    request: RequestRecord,
    corpus: Corpus,
    lexicons: _LexiconBundle | None = None,
    community: str = DEFAULT_COMMUNITY,
    count_comments: bool = True,
) -> RawFeatures:
    """Raw features for a corpus request (history cut strictly before it)."""
    lex = _lexicons(lexicons)
    t = request.created_at
    first = first_activity_at(corpus, request.requester)
    age_days = max((t - first) / 86400.0, 0.0) if first is not None else 0.0
    return _raw_from_text(
        request.title,
        request.body,
        lex,
        karma=karma_at(corpus, request.requester, t),
        posted_before=posted_in_community_before(
            corpus, request.requester, t, community, count_comments
        ),
        account_age_days=age_days,
        created_at=t,
        epoch=corpus.epoch,
    )


def extract_raw_draft(
    title: str,
    body: str,
    epoch: int,
    created_at: int,
    karma: float = 0.0,
    posted_before: bool = False,
    account_age_days: float = 0.0,
    lexicons: _LexiconBundle | None = None,
) -> RawFeatures:
    """Raw features for a live draft, with caller-supplied user context."""
    return _raw_from_text(
        title,
        body,
        _lexicons(lexicons),
        karma=karma,
        posted_before=posted_before,
        account_age_days=account_age_days,
        created_at=created_at,
        epoch=epoch,
    )


# ---------------------------------------------------------------------------
# encoding

_DECILE_FEATURES = ("karma", "community_age_months") + tuple(
    f"narrative_{n}_frac" for n in NARRATIVES
)
_MEDIAN_FEATURES = _DECILE_FEATURES + (
    "pos_sentence_frac",
    "neg_sentence_frac",
    "pos_word_frac",
    "neg_word_frac",
    "n_words",
    "account_age_days",
)

REGRESSION_FEATURES: tuple[str, ...] = (
    "community_age_decile",
    "first_half_month",
    "gratitude",
    "image",
    "reciprocity",
    "pos_sentiment",
    "neg_sentiment",
    "length_100w",
    "karma_decile",
    "posted_before",
    "narrative_craving",
    "narrative_family",
    "narrative_job",
    "narrative_money",
    "narrative_student",
)

PREDICTION_FEATURES: tuple[str, ...] = tuple(
    f"{n}_decile" if n.startswith("narrative_") else n for n in REGRESSION_FEATURES
)


def _raw_value(raw: RawFeatures, key: str) -> float:
    if key.startswith("narrative_") and key.endswith("_frac"):
        return raw.narrative_frac[key[len("narrative_") : -len("_frac")]]
    return float(getattr(raw, key))


@dataclass(frozen=True)
class EncoderMeta:
    """Frozen encoding statistics fitted on the development split only.

    ``medians`` holds per-feature medians; ``deciles`` the nine decile
    boundaries (10th..90th percentile, linear interpolation) for
    decile-coded features.  ``source`` fingerprints the fitting data.
    """

    medians: dict[str, float]
    deciles: dict[str, tuple[float, ...]]
    source: str

    def __post_init__(self):
        for key, cuts in self.deciles.items():
            if len(cuts) != 9:
                raise ValueError(f"{key}: expected 9 decile boundaries")
            if list(cuts) != sorted(cuts):
                raise ValueError(f"{key}: decile boundaries must be non-decreasing")

    def to_dict(self) -> dict:
        return {
            "medians": dict(self.medians),
            "deciles": {k: list(v) for k, v in self.deciles.items()},
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EncoderMeta":
        return cls(
            medians={k: float(v) for k, v in d["medians"].items()},
            deciles={k: tuple(float(x) for x in v) for k, v in d["deciles"].items()},
            source=str(d.get("source", "")),
        )


def fit_encoder(raws: Sequence[RawFeatures]) -> EncoderMeta:
    """Medians and decile boundaries from (development-split) raw features."""
    if not raws:
        raise ValueError("cannot fit an encoder on zero records")
    medians: dict[str, float] = {}
    deciles: dict[str, tuple[float, ...]] = {}
    h = hashlib.sha256()
    for key in _MEDIAN_FEATURES:
        vals = np.array([_raw_value(r, key) for r in raws], dtype=np.float64)
        medians[key] = float(np.median(vals))
        if key in _DECILE_FEATURES:
            deciles[key] = tuple(
                float(np.percentile(vals, q, method="linear"))
                for q in range(10, 100, 10)
            )
        h.update(vals.tobytes())
    return EncoderMeta(medians=medians, deciles=deciles, source=h.hexdigest()[:16])


def decile_code(value: float, boundaries: Sequence[float]) -> int:
    """1 + number of boundaries strictly below ``value`` (1..10)."""
    if len(boundaries) != 9:
        raise ValueError("expected 9 decile boundaries")
    return 1 + sum(1 for b in boundaries if b < value)


@dataclass(frozen=True)
class FeatureVector:
    """Ordered named feature values tied to an encoder by schema id."""

    schema_id: str
    values: dict[str, float]


def schema_id(scheme: str, meta: EncoderMeta) -> str:
    names = REGRESSION_FEATURES if scheme == "regression" else PREDICTION_FEATURES
    payload = "\x1f".join([scheme, *names, meta.source])
    return f"{scheme}:{hashlib.sha256(payload.encode()).hexdigest()[:12]}"


def encode(raw: RawFeatures, meta: EncoderMeta, scheme: str = "regression") -> FeatureVector:
    """Model-ready vector: binaries are strict median-threshold indicators,
    status/narrative intensities decile codes, length in hundreds of words.

    ``scheme='regression'`` emits binary narrative indicators;
    ``scheme='prediction'`` swaps them for decile codes of the narrative
    fractions.  Everything else is shared.
    """
    if scheme not in ("regression", "prediction"):
        raise ValueError("scheme must be 'regression' or 'prediction'")
    values: dict[str, float] = {
        "community_age_decile": float(
            decile_code(raw.community_age_months, meta.deciles["community_age_months"])
        ),
        "first_half_month": float(raw.first_half_month),
        "gratitude": float(raw.gratitude),
        "image": float(raw.has_image),
        "reciprocity": float(raw.reciprocity),
        "pos_sentiment": float(raw.pos_sentence_frac > meta.medians["pos_sentence_frac"]),
        "neg_sentiment": float(raw.neg_sentence_frac > meta.medians["neg_sentence_frac"]),
        "length_100w": raw.n_words / 100.0,
        "karma_decile": float(decile_code(raw.karma, meta.deciles["karma"])),
        "posted_before": float(raw.posted_before),
    }
    for name in NARRATIVES:
        frac = raw.narrative_frac[name]
        if scheme == "regression":
            values[f"narrative_{name}"] = float(
                frac > meta.medians[f"narrative_{name}_frac"]
            )
        else:
            values[f"narrative_{name}_decile"] = float(
                decile_code(frac, meta.deciles[f"narrative_{name}_frac"])
            )
    names = REGRESSION_FEATURES if scheme == "regression" else PREDICTION_FEATURES
    ordered = {n: values[n] for n in names}
    return FeatureVector(schema_id=schema_id(scheme, meta), values=ordered)


def encode_matrix(
    raws: Sequence[RawFeatures], meta: EncoderMeta, scheme: str = "regression"
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Stacked encoded vectors as (matrix, feature names)."""
    names = REGRESSION_FEATURES if scheme == "regression" else PREDICTION_FEATURES
    X = np.empty((len(raws), len(names)), dtype=np.float64)
    for i, raw in enumerate(raws):
        vec = encode(raw, meta, scheme)
        X[i] = [vec.values[n] for n in names]
    return X, names


class FeatureEncoder(BaseEstimator, TransformerMixin):
    """Estimator wrapper: fit learns :class:`EncoderMeta`, transform encodes."""

    def __init__(self, scheme: str = "regression"):
        self.scheme = scheme

    def fit(self, raws: Sequence[RawFeatures], y=None):
        self.meta_ = fit_encoder(raws)
        return self

    def transform(self, raws: Sequence[RawFeatures]) -> np.ndarray:
        if not hasattr(self, "meta_"):
            raise ValueError("FeatureEncoder is not fitted yet; call fit first")
        X, _ = encode_matrix(raws, self.meta_, self.scheme)
        return X

    def get_feature_names_out(self, input_features=None):
        names = REGRESSION_FEATURES if self.scheme == "regression" else PREDICTION_FEATURES
        return np.asarray(names, dtype=object)
