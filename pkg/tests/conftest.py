"""Shared fixtures: synthetic corpora with planted effects.

The builder composes request bodies from fixed sentence banks whose words
were chosen against the packaged lexicons, so each sentence moves exactly
one detector.  A module-level guard re-verifies that property against the
shipped word lists on import; if a lexicon edit breaks a bank, the guard
fails loudly rather than letting tests assert against drifted fixtures.

Success labels are drawn from a planted logistic model over the same flags
used to assemble the text, so study-level tests can assert signal direction
and significance honestly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources

import numpy as np
import pytest

import askwell.features as F
from askwell.corpus import DEFAULT_COMMUNITY, Corpus, HistoryEvent, RequestRecord
from askwell.glm import ModelArtifact
from askwell.textkit import tokenize, word_count

EPOCH = 1291766400  # 2010-12-08 UTC, the reference community start

TITLE = "asking about a pizza"

NARRATIVE_SENTENCES = {
    "money": "our rent money is due and the bank account shows zero dollars.",
    "job": "i got fired from my job and the unemployment office cannot help.",
    "student": "finals at college have me stuck studying in the dorm.",
    "family": "my wife and daughter are home with my parents.",
    "craving": "my friend is over for a movie on her birthday.",
}
GRATITUDE_SENTENCE = "thanks so much even if the season felt rough."
RECIPROCITY_SENTENCE = "we promise to pay it forward on our end."
IMAGE_SENTENCE = (
    "proof of the empty fridge is at http://imgur.com/a/xyz9 for anyone curious."
)
POSITIVE_SENTENCE = "you are all amazing and this community is wonderful."
NEGATIVE_SENTENCE = "this has been a sad and stressful stretch."
FILLER_SENTENCES = [
    "the oven in this apartment refuses to heat anything.",
    "we have a couch and a screen all set up.",
    "delivery places around here close early on sundays.",
    "a large pie with mushrooms would really hit the spot.",
    "i can walk to the corner if that makes it easier.",
    "our stove gave out and the microwave is ancient.",
    "there is a small store nearby but shelves sit empty.",
    "pasta boxes ran out two days back in the pantry.",
]


def _bank_hits(sentence):
    """Which lexicons a sentence touches: {lexicon_name: matched tokens}."""
    lex = F.load_narrative_lexicons()
    pos, neg = F.load_sentiment_lexicons()
    tables = dict(lex)
    tables["pos"] = pos
    tables["neg"] = neg
    tables["gratitude"] = frozenset(F.GRATITUDE_TOKENS)
    toks = set(tokenize(sentence))
    return {name: toks & set(words) for name, words in tables.items() if toks & set(words)}


def _check_banks():
    for name, sent in NARRATIVE_SENTENCES.items():
        hits = _bank_hits(sent)
        assert set(hits) == {name}, f"{name} sentence leaks into {hits}"
    grat = _bank_hits(GRATITUDE_SENTENCE)
    assert set(grat) == {"pos", "neg", "gratitude"}, grat
    assert grat["pos"] == {"thanks"} and grat["neg"] == {"rough"}
    for sent in (RECIPROCITY_SENTENCE, IMAGE_SENTENCE, *FILLER_SENTENCES, TITLE):
        assert _bank_hits(sent) == {}, (sent, _bank_hits(sent))
    assert set(_bank_hits(POSITIVE_SENTENCE)) == {"pos"}
    assert set(_bank_hits(NEGATIVE_SENTENCE)) == {"neg"}
    assert F.detect_reciprocity(RECIPROCITY_SENTENCE)
    assert F.detect_image(IMAGE_SENTENCE)
    for sent in FILLER_SENTENCES:
        assert not F.detect_reciprocity(sent) and not F.detect_image(sent)


_check_banks()

NARRATIVE_LOGIT = {"money": 0.5, "job": 0.6, "student": 0.0, "family": 0.4, "craving": -0.9}


@dataclass
class PlantedRequest:
    """Ground truth for one synthetic request."""

    narrative: str | None
    image: bool
    gratitude: bool
    reciprocity: bool
    pos_extra: bool
    neg_extra: bool
    karma: int
    posted_before: bool
    account_age_days: int
    p_success: float


@dataclass
class SynthWorld:
    corpus: Corpus
    truth: dict[str, PlantedRequest]


def _day_of_month(t):
    return datetime.fromtimestamp(t, tz=timezone.utc).day


def build_world(n=160, seed=7, span_days=420, give_rate=0.6) -> SynthWorld:
    """Corpus of ``n`` synthetic requests with planted, recoverable effects."""
    rng = np.random.default_rng(seed)
    sub_pool = [f"hobby{j:02d}" for j in range(40)]
    giver_pool = [f"giver{g:02d}" for g in range(20)]
    requests, histories, truth = [], {}, {}
    narrative_names = list(NARRATIVE_SENTENCES)
    for i in range(n):
        user = f"user{i:04d}"
        day = int(rng.integers(0, span_days))
        created = EPOCH + day * 86400 + int(rng.integers(0, 86400))
        narrative = None
        if rng.random() > 0.15:
            narrative = narrative_names[int(rng.integers(0, 5))]
        image = rng.random() < 0.25
        gratitude = rng.random() < 0.4
        reciprocity = rng.random() < 0.3
        pos_extra = rng.random() < 0.3
        neg_extra = rng.random() < 0.3
        karma_u = rng.random()
        karma = int(10 ** (3.4 * karma_u)) - 1
        posted_before = rng.random() < 0.35
        account_age_days = int(rng.integers(5, 900))

        parts = []
        if narrative is not None:
            parts += [NARRATIVE_SENTENCES[narrative]] * (1 + int(rng.integers(0, 3)))
        if gratitude:
            parts.append(GRATITUDE_SENTENCE)
        if reciprocity:
            parts.append(RECIPROCITY_SENTENCE)
        if image:
            parts.append(IMAGE_SENTENCE)
        if pos_extra:
            parts.append(POSITIVE_SENTENCE)
        if neg_extra:
            parts.append(NEGATIVE_SENTENCE)
        n_fill = 2 + int(rng.integers(0, 7))
        parts += [FILLER_SENTENCES[int(j)] for j in rng.integers(0, len(FILLER_SENTENCES), n_fill)]
        rng.shuffle(parts)
        body = " ".join(parts)

        logit = (
            -1.6
            + 1.1 * image
            + 0.5 * gratitude
            + 0.6 * reciprocity
            + 0.45 * (word_count(body) / 100.0)
            + NARRATIVE_LOGIT.get(narrative, 0.0)
            + 0.9 * (karma_u - 0.5)
            + 0.7 * posted_before
            + 0.35 * (_day_of_month(created) <= 15)
            - 0.8 * (day / span_days)
            + 0.25 * pos_extra
            - 0.25 * neg_extra
        )
        p = 1.0 / (1.0 + math.exp(-logit))
        success = bool(rng.random() < p)
        giver = None
        if success and rng.random() < give_rate:
            giver = giver_pool[int(rng.integers(0, len(giver_pool)))]
        rid = f"req{i:04d}"
        requests.append(RequestRecord(rid, user, TITLE, body, created, success, giver))
        truth[rid] = PlantedRequest(
            narrative, image, gratitude, reciprocity, pos_extra, neg_extra,
            karma, posted_before, account_age_days, p,
        )

        first_at = created - account_age_days * 86400
        events = [
            HistoryEvent(user, sub_pool[int(rng.integers(0, len(sub_pool)))], first_at, 0, "comment")
        ]
        if karma > 0:
            m = 1 + int(rng.integers(0, 4))
            weights = rng.multinomial(karma, np.ones(m) / m)
            for w in weights:
                t_ev = int(rng.integers(first_at, created))
                sub = sub_pool[int(rng.integers(0, len(sub_pool)))]
                events.append(HistoryEvent(user, sub, t_ev, int(w), "comment"))
        if posted_before:
            t_ev = int(rng.integers(first_at, created))
            events.append(HistoryEvent(user, DEFAULT_COMMUNITY, t_ev, 0, "post"))
        histories[user] = events

    for g in giver_pool:
        histories[g] = [
            HistoryEvent(g, sub_pool[int(rng.integers(0, len(sub_pool)))], EPOCH - 86400 * (d + 1), 1, "comment")
            for d in range(3)
        ]
    return SynthWorld(Corpus(requests=requests, histories=histories, _epoch=EPOCH), truth)


def build_sim_world(n_pairs=40, seed=3, signal=True):
    """Corpus + giver pairs where givers do (or do not) share interests.

    With ``signal`` the giver of each request shares 4..8 subreddits with
    its receiver on top of background overlap.  Without it every user draws
    from a private pool, so all similarities are exactly zero.
    """
    rng = np.random.default_rng(seed)
    pool = [f"sub{j:02d}" for j in range(60)]
    requests, histories = [], {}

    def subscribe(user, subs, before_t):
        histories[user] = [
            HistoryEvent(user, s, int(before_t - 1 - j), 1, "comment")
            for j, s in enumerate(subs)
        ]

    for i in range(n_pairs):
        recv, giver = f"recv{i:02d}", f"give{i:02d}"
        t = EPOCH + (i + 1) * 3 * 86400
        if signal:
            recv_subs = list(rng.choice(pool, size=int(rng.integers(8, 16)), replace=False))
            giver_subs = list(rng.choice(pool, size=int(rng.integers(8, 16)), replace=False))
            shared = rng.choice(recv_subs, size=min(int(rng.integers(4, 9)), len(recv_subs)), replace=False)
            giver_subs = sorted(set(giver_subs) | set(shared))
        else:
            recv_subs = [f"{recv}_only{k}" for k in range(10)]
            giver_subs = [f"{giver}_only{k}" for k in range(10)]
        subscribe(recv, recv_subs, t)
        subscribe(giver, giver_subs, t)
        requests.append(
            RequestRecord(f"pair{i:02d}", recv, TITLE, FILLER_SENTENCES[0], t, True, giver)
        )
    return Corpus(requests=requests, histories=histories, _epoch=EPOCH)


@pytest.fixture(scope="session")
def world_small():
    return build_world(n=160, seed=7)


@pytest.fixture(scope="session")
def world_mid():
    return build_world(n=400, seed=11)


@pytest.fixture(scope="session")
def ref_artifact():
    path = resources.files("askwell").joinpath("data/reference_model.json")
    return ModelArtifact.load(str(path))


@pytest.fixture(scope="session")
def ref_scenario(ref_artifact):
    return ref_artifact.extra["reference_scenario"]


# --- acceptance criteria reporting -----------------------------------------

_CRITERIA_ROWS: list[tuple[str, str, str, str]] = []


class CriteriaLog:
    """Collects one verdict line per acceptance criterion for the summary."""

    def record(self, num, desc, status, note=""):
        _CRITERIA_ROWS.append((str(num), desc, status, note))


@pytest.fixture(scope="session")
def criteria():
    return CriteriaLog()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA_ROWS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, status, note in sorted(_CRITERIA_ROWS, key=lambda r: r[0]):
        line = f"[{status:4s}] criterion {num}: {desc}"
        if note:
            line += f" ({note})"
        terminalreporter.write_line(line)
