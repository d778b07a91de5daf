"""Canonical request corpus: ingestion, splitting, point-in-time user queries.

A corpus couples request records with (optional) per-user activity histories.
All timestamps are unix seconds, UTC.  History queries are strictly
point-in-time: only events with ``created_at < t`` are visible, so features
computed at request time can never look into the future.
"""
from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "RequestRecord",
    "HistoryEvent",
    "Corpus",
    "IngestReport",
    "ingest",
    "load_corpus",
    "save_corpus",
    "stratified_split",
    "karma_at",
    "posted_in_community_before",
    "subreddit_set_before",
    "snapshot_histories",
    "DEFAULT_COMMUNITY",
]

DEFAULT_COMMUNITY = "Random_Acts_Of_Pizza"

REQUEST_FIELDS = ("id", "requester", "title", "body", "created_at", "success", "giver")
HISTORY_FIELDS = ("user", "subreddit", "created_at", "score", "kind")
_EVENT_KINDS = ("post", "comment")


@dataclass(frozen=True)
class RequestRecord:
    """One request for help: text, author, outcome, and (if known) the giver."""

    id: str
    requester: str
    title: str
    body: str
    created_at: int
    success: bool
    giver: str | None = None

    def __post_init__(self):
        if self.giver is not None and not self.success:
            raise ValueError(f"request {self.id}: giver present but success is false")


@dataclass(frozen=True)
class HistoryEvent:
    """One unit of user activity in some community before or after a request."""

    user: str
    subreddit: str
    created_at: int
    score: int
    kind: str

    def __post_init__(self):
        if self.kind not in _EVENT_KINDS:
            raise ValueError(f"event kind must be one of {_EVENT_KINDS}")


@dataclass(frozen=True)
class IngestReport:
    """Counts of records dropped during ingestion, keyed by reason."""

    n_requests: int
    n_events: int
    skipped_requests: dict[str, int]
    skipped_events: dict[str, int]


class _UserHistory:
    """Per-user event index: sorted times, karma prefix sums."""

    __slots__ = ("events", "times", "karma_prefix")

    def __init__(self, events: list[HistoryEvent]):
        self.events = sorted(events, key=lambda e: e.created_at)
        self.times = [e.created_at for e in self.events]
        self.karma_prefix = np.concatenate(
            [[0], np.cumsum([e.score for e in self.events], dtype=np.int64)]
        )

    def cut(self, t: int) -> int:
        """Number of events strictly before ``t``."""
        return bisect_left(self.times, t)


@dataclass
class Corpus:
    """Request records plus user histories, with a fixed community epoch.

    ``epoch`` defaults to the earliest request in this corpus; splits carry
    their parent's epoch so temporal features stay comparable across sides.
    """

    requests: list[RequestRecord]
    histories: dict[str, list[HistoryEvent]] = field(default_factory=dict)
    report: IngestReport | None = None
    _epoch: int | None = None
    _index: dict[str, _UserHistory] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        seen: set[str] = set()
        for r in self.requests:
            if r.id in seen:
                raise ValueError(f"duplicate request id: {r.id}")
            seen.add(r.id)
        self.histories = {
            u: sorted(evs, key=lambda e: e.created_at)
            for u, evs in self.histories.items()
        }
        self._index = {u: _UserHistory(evs) for u, evs in self.histories.items()}

    def __len__(self) -> int:
        return len(self.requests)

    @property
    def epoch(self) -> int:
        if self._epoch is not None:
            return self._epoch
        if not self.requests:
            raise ValueError("epoch is undefined for an empty corpus")
        return min(r.created_at for r in self.requests)

    @property
    def success_rate(self) -> float:
        if not self.requests:
            raise ValueError("success rate is undefined for an empty corpus")
        return sum(r.success for r in self.requests) / len(self.requests)

    def user_history(self, user: str) -> _UserHistory | None:
        return self._index.get(user)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for r in sorted(self.requests, key=lambda r: r.id):
            h.update(f"{r.id}\x1f{r.created_at}\x1f{int(r.success)}\x1e".encode())
        return h.hexdigest()[:16]


def _coerce_request(raw: Mapping, field_map: Mapping[str, str]) -> RequestRecord:
    def get(name, default=None):
        return raw.get(field_map.get(name, name), default)

    rid = get("id")
    body = get("body")
    created = get("created_at")
    success = get("success")
    if rid is None or body is None or created is None or success is None:
        missing = [
            n
            for n, v in zip(
                ("id", "body", "created_at", "success"), (rid, body, created, success)
            )
            if v is None
        ]
        raise KeyError("missing mandatory field(s): " + ", ".join(missing))
    created = float(created)
    if not math.isfinite(created):
        raise ValueError("created_at is not finite")
    giver = get("giver")
    if giver in ("", "N/A", "n/a"):
        giver = None
    return RequestRecord(
        id=str(rid),
        requester=str(get("requester", "") or ""),
        title=str(get("title", "") or ""),
        body=str(body),
        created_at=int(created),
        success=bool(success),
        giver=None if giver is None else str(giver),
    )


def _coerce_event(raw: Mapping, field_map: Mapping[str, str]) -> HistoryEvent:
    def get(name, default=None):
        return raw.get(field_map.get(name, name), default)

    user = get("user")
    created = get("created_at")
    if user is None or created is None:
        raise KeyError("missing mandatory field(s) on history event")
    kind = str(get("kind", "post") or "post")
    return HistoryEvent(
        user=str(user),
        subreddit=str(get("subreddit", "") or ""),
        created_at=int(float(created)),
        score=int(get("score", 0) or 0),
        kind=kind,
    )


def _iter_json_records(path) -> Iterable[Mapping]:
    """Yield objects from a JSONL file, or from a top-level JSON array."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        for obj in json.loads(text):
            yield obj
        return
    for line in text.splitlines():
        line = line.strip()
        if line:
            yield json.loads(line)


def ingest(
    requests_path,
    histories_path=None,
    field_map: Mapping[str, str] | None = None,
    history_field_map: Mapping[str, str] | None = None,
) -> Corpus:
    """Read requests (and optional histories) into a canonical Corpus.

    ``field_map`` maps canonical field names to the source file's names.
    Records missing a mandatory field (id, body, created_at, success) or
    violating record invariants are skipped and counted in ``corpus.report``;
    a duplicate request id is a hard error.
    """
    fmap = dict(field_map or {})
    hmap = dict(history_field_map or fmap)
    requests: list[RequestRecord] = []
    skipped_requests: dict[str, int] = {}
    seen_ids: set[str] = set()
    meta_epoch: int | None = None
    for raw in _iter_json_records(requests_path):
        if "#askwell" in raw:
            meta = raw["#askwell"]
            if isinstance(meta, Mapping) and meta.get("epoch") is not None:
                meta_epoch = int(meta["epoch"])
            continue
        try:
            rec = _coerce_request(raw, fmap)
        except (KeyError, ValueError, TypeError) as exc:
            reason = str(exc).strip("'\"")
            skipped_requests[reason] = skipped_requests.get(reason, 0) + 1
            continue
        if rec.id in seen_ids:
            raise ValueError(f"duplicate request id: {rec.id}")
        seen_ids.add(rec.id)
        requests.append(rec)

    histories: dict[str, list[HistoryEvent]] = {}
    skipped_events: dict[str, int] = {}
    n_events = 0
    if histories_path is not None:
        for raw in _iter_json_records(histories_path):
            try:
                ev = _coerce_event(raw, hmap)
            except (KeyError, ValueError, TypeError) as exc:
                reason = str(exc).strip("'\"")
                skipped_events[reason] = skipped_events.get(reason, 0) + 1
                continue
            histories.setdefault(ev.user, []).append(ev)
            n_events += 1

    report = IngestReport(len(requests), n_events, skipped_requests, skipped_events)
    return Corpus(
        requests=requests, histories=histories, report=report, _epoch=meta_epoch
    )


def load_corpus(requests_path, histories_path=None) -> Corpus:
    """Load canonical JSONL files written by :func:`save_corpus`."""
    return ingest(requests_path, histories_path)


def save_corpus(corpus: Corpus, requests_path, histories_path=None) -> None:
    """Write canonical JSONL (requests; histories only if a path is given).

    The first line is a ``#askwell`` meta record carrying the epoch, so
    splits keep their parent's epoch across a save/load round trip.
    """
    with open(requests_path, "w", encoding="utf-8") as fh:
        if corpus.requests:
            fh.write(json.dumps({"#askwell": {"epoch": corpus.epoch}}) + "\n")
        for r in corpus.requests:
            row = {
                "id": r.id,
                "requester": r.requester,
                "title": r.title,
                "body": r.body,
                "created_at": r.created_at,
                "success": r.success,
            }
            if r.giver is not None:
                row["giver"] = r.giver
            fh.write(json.dumps(row) + "\n")
    if histories_path is not None:
        with open(histories_path, "w", encoding="utf-8") as fh:
            for user in sorted(corpus.histories):
                for e in corpus.histories[user]:
                    fh.write(
                        json.dumps(
                            {
                                "user": e.user,
                                "subreddit": e.subreddit,
                                "created_at": e.created_at,
                                "score": e.score,
                                "kind": e.kind,
                            }
                        )
                        + "\n"
                    )


def stratified_split(
    corpus: Corpus, dev_fraction: float = 0.7, seed: int = 0
) -> tuple[Corpus, Corpus]:
    """Deterministic per-class split preserving the overall success rate.

    Each class contributes ``ceil(dev_fraction * n_class)`` records to the dev
    side.  Raises when either side would be left without members of some
    class (stratification impossible).  Both children share the parent's
    histories and epoch.
    """
    if not 0.0 < dev_fraction < 1.0:
        raise ValueError("dev_fraction must be in (0, 1)")
    classes = {
        True: sorted((r for r in corpus.requests if r.success), key=lambda r: r.id),
        False: sorted((r for r in corpus.requests if not r.success), key=lambda r: r.id),
    }
    rng = np.random.default_rng(seed)
    dev_ids: set[str] = set()
    for label, recs in classes.items():
        n_dev = math.ceil(dev_fraction * len(recs))
        if n_dev == 0 or n_dev == len(recs):
            raise ValueError(
                "stratification impossible: class "
                f"success={label} has {len(recs)} records for "
                f"dev_fraction={dev_fraction}"
            )
        order = rng.permutation(len(recs))
        dev_ids.update(recs[i].id for i in order[:n_dev])
    dev = [r for r in corpus.requests if r.id in dev_ids]
    test = [r for r in corpus.requests if r.id not in dev_ids]
    epoch = corpus.epoch
    return (
        Corpus(requests=dev, histories=corpus.histories, _epoch=epoch),
        Corpus(requests=test, histories=corpus.histories, _epoch=epoch),
    )


def karma_at(corpus: Corpus, user: str, t: int) -> int:
    """Sum of event scores for ``user`` strictly before ``t`` (0 if no history)."""
    hist = corpus.user_history(user)
    if hist is None:
        return 0
    return int(hist.karma_prefix[hist.cut(t)])


def posted_in_community_before(
    corpus: Corpus,
    user: str,
    t: int,
    community: str = DEFAULT_COMMUNITY,
    count_comments: bool = True,
) -> bool:
    """True when the user has activity in ``community`` strictly before ``t``.

    ``count_comments=False`` restricts the check to events of kind ``post``.
    Community names compare case-insensitively.
    """
    hist = corpus.user_history(user)
    if hist is None:
        return False
    target = community.lower()
    for e in hist.events[: hist.cut(t)]:
        if e.subreddit.lower() == target and (count_comments or e.kind == "post"):
            return True
    return False


def subreddit_set_before(corpus: Corpus, user: str, t: int) -> frozenset[str]:
    """Distinct non-empty subreddit names the user touched strictly before ``t``."""
    hist = corpus.user_history(user)
    if hist is None:
        return frozenset()
    return frozenset(
        e.subreddit for e in hist.events[: hist.cut(t)] if e.subreddit
    )


def first_activity_at(corpus: Corpus, user: str) -> int | None:
    """Timestamp of the user's earliest recorded event, or None."""
    hist = corpus.user_history(user)
    if hist is None or not hist.times:
        return None
    return hist.times[0]


def snapshot_histories(
    requests_path,
    field_map: Mapping[str, str],
    snapshot_map: Mapping[str, str],
    community: str = DEFAULT_COMMUNITY,
) -> dict[str, list[HistoryEvent]]:
    """Synthesize per-user histories from per-request snapshot fields.

    Bridge for datasets that ship point-in-time aggregates instead of raw
    event streams.  ``snapshot_map`` may map any of:

    - ``karma``: total up/down vote balance at request time
    - ``n_community_posts``: posts in ``community`` before the request
    - ``account_age_days``: account age at request time
    - ``subreddits``: list of communities active in before the request

    Each request contributes events dated strictly before its timestamp, so
    the point-in-time queries reproduce the snapshot values.  The karma
    balance rides on an event with an empty subreddit name, which the
    subreddit-set query ignores.
    """
    fmap = dict(field_map)
    histories: dict[str, list[HistoryEvent]] = {}
    for raw in _iter_json_records(requests_path):
        user = raw.get(fmap.get("requester", "requester"))
        t = raw.get(fmap.get("created_at", "created_at"))
        if user is None or t is None:
            continue
        user, t = str(user), int(float(t))
        events = histories.setdefault(user, [])
        age_key = snapshot_map.get("account_age_days")
        birth = t - 1
        if age_key is not None and raw.get(age_key) is not None:
            birth = t - int(float(raw[age_key]) * 86400)
        karma_key = snapshot_map.get("karma")
        karma = int(float(raw.get(karma_key, 0) or 0)) if karma_key else 0
        events.append(HistoryEvent(user, "", min(birth, t - 1), karma, "post"))
        subs_key = snapshot_map.get("subreddits")
        subs = raw.get(subs_key) if subs_key else None
        n_comm_key = snapshot_map.get("n_community_posts")
        n_comm = int(float(raw.get(n_comm_key, 0) or 0)) if n_comm_key else 0
        for sub in subs or []:
            if str(sub).lower() == community.lower() and n_comm == 0:
                continue  # the request itself is not prior activity
            events.append(HistoryEvent(user, str(sub), t - 1, 0, "post"))
        if n_comm > 0 and not any(
            e.subreddit.lower() == community.lower() for e in events
        ):
            events.append(HistoryEvent(user, community, t - 1, 0, "post"))
    return histories
