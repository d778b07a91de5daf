"""HTTP scoring service for request drafts.

Wraps a saved model artifact behind three endpoints:

* ``GET /healthz``: liveness plus whether a model is loaded.
* ``GET /v1/model``: model card (features, coefficients, encoder summary).
* ``POST /v1/score``: score a draft, optionally after applying what-if
  toggles, returning the probability, per-feature contributions, detected
  text signals, and the effect of every available toggle.

The app is created by :func:`create_app`; the artifact comes from an explicit
argument, a path, or the ``ASKWELL_MODEL`` environment variable.  Without a
model the service still starts and reports 503 on scoring requests.

Drafts carry no posting history, so user metadata (karma, prior activity,
account age) is taken from the request when supplied and from the training
corpus medians otherwise.  The timestamp defaults to "now", which makes
month-of-posting and community-age features time-dependent by design; pass
``timestamp`` to pin them.
"""
from __future__ import annotations

import dataclasses
import os
import time

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import features as F
from .glm import ModelArtifact, predict_probability

__all__ = ["TOGGLES", "apply_toggles", "create_app", "toggle_description"]

TOGGLES = (
    "add_image",
    "add_gratitude",
    "add_reciprocity",
    "add_100_words",
) + tuple(f"enable_narrative_{n}" for n in F.NARRATIVES) + tuple(
    f"disable_narrative_{n}" for n in F.NARRATIVES
)

_TOGGLE_TEXT = {
    "add_image": "Add a photo link as evidence",
    "add_gratitude": "Say thanks in the request",
    "add_reciprocity": "Offer to pay it forward",
    "add_100_words": "Add 100 words of detail",
}


def toggle_description(toggle: str) -> str:
    """Human-readable edit suggestion for a what-if toggle."""
    if toggle in _TOGGLE_TEXT:
        return _TOGGLE_TEXT[toggle]
    if toggle.startswith("enable_narrative_"):
        return f"Work in the {toggle[len('enable_narrative_'):]} story"
    if toggle.startswith("disable_narrative_"):
        return f"Drop the {toggle[len('disable_narrative_'):]} angle"
    raise ValueError(f"unknown toggle: {toggle}")


def apply_toggles(raw: F.RawFeatures, toggles: list[str]) -> F.RawFeatures:
    """Return a copy of ``raw`` with the what-if edits applied.

    Toggles flip extracted features, never the text: enabling a narrative
    sets its fraction to 1.0 (above any median below one), disabling zeroes
    it, and word-count bumps add to ``n_words``.  Unknown toggles raise
    ValueError.
    """
    changes: dict = {}
    narr = dict(raw.narrative_frac)
    n_words = raw.n_words
    for t in toggles:
        if t == "add_image":
            changes["has_image"] = True
        elif t == "add_gratitude":
            changes["gratitude"] = True
        elif t == "add_reciprocity":
            changes["reciprocity"] = True
        elif t == "add_100_words":
            n_words += 100
        elif t.startswith("enable_narrative_"):
            name = t[len("enable_narrative_") :]
            if name not in narr:
                raise ValueError(f"unknown toggle: {t}")
            narr[name] = 1.0
        elif t.startswith("disable_narrative_"):
            name = t[len("disable_narrative_") :]
            if name not in narr:
                raise ValueError(f"unknown toggle: {t}")
            narr[name] = 0.0
        else:
            raise ValueError(f"unknown toggle: {t}")
    changes["narrative_frac"] = narr
    changes["n_words"] = n_words
    return dataclasses.replace(raw, **changes)


class UserMeta(BaseModel):
    karma: float | None = None
    posted_before: bool | None = None
    account_age_days: float | None = Field(None, ge=0.0)


class ScoreRequest(BaseModel):
    title: str = ""
    body: str = ""
    timestamp: int | None = None
    user: UserMeta | None = None
    toggles: list[str] = Field(default_factory=list)


def _raw_value(raw: F.RawFeatures, name: str):
    """The extracted quantity behind an encoded feature, for display."""
    if name == "community_age_decile":
        return raw.community_age_months
    if name == "karma_decile":
        return raw.karma
    if name == "length_100w":
        return raw.n_words
    if name == "pos_sentiment":
        return raw.pos_sentence_frac
    if name == "neg_sentiment":
        return raw.neg_sentence_frac
    if name == "image":
        return raw.has_image
    if name in ("first_half_month", "gratitude", "reciprocity", "posted_before"):
        return getattr(raw, name)
    for narr in F.NARRATIVES:
        if name in (f"narrative_{narr}", f"narrative_{narr}_decile"):
            return raw.narrative_frac[narr]
    raise ValueError(f"unknown feature: {name}")


def _score_raw(art: ModelArtifact, raw: F.RawFeatures) -> tuple[F.FeatureVector, float]:
    vec = F.encode(raw, art.encoder, art.scheme)
    return vec, predict_probability(art.model, vec)


def _model_card(artifact: ModelArtifact) -> dict:
    m = artifact.model
    return {
        "scheme": artifact.scheme,
        "schema_id": artifact.schema_id,
        "epoch": artifact.epoch,
        "corpus_fingerprint": artifact.corpus_fingerprint,
        "intercept": m.intercept,
        "coefficients": {n: m.coefficient(n) for n in m.feature_names},
        "feature_names": list(m.feature_names),
        "l1_penalty": m.l1_penalty,
        "encoder": artifact.encoder.to_dict(),
        "available_toggles": list(TOGGLES),
    }


def create_app(
    artifact: ModelArtifact | None = None, model_path: str | None = None
) -> FastAPI:
    """Build the FastAPI app, loading the artifact if a source is given."""
    if artifact is None:
        path = model_path or os.environ.get("ASKWELL_MODEL")
        if path:
            artifact = ModelArtifact.load(path)

    app = FastAPI(title="askwell", version="0.1.0")
    app.state.artifact = artifact
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def _require_artifact() -> ModelArtifact:
        art = app.state.artifact
        if art is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        return art

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model_loaded": app.state.artifact is not None}

    @app.get("/v1/model")
    def model_card():
        return _model_card(_require_artifact())

    @app.post("/v1/score")
    def score(req: ScoreRequest):
        art = _require_artifact()
        created = req.timestamp
        if created is None:
            created = max(int(time.time()), art.epoch)
        user = req.user or UserMeta()
        medians = art.encoder.medians
        karma = user.karma if user.karma is not None else medians["karma"]
        posted = user.posted_before if user.posted_before is not None else False
        age = (
            user.account_age_days
            if user.account_age_days is not None
            else medians["account_age_days"]
        )
        try:
            raw = F.extract_raw_draft(
                req.title,
                req.body,
                epoch=art.epoch,
                created_at=created,
                karma=karma,
                posted_before=posted,
                account_age_days=age,
            )
            raw = apply_toggles(raw, req.toggles)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        vec, prob = _score_raw(art, raw)
        factors = [
            {
                "name": n,
                "raw": _raw_value(raw, n),
                "encoded": vec.values[n],
                "coefficient": art.model.coefficient(n),
                "contribution": art.model.coefficient(n) * vec.values[n],
            }
            for n in art.model.feature_names
        ]
        logit = art.model.intercept + sum(f["contribution"] for f in factors)
        what_if = []
        for t in TOGGLES:
            tvec, tprob = _score_raw(art, apply_toggles(raw, [t]))
            what_if.append(
                {
                    "toggle": t,
                    "change": toggle_description(t),
                    "probability": tprob,
                    "delta": tprob - prob,
                }
            )
        return {
            "probability": prob,
            "logit": logit,
            "intercept": art.model.intercept,
            "factors": factors,
            "detected": {
                "narratives": [n for n in F.NARRATIVES if raw.narrative_frac[n] > 0],
                "gratitude": raw.gratitude,
                "reciprocity": raw.reciprocity,
                "image": raw.has_image,
            },
            "what_if": what_if,
            "features": vec.values,
            "schema_id": vec.schema_id,
            "toggles": list(req.toggles),
        }

    return app
