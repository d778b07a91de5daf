"""Command-line entry points.

The pipeline is file-based: every command reads and writes plain JSON/JSONL
or CSV, so each stage can be inspected and rerun independently.

    askwell ingest --requests raw.json --field-map map.json --out corpus.jsonl
    askwell split corpus.jsonl --out-dev dev.jsonl --out-test test.jsonl
    askwell regression-study dev.jsonl --out-csv table.csv --model-out model.json
    askwell prediction-study dev.jsonl test.jsonl --out-csv aucs.csv
    askwell serve --model model.json
"""
from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import corpus as C
from . import features as F
from . import glm
from . import studies
from .similarity import load_pairs, pairs_from_corpus, run_similarity_study


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _field_maps(path):
    """A field-map file is either a flat mapping or nested under
    ``field_map`` / ``history_field_map`` / ``snapshot_map`` keys."""
    if path is None:
        return None, None, None
    d = _load_json(path)
    if "field_map" in d or "snapshot_map" in d:
        return d.get("field_map"), d.get("history_field_map"), d.get("snapshot_map")
    return d, None, None


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Analyze and score altruistic request texts."""


@main.command()
@click.option("--requests", "requests_path", required=True, type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--field-map", "field_map_path", type=click.Path(exists=True))
@click.option("--community", default=C.DEFAULT_COMMUNITY, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--out-histories", "out_histories", type=click.Path())
def ingest(requests_path, histories_path, field_map_path, community, out_path, out_histories):
    """Normalize a raw dataset into canonical corpus JSONL.

    When the field map contains a ``snapshot_map`` section, per-request
    aggregate columns are expanded into synthetic user histories.
    """
    fmap, hmap, smap = _field_maps(field_map_path)
    try:
        corp = C.ingest(requests_path, histories_path, fmap, hmap)
        if smap:
            if histories_path:
                raise ValueError("snapshot_map and --histories are mutually exclusive")
            hist = C.snapshot_histories(requests_path, fmap or {}, smap, community)
            corp = C.Corpus(requests=corp.requests, histories=hist, report=corp.report)
        C.save_corpus(corp, out_path, out_histories)
    except (ValueError, KeyError, OSError) as exc:
        _fail(exc)
    rep = corp.report
    n_events = sum(len(evs) for evs in corp.histories.values())
    click.echo(
        f"ingested {rep.n_requests} requests, {n_events} history events "
        f"(skipped {sum(rep.skipped_requests.values())} requests, "
        f"{sum(rep.skipped_events.values())} events)"
    )
    for reason, n in sorted(rep.skipped_requests.items()):
        click.echo(f"  skipped request ({n}): {reason}")
    if not (smap or histories_path):
        click.echo("note: no histories given; user-status features will be zero")


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--dev-fraction", default=0.7, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dev", required=True, type=click.Path())
@click.option("--out-test", required=True, type=click.Path())
def split(corpus_path, histories_path, dev_fraction, seed, out_dev, out_test):
    """Stratified development/test split (success rate preserved)."""
    try:
        corp = C.load_corpus(corpus_path, histories_path)
        dev, test = C.stratified_split(corp, dev_fraction, seed)
        C.save_corpus(dev, out_dev)
        C.save_corpus(test, out_test)
    except ValueError as exc:
        _fail(exc)
    click.echo(
        f"dev: {len(dev)} requests ({dev.success_rate:.1%} successful) -> {out_dev}"
    )
    click.echo(
        f"test: {len(test)} requests ({test.success_rate:.1%} successful) -> {out_test}"
    )


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--k", default=10, show_default=True)
@click.option("--sparseness", default=0.5, show_default=True, help="Hoyer row sparseness target for topic loadings; negative disables the constraint.")
@click.option("--min-df", default=5, show_default=True)
@click.option("--top", "m_top", default=15, show_default=True)
@click.option("--max-iters", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--model-out", type=click.Path())
def topics(corpus_path, k, sparseness, min_df, m_top, max_iters, seed, out_csv, model_out):
    """Topic decomposition of request bodies with per-topic success rates."""
    try:
        corp = C.load_corpus(corpus_path)
        study = studies.run_topic_study(
            corp,
            k=k,
            target_sparseness=None if sparseness < 0 else sparseness,
            min_df=min_df,
            m_top=m_top,
            seed=seed,
            max_iters=max_iters,
        )
    except ValueError as exc:
        _fail(exc)
    study.to_csv(out_csv)
    if model_out:
        with open(model_out, "w", encoding="utf-8") as fh:
            fh.write(study.model.to_json())
    click.echo(f"overall success rate: {study.overall_rate:.1%}")
    for t in range(k):
        rate = f"{study.rates[t]:.1%}" if t in study.rates else "  n/a"
        click.echo(f"topic {t}: n={study.counts.get(t, 0):5d} rate={rate} {' '.join(study.terms[t][:8])}")


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(["regression", "prediction"]), default="regression", show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True), help="Reuse this artifact's encoder instead of fitting one on the corpus.")
@click.option("--out", "out_path", required=True, type=click.Path())
def featurize(corpus_path, histories_path, scheme, model_path, out_path):
    """Write the per-request feature table (raw and encoded) as CSV."""
    import csv
    import dataclasses

    try:
        corp = C.load_corpus(corpus_path, histories_path)
        raws = [F.extract_raw(r, corp) for r in corp.requests]
        if model_path:
            artifact = glm.ModelArtifact.load(model_path)
            meta, scheme = artifact.encoder, artifact.scheme
        else:
            meta = F.fit_encoder(raws)
        vecs = [F.encode(raw, meta, scheme) for raw in raws]
    except ValueError as exc:
        _fail(exc)

    def raw_row(raw):
        cols, vals = [], []
        for f in dataclasses.fields(F.RawFeatures):
            v = getattr(raw, f.name)
            if f.name == "narrative_frac":
                for n in F.NARRATIVES:
                    cols.append(f"raw_narrative_{n}")
                    vals.append(v[n])
            else:
                cols.append(f"raw_{f.name}")
                vals.append(int(v) if isinstance(v, bool) else v)
        return cols, vals

    raw_cols = raw_row(raws[0])[0] if raws else []
    enc_cols = list(vecs[0].values) if vecs else []
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["request_id"] + raw_cols + enc_cols)
        for req, raw, vec in zip(corp.requests, raws, vecs):
            row = [req.id] + raw_row(raw)[1]
            row += [vec.values[c] for c in enc_cols]
            writer.writerow(row)
    click.echo(f"{len(vecs)} requests, {len(raw_cols) + len(enc_cols)} columns -> {out_path}")


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--scheme", type=click.Choice(["regression", "prediction"]), default="regression", show_default=True)
@click.option("--l1", "l1_penalty", default=0.0, show_default=True)
@click.option("--cv", is_flag=True, help="Pick the penalty by 5-fold cross-validated AUC.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def train(corpus_path, histories_path, scheme, l1_penalty, cv, seed, out_path):
    """Fit a success model and save a self-contained scoring artifact."""
    try:
        corp = C.load_corpus(corpus_path, histories_path)
        raws = [F.extract_raw(r, corp) for r in corp.requests]
        y = np.array([float(r.success) for r in corp.requests])
        meta = F.fit_encoder(raws)
        X, names = F.encode_matrix(raws, meta, scheme)
        extra = {}
        if cv:
            l1_penalty, table = glm.select_l1_penalty(X, y, seed=seed)
            extra["cv_auc_by_penalty"] = [[lam, auc] for lam, auc in table]
        model = glm.fit_model(X, y, names, l1_penalty=l1_penalty)
        artifact = glm.ModelArtifact(
            model=model,
            encoder=meta,
            scheme=scheme,
            schema_id=F.schema_id(scheme, meta),
            epoch=corp.epoch,
            corpus_fingerprint=corp.fingerprint(),
            extra=extra,
        )
        artifact.save(out_path)
    except ValueError as exc:
        _fail(exc)
    click.echo(f"fitted {scheme} model on {len(y)} requests (penalty {l1_penalty:g})")
    click.echo(f"log-likelihood {model.log_likelihood:.2f} -> {out_path}")


@main.command("regression-study")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--out-csv", type=click.Path())
@click.option("--out-json", type=click.Path())
@click.option("--model-out", type=click.Path())
def regression_study(corpus_path, histories_path, out_csv, out_json, model_out):
    """Coefficient table with drop-one likelihood-ratio tests."""
    try:
        corp = C.load_corpus(corpus_path, histories_path)
        study = studies.run_regression_study(corp)
    except ValueError as exc:
        _fail(exc)
    if out_csv:
        study.to_csv(out_csv)
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fh:
            fh.write(study.to_json())
    if model_out:
        study.artifact.save(model_out)
    for row in study.rows:
        p = "" if row["p"] is None else f" p={row['p']:.2g}"
        click.echo(f"{row['feature']:>24} {row['estimate']:+.3f}{row['stars']}{p}")


@main.command("prediction-study")
@click.argument("dev_path", type=click.Path(exists=True))
@click.argument("test_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out-csv", type=click.Path())
@click.option("--out-json", type=click.Path())
def prediction_study(dev_path, test_path, histories_path, seed, out_csv, out_json):
    """Held-out AUC comparison across feature families."""
    try:
        dev = C.load_corpus(dev_path, histories_path)
        test = C.load_corpus(test_path, histories_path)
        study = studies.run_prediction_study(dev, test, seed=seed)
    except ValueError as exc:
        _fail(exc)
    if out_csv:
        study.to_csv(out_csv)
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fh:
            fh.write(study.to_json())
    for row in study.rows:
        click.echo(f"{row['feature_set']:>30}: AUC {row['test_auc']:.3f}")
    for cmp in study.comparisons:
        click.echo(
            f"{cmp['model_a']} vs {cmp['model_b']}: z={cmp['z']:+.2f} p={cmp['p']:.3g}{cmp['stars']}"
        )


@main.command("reciprocity-study")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["givers", "community_activity"]))
@click.option("--out-csv", type=click.Path())
@click.option("--out-json", type=click.Path())
def reciprocity_study(corpus_path, histories_path, pairs_path, mode, out_csv, out_json):
    """How often successful requesters later give, by subgroup."""
    try:
        corp = C.load_corpus(corpus_path, histories_path)
        pairs = load_pairs(pairs_path) if pairs_path else pairs_from_corpus(corp)
        study = studies.run_reciprocity_study(corp, pairs or None, mode=mode)
    except ValueError as exc:
        _fail(exc)
    if out_csv:
        study.to_csv(out_csv)
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fh:
            fh.write(study.to_json())
    click.echo(
        f"baseline ({study.mode}): {study.baseline_rate:.1%} of {study.n_successful}"
    )
    for s in study.subgroups:
        if s["rate"] is None:
            click.echo(f"{s['subgroup']}: empty subgroup")
            continue
        p = "" if s["p"] is None else f", p={s['p']:.3g}{s['stars']}"
        click.echo(f"{s['subgroup']}: {s['rate']:.1%} (n={s['n']}{p})")


@main.command("similarity-study")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--histories", "histories_path", type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", type=click.Path(exists=True))
@click.option("--metric", type=click.Choice(["intersection", "jaccard"]), default="intersection", show_default=True)
@click.option("--n-null", type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--degree-preserving", is_flag=True)
@click.option("--out-json", type=click.Path())
@click.option("--kde-out-prefix", type=click.Path())
def similarity_study(corpus_path, histories_path, pairs_path, metric, n_null, seed, degree_preserving, out_json, kde_out_prefix):
    """Giver/receiver interest overlap against a rewired null."""
    try:
        corp = C.load_corpus(corpus_path, histories_path)
        pairs = load_pairs(pairs_path) if pairs_path else pairs_from_corpus(corp)
        study = run_similarity_study(
            corp,
            pairs,
            metric=metric,
            n_null=n_null,
            seed=seed,
            degree_preserving=degree_preserving,
        )
    except ValueError as exc:
        _fail(exc)
    if out_json:
        with open(out_json, "w", encoding="utf-8") as fh:
            json.dump(study.summary(), fh, indent=2)
    if kde_out_prefix:
        study.kde_actual.to_csv(f"{kde_out_prefix}_actual.csv")
        study.kde_null.to_csv(f"{kde_out_prefix}_null.csv")
    s = study.summary()
    click.echo(
        f"{metric}: actual mean {s['mean_actual']:.3f} vs null {s['mean_null']:.3f} "
        f"(p={s['p_value']:.3g}, n={s['n_actual']} pairs, {s['n_null']} null draws)"
    )


@main.command()
@click.argument("model_path", type=click.Path(exists=True))
@click.option("--max-words", default=300, show_default=True)
@click.option("--step", default=5, show_default=True)
@click.option("--out-length", required=True, type=click.Path())
@click.option("--out-karma", required=True, type=click.Path())
def curves(model_path, max_words, step, out_length, out_karma):
    """Model-implied probability sweeps over length and status."""
    try:
        artifact = glm.ModelArtifact.load(model_path)
        cs = studies.run_interpretation_curves(artifact, max_words, step)
    except ValueError as exc:
        _fail(exc)
    cs.to_csv(out_length, out_karma)
    click.echo(f"length curves -> {out_length}")
    click.echo(f"karma curve -> {out_karma}")


@main.command()
@click.argument("model_path", type=click.Path(exists=True))
@click.option("--title", default="")
@click.option("--body", required=True)
@click.option("--created-at", type=int)
@click.option("--karma", type=float, help="Defaults to the training-corpus median.")
@click.option("--posted-before", is_flag=True)
@click.option("--account-age-days", type=float, help="Defaults to the training-corpus median.")
@click.option("--toggle", "toggles", multiple=True)
def score(model_path, title, body, created_at, karma, posted_before, account_age_days, toggles):
    """Score one draft from the command line."""
    from .service import apply_toggles

    try:
        artifact = glm.ModelArtifact.load(model_path)
        if created_at is None:
            import time

            created_at = max(int(time.time()), artifact.epoch)
        medians = artifact.encoder.medians
        raw = F.extract_raw_draft(
            title,
            body,
            epoch=artifact.epoch,
            created_at=created_at,
            karma=medians["karma"] if karma is None else karma,
            posted_before=posted_before,
            account_age_days=(
                medians["account_age_days"]
                if account_age_days is None
                else account_age_days
            ),
        )
        raw = apply_toggles(raw, list(toggles))
        vec = F.encode(raw, artifact.encoder, artifact.scheme)
        prob = glm.predict_probability(artifact.model, vec)
    except ValueError as exc:
        _fail(exc)
    click.echo(json.dumps({"probability": prob, "features": vec.values}, indent=2))


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8023, show_default=True)
def serve(model_path, host, port):
    """Run the scoring HTTP service (ASKWELL_MODEL is the fallback model)."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(model_path=model_path)
    except (ValueError, OSError) as exc:
        _fail(exc)
    if app.state.artifact is None:
        click.echo("warning: serving without a model; /v1/score returns 503", err=True)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
