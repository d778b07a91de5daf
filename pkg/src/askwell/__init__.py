"""askwell: what makes a written request for help succeed.

Extracts textual, social, and temporal factors from request corpora,
discovers narrative themes with sparse non-negative matrix factorization,
fits L1-penalized logistic regressions with likelihood-ratio significance
tests, evaluates prediction with ROC/AUC and paired DeLong tests, runs
reciprocity and giver/receiver similarity studies, and serves a live
draft-scoring API.
"""
from .corpus import (
    Corpus,
    HistoryEvent,
    RequestRecord,
    ingest,
    load_corpus,
    save_corpus,
    stratified_split,
)
from .features import (
    EncoderMeta,
    FeatureEncoder,
    FeatureVector,
    encode,
    extract_raw,
    extract_raw_draft,
    fit_encoder,
)
from .glm import (
    FittedModel,
    L1Logistic,
    ModelArtifact,
    fit_model,
    likelihood_ratio_test,
    predict_probability,
    select_l1_penalty,
)
from .similarity import run_similarity_study
from .stats import (
    binomial_test,
    delong_test,
    gaussian_kde,
    mann_whitney_u,
    pearson_r,
    roc_auc,
)
from .studies import (
    run_interpretation_curves,
    run_prediction_study,
    run_reciprocity_study,
    run_regression_study,
    run_topic_study,
)
from .topics import SparseNMF, TopicModel, fit_nmf, hoyer_sparseness

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "HistoryEvent",
    "RequestRecord",
    "ingest",
    "load_corpus",
    "save_corpus",
    "stratified_split",
    "EncoderMeta",
    "FeatureEncoder",
    "FeatureVector",
    "encode",
    "extract_raw",
    "extract_raw_draft",
    "fit_encoder",
    "FittedModel",
    "L1Logistic",
    "ModelArtifact",
    "fit_model",
    "likelihood_ratio_test",
    "predict_probability",
    "select_l1_penalty",
    "run_similarity_study",
    "binomial_test",
    "delong_test",
    "gaussian_kde",
    "mann_whitney_u",
    "pearson_r",
    "roc_auc",
    "run_interpretation_curves",
    "run_prediction_study",
    "run_reciprocity_study",
    "run_regression_study",
    "run_topic_study",
    "SparseNMF",
    "TopicModel",
    "fit_nmf",
    "hoyer_sparseness",
    "__version__",
]
