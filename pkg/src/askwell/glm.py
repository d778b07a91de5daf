"""L1-penalized logistic regression by cyclic coordinate descent.

The objective maximized is the sum log-likelihood minus ``l1_penalty`` times
the l1 norm of the (non-intercept) coefficients, fitted by repeated local
quadratic approximation: an outer re-weighting step and inner soft-threshold
coordinate sweeps on the working response.  Dense feature matrices are
standardized internally (penalty applies on the standardized scale) and the
coefficients reported back on the original scale; sparse matrices are fitted
as-is since centering would destroy sparsity.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from .features import EncoderMeta
from .stats import TestResult, chi_square_sf, roc_auc
from .validation import as_float_matrix, check_binary_labels, check_consistent_length

__all__ = [
    "L1Logistic",
    "FittedModel",
    "ModelArtifact",
    "fit_model",
    "predict_probability",
    "log_likelihood",
    "log_likelihood_gradient",
    "likelihood_ratio_test",
    "select_l1_penalty",
]

_WEIGHT_FLOOR = 1e-9
_INNER_SWEEPS = 30


def _soft(a: float, t: float) -> float:
    if a > t:
        return a - t
    if a < -t:
        return a + t
    return 0.0


def log_likelihood(intercept: float, coef, X, y) -> float:
    """Sum Bernoulli log-likelihood at the given parameters (no penalty)."""
    X = as_float_matrix(X)
    y = check_binary_labels(y)
    eta = np.asarray(X @ np.asarray(coef, dtype=np.float64)).ravel() + intercept
    return float((y * eta - np.logaddexp(0.0, eta)).sum())


def log_likelihood_gradient(intercept: float, coef, X, y) -> tuple[float, np.ndarray]:
    """Gradient of the smooth part: (d/d intercept, d/d coef)."""
    X = as_float_matrix(X)
    y = check_binary_labels(y)
    eta = np.asarray(X @ np.asarray(coef, dtype=np.float64)).ravel() + intercept
    resid = y - expit(eta)
    return float(resid.sum()), np.asarray(X.T @ resid).ravel()


class _DenseCols:
    """Column accessor with per-reweighting precomputation (dense)."""

    def __init__(self, X: np.ndarray):
        self.X = X
        self.X2 = X * X

    def set_weights(self, w: np.ndarray) -> np.ndarray:
        self.WX = self.X * w[:, None]
        return w @ self.X2  # weighted squared column norms

    def dot(self, j, r):
        return float(self.WX[:, j] @ r)

    def sub_from(self, j, delta, r):
        r -= delta * self.X[:, j]


class _SparseCols:
    """Column accessor with per-reweighting precomputation (CSC)."""

    def __init__(self, X: sp.csc_matrix):
        self.indptr = X.indptr
        self.indices = X.indices
        self.data = X.data
        self.X2T = sp.csc_matrix(
            (X.data * X.data, X.indices.copy(), X.indptr.copy()), shape=X.shape
        ).T.tocsr()

    def set_weights(self, w: np.ndarray) -> np.ndarray:
        self.wdata = w[self.indices] * self.data
        return np.asarray(self.X2T @ w).ravel()

    def dot(self, j, r):
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return float(self.wdata[lo:hi] @ r[self.indices[lo:hi]])

    def sub_from(self, j, delta, r):
        lo, hi = self.indptr[j], self.indptr[j + 1]
        r[self.indices[lo:hi]] -= delta * self.data[lo:hi]


def _cd_inner(cols, p_dim, denom, w, w_sum, r, beta, b0, lam, active_only, active):
    """One coordinate sweep; returns (max parameter change, new b0)."""
    max_change = 0.0
    js = np.nonzero(active)[0] if active_only else range(p_dim)
    for j in js:
        d = denom[j]
        if d <= 0.0:
            continue
        old = beta[j]
        num = cols.dot(j, r) + d * old
        new = _soft(num, lam) / d
        if new != old:
            cols.sub_from(j, new - old, r)
            beta[j] = new
            if new != 0.0:
                active[j] = True
            max_change = max(max_change, abs(new - old))
    # unpenalized intercept
    shift = float(w @ r) / w_sum
    if shift != 0.0:
        r -= shift
        max_change = max(max_change, abs(shift))
    return max_change, b0 + shift


class L1Logistic(BaseEstimator, ClassifierMixin):
    """Logistic regression with an optional l1 penalty (sum-scale lambda).

    Parameters
    ----------
    l1_penalty : penalty weight on the l1 norm of the coefficients; 0 gives
        the unpenalized maximum-likelihood fit.
    max_iters : cap on outer re-weighting iterations.
    tol : convergence threshold on the largest parameter change.
    standardize : fit on zero-mean unit-variance columns (dense only).

    Attributes after fit: ``coef_``, ``intercept_`` (original scale),
    ``n_iter_``, ``converged_``, ``log_likelihood_``.
    """

    def __init__(
        self,
        l1_penalty: float = 0.0,
        max_iters: int = 10000,
        tol: float = 1e-8,
        standardize: bool = True,
    ):
        self.l1_penalty = l1_penalty
        self.max_iters = max_iters
        self.tol = tol
        self.standardize = standardize

    def fit(self, X, y, coef_init=None, intercept_init=None):
        X = as_float_matrix(X)
        y = check_binary_labels(y)
        check_consistent_length(X, y)
        if self.l1_penalty < 0:
            raise ValueError("l1_penalty must be >= 0")
        n, p = X.shape
        sparse = sp.issparse(X)
        if sparse and self.standardize:
            raise ValueError("standardize=True requires a dense matrix")
        if self.standardize:
            mu = X.mean(axis=0)
            sd = X.std(axis=0)
            sd = np.where(sd < 1e-12, 1.0, sd)
            Xw = (X - mu) / sd
            cols = _DenseCols(Xw)
        else:
            mu = np.zeros(p)
            sd = np.ones(p)
            Xw = X.tocsc() if sparse else X
            cols = _SparseCols(Xw) if sparse else _DenseCols(Xw)

        ybar = float(y.mean())
        b0 = math.log(ybar / (1.0 - ybar))
        beta = np.zeros(p)
        if coef_init is not None:
            # warm start comes in on the original scale
            c0 = np.asarray(coef_init, dtype=np.float64)
            beta = c0 * sd
            b0 = (0.0 if intercept_init is None else float(intercept_init)) + float(
                c0 @ mu
            )
        elif intercept_init is not None:
            b0 = float(intercept_init)
        eta = np.asarray(Xw @ beta).ravel() + b0
        lam = float(self.l1_penalty)
        converged = False
        n_outer = 0
        active = beta != 0.0
        for n_outer in range(1, self.max_iters + 1):
            pr = expit(eta)
            w = np.maximum(pr * (1.0 - pr), _WEIGHT_FLOOR)
            r = (y - pr) / w  # working residual around current eta
            w_sum = float(w.sum())
            denom = cols.set_weights(w)
            b0_prev, beta_prev = b0, beta.copy()
            # inner loop on the fixed quadratic: full sweep, then active-set
            # sweeps, then a full verification sweep.  The sweep budget keeps
            # each quadratic solve inexact-but-cheap; overall convergence is
            # still only declared after a clean full sweep.
            quad_solved = False
            change, b0 = _cd_inner(
                cols, p, denom, w, w_sum, r, beta, b0, lam, False, active
            )
            for _ in range(_INNER_SWEEPS):
                if change < self.tol:
                    change, b0 = _cd_inner(
                        cols, p, denom, w, w_sum, r, beta, b0, lam, False, active
                    )
                    if change < self.tol:
                        quad_solved = True
                        break
                else:
                    change, b0 = _cd_inner(
                        cols, p, denom, w, w_sum, r, beta, b0, lam, True, active
                    )
            eta = np.asarray(Xw @ beta).ravel() + b0
            outer_change = max(float(np.abs(beta - beta_prev).max(initial=0.0)), abs(b0 - b0_prev))
            if outer_change < self.tol and quad_solved:
                converged = True
                break

        self.coef_ = beta / sd
        self.intercept_ = float(b0 - float((beta / sd) @ mu))
        self.n_iter_ = n_outer
        self.converged_ = converged
        self.classes_ = np.array([0.0, 1.0])
        eta_orig = np.asarray(X @ self.coef_).ravel() + self.intercept_
        self.log_likelihood_ = float((y * eta_orig - np.logaddexp(0.0, eta_orig)).sum())
        return self

    def decision_function(self, X):
        if not hasattr(self, "coef_"):
            raise ValueError("L1Logistic is not fitted yet; call fit first")
        X = as_float_matrix(X)
        return np.asarray(X @ self.coef_).ravel() + self.intercept_

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= 0.0).astype(float)


@dataclass(frozen=True)
class FittedModel:
    """Named coefficient vector with fit diagnostics."""

    feature_names: tuple[str, ...]
    intercept: float
    coefficients: tuple[float, ...]
    l1_penalty: float
    converged: bool
    n_iters: int
    log_likelihood: float

    def __post_init__(self):
        if len(self.feature_names) != len(self.coefficients):
            raise ValueError("feature_names and coefficients length mismatch")

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.feature_names.index(name)]


def fit_model(
    X,
    y,
    feature_names,
    l1_penalty: float = 0.0,
    max_iters: int = 10000,
    tol: float = 1e-8,
    standardize: bool = True,
) -> FittedModel:
    """Fit and wrap the result with its feature names."""
    names = tuple(feature_names)
    if len(names) != X.shape[1]:
        raise ValueError("feature_names must match the matrix column count")
    est = L1Logistic(l1_penalty, max_iters, tol, standardize).fit(X, y)
    return FittedModel(
        feature_names=names,
        intercept=float(est.intercept_),
        coefficients=tuple(float(c) for c in est.coef_),
        l1_penalty=float(l1_penalty),
        converged=bool(est.converged_),
        n_iters=int(est.n_iter_),
        log_likelihood=float(est.log_likelihood_),
    )


def predict_probability(model: FittedModel, x) -> float:
    """Probability for one named feature vector (schema-checked)."""
    values = getattr(x, "values", x)
    if list(values.keys()) != list(model.feature_names):
        raise ValueError(
            "feature vector schema does not match the model's feature names"
        )
    eta = model.intercept + sum(
        c * float(values[n]) for n, c in zip(model.feature_names, model.coefficients)
    )
    return float(expit(eta))


def likelihood_ratio_test(
    X,
    y,
    feature_names,
    full,
    reduced,
    max_iters: int = 10000,
    tol: float = 1e-8,
    ll_full: float | None = None,
) -> TestResult:
    """Chi-square test of nested unpenalized fits (2 x log-likelihood gap).

    ``full`` and ``reduced`` are feature-name lists with reduced a strict
    subset of full.  Only valid at l1_penalty = 0.
    """
    names = list(feature_names)
    full_set, reduced_set = set(full), set(reduced)
    if not reduced_set < full_set:
        raise ValueError("reduced features must be a strict subset of full")
    if not full_set <= set(names):
        raise ValueError("full features must be drawn from feature_names")
    X = as_float_matrix(X)
    col = {n: i for i, n in enumerate(names)}
    full_idx = [col[n] for n in names if n in full_set]
    red_idx = [col[n] for n in names if n in reduced_set]
    if ll_full is None:
        ll_full = L1Logistic(0.0, max_iters, tol).fit(X[:, full_idx], y).log_likelihood_
    if red_idx:
        ll_red = L1Logistic(0.0, max_iters, tol).fit(X[:, red_idx], y).log_likelihood_
    else:
        yb = check_binary_labels(y)
        ybar = float(yb.mean())
        ll_red = float(
            len(yb) * (ybar * math.log(ybar) + (1 - ybar) * math.log(1 - ybar))
        )
    stat = max(2.0 * (ll_full - ll_red), 0.0)
    df = len(full_set) - len(reduced_set)
    return TestResult(
        float(stat), chi_square_sf(stat, df), "two-sided", "likelihood-ratio", df=df
    )


def _stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    for cls in (0.0, 1.0):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = np.arange(len(idx)) % n_folds
    return fold


def select_l1_penalty(
    X,
    y,
    n_folds: int = 5,
    lambdas=None,
    n_lambdas: int = 8,
    seed: int = 0,
    tol: float = 1e-6,
    max_iters: int = 500,
    standardize: bool = True,
) -> tuple[float, list[tuple[float, float]]]:
    """Pick the l1 penalty by stratified cross-validated AUC.

    The grid (when not given) is logarithmic below the smallest penalty that
    zeroes every coefficient.  Ties prefer the larger penalty.  Returns the
    winner and the (lambda, mean AUC) table.
    """
    X = as_float_matrix(X)
    y = check_binary_labels(y)
    if lambdas is None:
        if standardize and not sp.issparse(X):
            mu, sd = X.mean(axis=0), X.std(axis=0)
            sd = np.where(sd < 1e-12, 1.0, sd)
            grad0 = np.asarray(((X - mu) / sd).T @ (y - y.mean())).ravel()
        else:
            grad0 = np.asarray(X.T @ (y - y.mean())).ravel()
        lam_max = float(np.abs(grad0).max())
        if lam_max <= 0:
            raise ValueError("degenerate design: all gradient entries zero")
        # keep the grid away from the (near-)unpenalized regime when the
        # design is wider than it is tall: those fits separate and crawl
        ratio = 1e-2 if X.shape[1] >= X.shape[0] else 1e-3
        lambdas = np.geomspace(lam_max, lam_max * ratio, n_lambdas)
    lambdas = sorted(float(l) for l in lambdas)  # ascending; fit descending
    folds = _stratified_folds(y, n_folds, seed)
    aucs = np.zeros(len(lambdas))
    for f in range(n_folds):
        tr, va = folds != f, folds == f
        Xtr = X[tr] if not sp.issparse(X) else X[np.nonzero(tr)[0]]
        Xva = X[va] if not sp.issparse(X) else X[np.nonzero(va)[0]]
        coef, icept = None, None
        for li in reversed(range(len(lambdas))):
            est = L1Logistic(lambdas[li], max_iters, tol, standardize)
            est.fit(Xtr, y[tr], coef_init=coef, intercept_init=icept)
            coef, icept = est.coef_, est.intercept_
            aucs[li] += roc_auc(est.decision_function(Xva), y[va]).auc
    aucs /= n_folds
    best = max(range(len(lambdas)), key=lambda i: (aucs[i], lambdas[i]))
    return lambdas[best], list(zip(lambdas, aucs.tolist()))


@dataclass(frozen=True)
class ModelArtifact:
    """Self-contained scoring artifact: model + encoder + provenance.

    This JSON payload is the contract between training, the scoring service,
    and any UI: schema id, ordered feature names, intercept and
    coefficients, penalty, the encoder statistics needed to featurize new
    drafts, the corpus fingerprint, and fit diagnostics.
    """

    model: FittedModel
    encoder: EncoderMeta
    scheme: str
    schema_id: str
    epoch: int
    corpus_fingerprint: str
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        # NaN (a never-fit model, e.g. published coefficients loaded by
        # hand) is stored as null: bare NaN is not valid JSON and would
        # break non-Python consumers of the artifact.
        ll = self.model.log_likelihood
        return json.dumps(
            {
                "schema_id": self.schema_id,
                "scheme": self.scheme,
                "feature_names": list(self.model.feature_names),
                "intercept": self.model.intercept,
                "coefficients": list(self.model.coefficients),
                "l1_penalty": self.model.l1_penalty,
                "diagnostics": {
                    "converged": self.model.converged,
                    "n_iters": self.model.n_iters,
                    "log_likelihood": None if math.isnan(ll) else ll,
                },
                "encoder": self.encoder.to_dict(),
                "epoch": self.epoch,
                "corpus_fingerprint": self.corpus_fingerprint,
                "extra": self.extra,
            },
            indent=2,
            allow_nan=False,
        )

    @classmethod
    def from_json(cls, payload: str) -> "ModelArtifact":
        d = json.loads(payload)
        diag = d.get("diagnostics", {})
        ll = diag.get("log_likelihood")
        model = FittedModel(
            feature_names=tuple(d["feature_names"]),
            intercept=float(d["intercept"]),
            coefficients=tuple(float(c) for c in d["coefficients"]),
            l1_penalty=float(d.get("l1_penalty", 0.0)),
            converged=bool(diag.get("converged", True)),
            n_iters=int(diag.get("n_iters", 0)),
            log_likelihood=float("nan") if ll is None else float(ll),
        )
        return cls(
            model=model,
            encoder=EncoderMeta.from_dict(d["encoder"]),
            scheme=d.get("scheme", "regression"),
            schema_id=d["schema_id"],
            epoch=int(d["epoch"]),
            corpus_fingerprint=str(d.get("corpus_fingerprint", "")),
            extra=d.get("extra", {}),
        )

    @staticmethod
    def schema_id_for(scheme: str, feature_names, encoder_source: str) -> str:
        h = hashlib.sha256(
            ("\x1f".join([scheme, *feature_names, encoder_source])).encode()
        )
        return f"{scheme}:{h.hexdigest()[:12]}"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())
