"""Sparse non-negative matrix factorization for request topics.

Factorizes a document-term matrix X (n_docs x n_terms) as W @ H with
W >= 0, H >= 0, minimizing the Frobenius residual.  W rows (per-document
topic loadings) can be constrained to a minimum Hoyer sparseness.  Without
the constraint both factors follow exact block-coordinate updates (each
topic row/column minimized in closed form, then clipped at zero), which
are monotone and reach planted factorizations far faster than
multiplicative steps.  With the constraint the W step becomes projected
gradient descent with a backtracking line search so the objective still
never increases between outer iterations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from .textkit import Vocabulary
from .validation import as_float_matrix, check_non_negative

__all__ = [
    "hoyer_sparseness",
    "nndsvd_init",
    "SparseNMF",
    "TopicModel",
    "fit_nmf",
    "top_terms",
    "topic_success_rates",
]

_EPS = 1e-8  # NNDSVD zero replacement
_DIV = 1e-12  # multiplicative-update denominator guard


def hoyer_sparseness(v) -> float:
    """Sparseness in [0, 1]: (sqrt(n) - l1/l2) / (sqrt(n) - 1).

    0 for a constant vector, 1 for a one-hot vector.  Undefined (raises) for
    the all-zero vector or length < 2.
    """
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size < 2:
        raise ValueError("sparseness needs a vector of length >= 2")
    l2 = np.linalg.norm(arr)
    if l2 == 0:
        raise ValueError("sparseness undefined for the all-zero vector")
    l1 = np.abs(arr).sum()
    rt_n = math.sqrt(arr.size)
    return float((rt_n - l1 / l2) / (rt_n - 1.0))


def _project_sparse(x: np.ndarray, l1: float, l2: float) -> np.ndarray:
    """Closest non-negative vector with the given l1 and l2 norms.

    Alternating projection onto the sum hyperplane and the l2 sphere,
    zeroing negative coordinates until feasible.
    """
    n = x.size
    s = x + (l1 - x.sum()) / n
    zero = np.zeros(n, dtype=bool)
    for _ in range(n + 1):
        active = ~zero
        n_active = int(active.sum())
        m = np.where(active, l1 / n_active, 0.0)
        w = s - m
        a2 = float(w @ w)
        if a2 < 1e-300:
            s = m.copy()
        else:
            b = float(w @ m)
            c = float(m @ m) - l2 * l2
            disc = max(b * b - a2 * c, 0.0)
            alpha = (-b + math.sqrt(disc)) / a2
            s = m + alpha * w
        neg = s < 0
        if not neg.any():
            return s
        zero |= neg
        s[zero] = 0.0
        active = ~zero
        n_active = int(active.sum())
        if n_active == 0:
            break
        s[active] -= (s[active].sum() - l1) / n_active
    # fully zeroed out: fall back to a one-hot vector on the l2 sphere
    out = np.zeros(n)
    out[int(np.argmax(x))] = l2
    return out


def _project_rows(W: np.ndarray, target: float) -> np.ndarray:
    """Clip rows non-negative and raise any row below the sparseness target."""
    W = np.maximum(W, 0.0)
    rt_k = math.sqrt(W.shape[1])
    for i in range(W.shape[0]):
        row = W[i]
        l2 = float(np.linalg.norm(row))
        if l2 < 1e-30:
            row[:] = 0.0
            row[0] = _EPS
            continue
        if hoyer_sparseness(row) >= target:
            continue
        l1 = l2 * (rt_k - target * (rt_k - 1.0))
        W[i] = _project_sparse(row, l1, l2)
    return W


def nndsvd_init(X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """SVD-seeded non-negative initialization.

    Leading singular pair gives the first component; each further singular
    vector pair is split into positive and negative parts and the dominant
    pair kept.  Zeros are replaced by a small epsilon so multiplicative
    updates can move every entry.
    """
    X = as_float_matrix(X)
    check_non_negative(X)
    n, m = X.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > min(n, m):
        raise ValueError(f"k={k} exceeds matrix dimensions {X.shape}")
    if sp.issparse(X) and k < min(n, m) - 1:
        # deterministic start vector: svds' default is randomized
        v0 = np.ones(min(n, m), dtype=np.float64)
        u, s, vt = sp.linalg.svds(X, k=k, v0=v0)
        order = np.argsort(-s)
        u, s, vt = u[:, order], s[order], vt[order]
    else:
        Xd = X.toarray() if sp.issparse(X) else X
        u, s, vt = np.linalg.svd(Xd, full_matrices=False)
        u, s, vt = u[:, :k], s[:k], vt[:k]

    W = np.zeros((n, k))
    H = np.zeros((k, m))
    W[:, 0] = math.sqrt(s[0]) * np.abs(u[:, 0])
    H[0, :] = math.sqrt(s[0]) * np.abs(vt[0, :])
    for j in range(1, k):
        uj, vj = u[:, j], vt[j, :]
        up, un = np.maximum(uj, 0), np.maximum(-uj, 0)
        vp, vn = np.maximum(vj, 0), np.maximum(-vj, 0)
        nup, nun = np.linalg.norm(up), np.linalg.norm(un)
        nvp, nvn = np.linalg.norm(vp), np.linalg.norm(vn)
        mp, mn = nup * nvp, nun * nvn
        if mp >= mn:
            uu = up / nup if nup > 0 else up
            vv = vp / nvp if nvp > 0 else vp
            sig = mp
        else:
            uu = un / nun if nun > 0 else un
            vv = vn / nvn if nvn > 0 else vn
            sig = mn
        W[:, j] = math.sqrt(s[j] * sig) * uu
        H[j, :] = math.sqrt(s[j] * sig) * vv
    W[W < _EPS] = _EPS
    H[H < _EPS] = _EPS
    return W, H


def _sq_norm(X) -> float:
    if sp.issparse(X):
        return float((X.data**2).sum())
    return float((X**2).sum())


def _residual_norm(sqX: float, XHt: np.ndarray, W: np.ndarray, HHt: np.ndarray) -> float:
    """||X - WH||_F given precomputed X@H.T and H@H.T."""
    val = sqX - 2.0 * float((W * XHt).sum()) + float(((W.T @ W) * HHt).sum())
    return math.sqrt(max(val, 0.0))


class SparseNMF(BaseEstimator, TransformerMixin):
    """NMF with an optional Hoyer sparseness floor on document loadings.

    Parameters
    ----------
    n_topics : number of components k.
    target_sparseness : required minimum Hoyer sparseness of each W row,
        in [0, 1); None disables the constraint.
    max_iters, tol : outer-iteration budget and relative-objective stop.
    init : "nndsvd" (deterministic) or "random".
    random_state : seed for random init; ignored by nndsvd.

    Attributes (after fit): ``W_``, ``H_``, ``objective_trace_`` (Frobenius
    residual per outer iteration, never increasing), ``n_iter_``,
    ``converged_``.
    """

    def __init__(
        self,
        n_topics: int = 10,
        target_sparseness: float | None = 0.5,
        max_iters: int = 500,
        tol: float = 1e-5,
        init: str = "nndsvd",
        random_state: int | None = 0,
    ):
        self.n_topics = n_topics
        self.target_sparseness = target_sparseness
        self.max_iters = max_iters
        self.tol = tol
        self.init = init
        self.random_state = random_state

    def _check_params(self, X):
        if self.n_topics < 1:
            raise ValueError("n_topics must be >= 1")
        if self.n_topics > min(X.shape):
            raise ValueError(
                f"n_topics={self.n_topics} exceeds matrix dimensions {X.shape}"
            )
        if self.target_sparseness is not None and not (
            0.0 <= self.target_sparseness < 1.0
        ):
            raise ValueError("target_sparseness must be in [0, 1) or None")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def fit(self, X, y=None):
        X = as_float_matrix(X)
        check_non_negative(X)
        self._check_params(X)
        k = self.n_topics
        if self.init == "nndsvd":
            W, H = nndsvd_init(X, k)
        elif self.init == "random":
            rng = np.random.default_rng(self.random_state)
            W = rng.uniform(0.1, 1.0, size=(X.shape[0], k))
            H = rng.uniform(0.1, 1.0, size=(k, X.shape[1]))
        else:
            raise ValueError("init must be 'nndsvd' or 'random'")

        sqX = _sq_norm(X)
        Xt = X.T.tocsr() if sp.issparse(X) else X.T
        target = self.target_sparseness
        if target is not None:
            W = _project_rows(W, target)

        def xht(Hm):
            out = X @ Hm.T
            return np.asarray(out)

        trace: list[float] = []
        HHt = H @ H.T
        prev = _residual_norm(sqX, xht(H), W, HHt)
        trace.append(prev)
        step = 1.0
        converged = False
        it = 0
        for it in range(1, self.max_iters + 1):
            # H step: per-topic exact coordinate minimization, clipped at 0
            # (monotone for fixed W); dead topics are skipped
            WtX = np.asarray(W.T @ X)
            WtW = W.T @ W
            for t in range(k):
                if WtW[t, t] <= 0.0:
                    continue
                H[t] = np.maximum(H[t] + (WtX[t] - WtW[t] @ H) / WtW[t, t], 0.0)
            HHt = H @ H.T
            XHt = xht(H)

            if target is None:
                # W step: same exact per-topic updates on columns
                for t in range(k):
                    if HHt[t, t] <= 0.0:
                        continue
                    W[:, t] = np.maximum(
                        W[:, t] + (XHt[:, t] - W @ HHt[:, t]) / HHt[t, t], 0.0
                    )
            else:
                # W step: projected gradient with backtracking so the
                # objective cannot increase after projection
                obj_before = _residual_norm(sqX, XHt, W, HHt)
                grad = W @ HHt - XHt
                accepted = False
                for _ in range(40):
                    W_try = _project_rows(W - step * grad, target)
                    if _residual_norm(sqX, XHt, W_try, HHt) <= obj_before:
                        W = W_try
                        step *= 1.2
                        accepted = True
                        break
                    step *= 0.5
                if not accepted:
                    converged = True  # no admissible step: at a fixed point

            obj = _residual_norm(sqX, XHt, W, HHt)
            if obj > prev:
                # exact-arithmetic monotonicity lost to roundoff: stop here,
                # keeping the previous (better) trace value
                converged = True
                break
            trace.append(obj)
            if prev > 0 and (prev - obj) / max(prev, 1e-300) < self.tol:
                prev = obj
                converged = True
                break
            prev = obj
            if converged:
                break

        self.W_ = W
        self.H_ = H
        self.objective_trace_ = trace
        self.n_iter_ = it
        self.converged_ = converged
        return self

    def transform(self, X) -> np.ndarray:
        """Topic loadings for new documents with H fixed (multiplicative)."""
        if not hasattr(self, "H_"):
            raise ValueError("SparseNMF is not fitted yet; call fit first")
        X = as_float_matrix(X)
        check_non_negative(X)
        H = self.H_
        HHt = H @ H.T
        W = np.full((X.shape[0], H.shape[0]), 0.1)
        for _ in range(200):
            XHt = np.asarray(X @ H.T)
            W_new = W * XHt / (W @ HHt + _DIV)
            if np.abs(W_new - W).max() < 1e-8:
                W = W_new
                break
            W = W_new
        return W


@dataclass
class TopicModel:
    """Fitted factorization with the vocabulary that defines H's columns."""

    W: np.ndarray
    H: np.ndarray
    vocab: Vocabulary
    k: int
    objective_trace: list[float]

    def to_json(self) -> str:
        w = sp.coo_matrix(self.W)
        h_rows = []
        for row in self.H:
            nz = np.nonzero(row)[0]
            h_rows.append({self.vocab.terms[j]: float(row[j]) for j in nz})
        return json.dumps(
            {
                "k": self.k,
                "n_docs": self.W.shape[0],
                "w_triplets": [
                    [int(i), int(j), float(v)]
                    for i, j, v in zip(w.row, w.col, w.data)
                ],
                "h_rows": h_rows,
                "vocab": json.loads(self.vocab.to_json()),
                "objective_trace": [float(v) for v in self.objective_trace],
            }
        )

    @classmethod
    def from_json(cls, payload: str) -> "TopicModel":
        d = json.loads(payload)
        vocab = Vocabulary(
            tuple(d["vocab"]["terms"]),
            tuple(d["vocab"]["df"]),
            int(d["vocab"]["n_docs"]),
        )
        k = int(d["k"])
        W = np.zeros((int(d["n_docs"]), k))
        for i, j, v in d["w_triplets"]:
            W[i, j] = v
        idx = vocab.index()
        H = np.zeros((k, len(vocab)))
        for r, row in enumerate(d["h_rows"]):
            for term, v in row.items():
                H[r, idx[term]] = v
        return cls(W, H, vocab, k, list(d["objective_trace"]))


def fit_nmf(
    X,
    vocab: Vocabulary,
    k: int = 10,
    target_sparseness: float | None = 0.5,
    max_iters: int = 500,
    tol: float = 1e-5,
    seed: int | None = 0,
    init: str = "nndsvd",
) -> TopicModel:
    """Fit :class:`SparseNMF` and package the result with its vocabulary."""
    if len(vocab) != X.shape[1]:
        raise ValueError("vocabulary size must match the matrix column count")
    est = SparseNMF(
        n_topics=k,
        target_sparseness=target_sparseness,
        max_iters=max_iters,
        tol=tol,
        init=init,
        random_state=seed,
    ).fit(X)
    return TopicModel(est.W_, est.H_, vocab, k, est.objective_trace_)


def top_terms(model: TopicModel, m: int = 15) -> list[list[str]]:
    """Per topic, the m highest-weight terms; ties break lexicographically."""
    out = []
    for row in model.H:
        order = sorted(range(len(row)), key=lambda j: (-row[j], model.vocab.terms[j]))
        out.append([model.vocab.terms[j] for j in order[:m]])
    return out


def topic_success_rates(model: TopicModel, successes) -> dict[int, float]:
    """Success rate of documents grouped by their dominant topic.

    Dominant topic is the argmax of a document's W row (lowest index on
    ties).  Topics with no assigned documents are absent from the result.
    The document-count-weighted mean of the rates equals the overall rate.
    """
    y = np.asarray(successes, dtype=np.float64)
    if len(y) != model.W.shape[0]:
        raise ValueError("successes length must match the number of documents")
    dominant = np.argmax(model.W, axis=1)
    rates: dict[int, float] = {}
    for t in range(model.k):
        mask = dominant == t
        if mask.any():
            rates[t] = float(y[mask].mean())
    return rates
