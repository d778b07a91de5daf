"""Rank statistics, paired AUC comparison, exact tests, KDE, and tail functions.

Everything here is deterministic and side-effect free.  AUC is the rank
statistic (concordant pairs plus half the ties); the paired AUC comparison
follows the placement-value / structural-component construction with a
two-sided normal test.  The Mann-Whitney test switches to the exact
permutation distribution for small samples, where the normal approximation
is visibly off.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.special as special
import scipy.stats as sps

from .validation import as_float_array, check_consistent_length

__all__ = [
    "TestResult",
    "RocResult",
    "roc_auc",
    "delong_test",
    "mann_whitney_u",
    "binomial_test",
    "KdeResult",
    "gaussian_kde",
    "pearson_r",
    "chi_square_sf",
    "normal_sf",
]


@dataclass(frozen=True)
class TestResult:
    """Outcome of a hypothesis test.

    ``df`` is set only by tests with a degrees-of-freedom notion (the
    likelihood-ratio chi-square).
    """

    statistic: float
    p: float
    tail: str  # "one-sided" | "two-sided"
    method: str
    degenerate: bool = False
    df: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p-value out of range: {self.p}")


def _midranks(x: np.ndarray) -> np.ndarray:
    """Midranks (1-based; tied values share the average of their ranks)."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(xs):
        j = i
        while j < len(xs) and xs[j] == xs[i]:
            j += 1
        ranks[i:j] = 0.5 * (i + j - 1) + 1.0
        i = j
    out = np.empty(len(x), dtype=np.float64)
    out[order] = ranks
    return out


@dataclass(frozen=True)
class RocResult:
    """ROC curve with its rank-statistic AUC."""

    auc: float
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    n_pos: int
    n_neg: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["fpr", "tpr"])
            for x, y in zip(self.fpr, self.tpr):
                w.writerow([f"{x:.10g}", f"{y:.10g}"])


def _split_by_label(scores, labels):
    s = as_float_array(scores, "scores")
    y = np.asarray(labels)
    check_consistent_length(s, y)
    y = y.astype(bool)
    pos, neg = s[y], s[~y]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both classes must be present")
    return pos, neg


def roc_auc(scores, labels) -> RocResult:
    """Rank AUC plus the full curve (ties credited half a concordance).

    The trapezoidal area under the returned curve equals ``auc`` exactly;
    tied scores appear as diagonal segments.
    """
    pos, neg = _split_by_label(scores, labels)
    s = np.concatenate([pos, neg])
    n_pos, n_neg = len(pos), len(neg)
    ranks = _midranks(s)
    auc = (ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    y = np.concatenate([np.ones(n_pos, bool), np.zeros(n_neg, bool)])
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    distinct = np.nonzero(np.diff(s_sorted))[0]
    cut = np.r_[distinct, len(s_sorted) - 1]
    tp = np.cumsum(y_sorted)[cut]
    fp = np.cumsum(~y_sorted)[cut]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[np.inf, s_sorted[cut]]
    return RocResult(float(auc), fpr, tpr, thresholds, n_pos, n_neg)


def _placements(scores, labels):
    pos, neg = _split_by_label(scores, labels)
    n_pos, n_neg = len(pos), len(neg)
    tz = _midranks(np.concatenate([pos, neg]))
    tx = _midranks(pos)
    ty = _midranks(neg)
    v_pos = (tz[:n_pos] - tx) / n_neg  # per-positive placement values
    v_neg = 1.0 - (tz[n_pos:] - ty) / n_pos  # per-negative placement values
    return v_pos, v_neg


def delong_test(scores_a, scores_b, labels) -> TestResult:
    """Two-sided comparison of two correlated AUCs on the same labels.

    Uses per-observation placement values; the variance of the AUC
    difference combines the positive- and negative-side covariance matrices.
    A zero-variance comparison of equal AUCs returns p = 1 with the
    ``degenerate`` flag set.
    """
    va_pos, va_neg = _placements(scores_a, labels)
    vb_pos, vb_neg = _placements(scores_b, labels)
    if len(va_pos) < 2 or len(va_neg) < 2:
        raise ValueError("need at least two observations in each class")
    auc_a = float(np.mean(va_pos))
    auc_b = float(np.mean(vb_pos))
    s_pos = np.cov(np.vstack([va_pos, vb_pos]), ddof=1)
    s_neg = np.cov(np.vstack([va_neg, vb_neg]), ddof=1)
    var = (s_pos[0, 0] + s_pos[1, 1] - 2 * s_pos[0, 1]) / len(va_pos) + (
        s_neg[0, 0] + s_neg[1, 1] - 2 * s_neg[0, 1]
    ) / len(va_neg)
    diff = auc_a - auc_b
    if var <= 0 or math.isclose(var, 0.0, abs_tol=1e-16):
        if math.isclose(diff, 0.0, abs_tol=1e-12):
            return TestResult(0.0, 1.0, "two-sided", "delong", degenerate=True)
        return TestResult(math.copysign(math.inf, diff), 0.0, "two-sided", "delong", degenerate=True)
    z = diff / math.sqrt(var)
    return TestResult(float(z), float(2.0 * normal_sf(abs(z))), "two-sided", "delong")


def _mw_exact(rx2: int, ranks2: np.ndarray, n_x: int, alternative: str) -> float:
    """Exact permutation tail of the doubled rank sum via subset-sum counting."""
    total_sum = int(ranks2.sum())
    n = len(ranks2)
    # dp[k][s]: number of k-subsets of the doubled ranks with sum s
    dp = np.zeros((n_x + 1, total_sum + 1), dtype=np.float64)
    dp[0, 0] = 1.0
    for r in ranks2:
        r = int(r)
        for k in range(min(n_x, n), 0, -1):
            dp[k, r:] += dp[k - 1, : total_sum + 1 - r]
    counts = dp[n_x]
    n_subsets = counts.sum()
    sums = np.arange(total_sum + 1)
    if alternative == "greater":
        mask = sums >= rx2
    elif alternative == "less":
        mask = sums <= rx2
    else:
        mu2 = n_x * (n + 1)  # doubled mean of the rank sum
        mask = np.abs(sums - mu2) >= abs(rx2 - mu2)
    return float(counts[mask].sum() / n_subsets)


def mann_whitney_u(x, y, alternative: str = "two-sided") -> TestResult:
    """Rank-sum test; U counts pairs where x exceeds y (ties half).

    ``alternative='greater'`` tests whether x tends larger than y.  When both
    samples have at most 8 observations the exact permutation distribution of
    the rank sum (midranks, so ties are handled exactly) is used; otherwise
    the normal approximation with tie-corrected variance and continuity
    correction.  The statistic reported is U for sample ``x``; the
    complementary convention is ``n_x * n_y - U``.
    """
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError("alternative must be two-sided, greater, or less")
    xa = as_float_array(x, "x")
    ya = as_float_array(y, "y")
    n_x, n_y = len(xa), len(ya)
    if n_x == 0 or n_y == 0:
        raise ValueError("both samples must be non-empty")
    combined = np.concatenate([xa, ya])
    ranks = _midranks(combined)
    r_x = ranks[:n_x].sum()
    u = r_x - n_x * (n_x + 1) / 2.0
    tail = "two-sided" if alternative == "two-sided" else "one-sided"

    if n_x <= 8 and n_y <= 8:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        rx2 = int(np.rint(2.0 * r_x))
        p = _mw_exact(rx2, ranks2, n_x, alternative)
        return TestResult(float(u), min(p, 1.0), tail, "mann-whitney-exact")

    n = n_x + n_y
    mu = n_x * n_y / 2.0
    _, tie_counts = np.unique(combined, return_counts=True)
    tie_term = float(((tie_counts**3 - tie_counts).sum()) / (n * (n - 1)))
    var = n_x * n_y / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return TestResult(float(u), 1.0, tail, "mann-whitney-normal", degenerate=True)
    sd = math.sqrt(var)
    if alternative == "greater":
        z = (u - mu - 0.5) / sd
        p = normal_sf(z)
    elif alternative == "less":
        z = (u - mu + 0.5) / sd
        p = 1.0 - normal_sf(z)
    else:
        z = (abs(u - mu) - 0.5) / sd
        p = 2.0 * normal_sf(max(z, 0.0))
    return TestResult(float(u), float(min(p, 1.0)), tail, "mann-whitney-normal")


def binomial_test(k: int, n: int, p0: float, alternative: str = "two-sided") -> TestResult:
    """Exact binomial tail test of ``k`` successes in ``n`` trials.

    Two-sided p sums the probabilities of all outcomes no more likely than
    the observed one (ties included).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= k <= n:
        raise ValueError("k must be in [0, n]")
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must be in (0, 1)")
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError("alternative must be two-sided, greater, or less")
    if alternative == "greater":
        p = float(sps.binom.sf(k - 1, n, p0))
        tail = "one-sided"
    elif alternative == "less":
        p = float(sps.binom.cdf(k, n, p0))
        tail = "one-sided"
    else:
        pmf = sps.binom.pmf(np.arange(n + 1), n, p0)
        # mathematically tied outcomes (e.g. the two tails at p0 = 1/2) come
        # out a few ulps apart in floats; the relative slack keeps true ties
        # inside the sum
        p = float(pmf[pmf <= pmf[k] * (1.0 + 1e-7)].sum())
        tail = "two-sided"
    return TestResult(float(k), min(p, 1.0), tail, "binomial-exact")


@dataclass(frozen=True)
class KdeResult:
    """Gaussian kernel density estimate with a fixed evaluation grid."""

    x: np.ndarray
    density: np.ndarray
    bandwidth: float
    samples: np.ndarray = field(repr=False)

    def evaluate(self, q) -> np.ndarray:
        q = np.atleast_1d(np.asarray(q, dtype=np.float64))
        u = (q[:, None] - self.samples[None, :]) / self.bandwidth
        return np.exp(-0.5 * u * u).sum(axis=1) / (
            len(self.samples) * self.bandwidth * math.sqrt(2.0 * math.pi)
        )

    def __call__(self, q):
        out = self.evaluate(q)
        return float(out[0]) if np.isscalar(q) or np.ndim(q) == 0 else out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "density"])
            for x, y in zip(self.x, self.density):
                w.writerow([f"{x:.10g}", f"{y:.10g}"])


def gaussian_kde(samples, bandwidth: float, grid_points: int = 512) -> KdeResult:
    """Fixed-bandwidth Gaussian KDE on a grid spanning min-4h .. max+4h."""
    s = as_float_array(samples, "samples")
    if len(s) == 0:
        raise ValueError("samples must be non-empty")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    lo = s.min() - 4.0 * bandwidth
    hi = s.max() + 4.0 * bandwidth
    grid = np.linspace(lo, hi, grid_points)
    result = KdeResult(grid, np.empty(grid_points), bandwidth, s)
    density = result.evaluate(grid)
    return KdeResult(grid, density, bandwidth, s)


def pearson_r(x, y) -> float:
    """Pearson correlation; raises on constant input."""
    xa = as_float_array(x, "x")
    ya = as_float_array(y, "y")
    check_consistent_length(xa, ya)
    if len(xa) < 2:
        raise ValueError("need at least two observations")
    if np.std(xa) == 0 or np.std(ya) == 0:
        raise ValueError("correlation undefined for constant input")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    return float((xc @ yc) / math.sqrt((xc @ xc) * (yc @ yc)))


def chi_square_sf(x: float, df: float) -> float:
    """Upper tail of the chi-square distribution (regularized incomplete gamma)."""
    if x < 0:
        raise ValueError("x must be >= 0")
    if df <= 0:
        raise ValueError("df must be positive")
    return float(special.gammaincc(df / 2.0, x / 2.0))


def normal_sf(z: float) -> float:
    """Standard normal upper tail via the complementary error function."""
    return float(0.5 * special.erfc(z / math.sqrt(2.0)))
