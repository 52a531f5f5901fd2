"""Nonparametric model comparison: Friedman, exact Wilcoxon, Bonferroni.

With only a handful of cross-validation folds per model the usual
large-sample approximations are meaningless, so the Wilcoxon signed-rank
p value is computed exactly by enumerating all 2^n sign assignments
(n <= 25 after zero differences are dropped; here n is 3). The Friedman
chi-square tail comes from an in-module regularized incomplete gamma
(series for small arguments, continued fraction for large), good to
about 1e-10 absolute for df <= 30.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MAX_EXACT_N = 25


@dataclass(frozen=True)
class PairwiseResult:
    name: str
    w_statistic: float
    p_value: float


@dataclass(frozen=True)
class StatTestReport:
    friedman_chi2: float
    friedman_p: float
    pairwise: tuple[PairwiseResult, ...]
    alpha_corrected: float


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by power series; for x < a + 1."""
    term = 1.0 / a
    total = term
    n = a
    for _ in range(500):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by Lentz continued fraction; x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_sf(x: float, df: int) -> float:
    """Upper tail P(X >= x) of a chi-square with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0.0:
        return 1.0
    a = df / 2.0
    half = x / 2.0
    if half < a + 1.0:
        return 1.0 - _gamma_p_series(a, half)
    return _gamma_q_contfrac(a, half)


def _rank_with_ties(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n, ties replaced by the mean rank of the tied group."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def friedman_test(scores: np.ndarray) -> tuple[float, float]:
    """Friedman rank test on a (k models) x (n folds) score matrix.

    chi2 = 12n / (k (k+1)) * sum_j Rbar_j^2 - 3 n (k+1), with mean ranks
    Rbar_j over folds (average ranks on ties, no tie variance correction);
    p from the chi-square upper tail with k - 1 degrees of freedom.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2:
        raise ValueError("scores must be a models x folds matrix")
    k, n = scores.shape
    if k < 2 or n < 2:
        raise ValueError(f"need >= 2 models and >= 2 folds, got {k} x {n}")
    ranks = np.column_stack([_rank_with_ties(scores[:, fold]) for fold in range(n)])
    mean_ranks = ranks.mean(axis=1)
    chi2 = 12.0 * n / (k * (k + 1)) * float(np.sum(mean_ranks**2)) - 3.0 * n * (k + 1)
    chi2 = max(chi2, 0.0)  # tie-heavy inputs can round a hair below zero
    return chi2, chi2_sf(chi2, k - 1)


def wilcoxon_signed_rank(a, b) -> tuple[float, float]:
    """Exact two-sided Wilcoxon signed-rank test for paired samples.

    Zero differences are dropped. W is the smaller of the two signed rank
    sums; the p value is the exact probability, over all 2^n equally
    likely sign assignments, of a min rank sum <= the observed one. All
    differences zero is degenerate and returns (0, 1).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 1:
        raise ValueError("need two equal-length 1-d samples")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        return 0.0, 1.0
    if n > _MAX_EXACT_N:
        raise ValueError(f"exact enumeration limited to n <= {_MAX_EXACT_N}, got {n}")
    ranks = _rank_with_ties(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    total = float(ranks.sum())
    w = min(w_plus, total - w_plus)

    count = 0
    for mask in range(1 << n):
        t = 0.0
        for i in range(n):
            if mask >> i & 1:
                t += ranks[i]
        if min(t, total - t) <= w + 1e-12:
            count += 1
    return w, count / (1 << n)


def bonferroni(p_values, alpha: float = 0.05) -> tuple[float, list[bool]]:
    """Corrected level alpha / m and per-test reject flags (p < corrected)."""
    p_values = list(p_values)
    if not p_values:
        raise ValueError("need at least one p value")
    corrected = alpha / len(p_values)
    return corrected, [p < corrected for p in p_values]


def compare_models(
    model_scores: dict[str, np.ndarray], alpha: float = 0.05
) -> StatTestReport:
    """Friedman over all models plus pairwise Wilcoxon with Bonferroni.

    ``model_scores`` maps model name to its per-fold score vector; pairs
    are formed in the given key order (e.g. C-DV, C-CV, DV-CV).
    """
    names = list(model_scores)
    matrix = np.vstack([np.asarray(model_scores[name], dtype=float) for name in names])
    chi2, chi2_p = friedman_test(matrix)
    pairs = [
        (i, j) for i in range(len(names)) for j in range(i + 1, len(names))
    ]
    pairwise = []
    for i, j in pairs:
        w, p = wilcoxon_signed_rank(matrix[i], matrix[j])
        pairwise.append(PairwiseResult(f"{names[i]}-{names[j]}", w, p))
    corrected, _ = bonferroni([r.p_value for r in pairwise], alpha)
    return StatTestReport(
        friedman_chi2=chi2,
        friedman_p=chi2_p,
        pairwise=tuple(pairwise),
        alpha_corrected=corrected,
    )
