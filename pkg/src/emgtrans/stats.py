"""Nonparametric comparison (Kruskal-Wallis, Dunn-Sidak post-hoc) and
Pearson correlation.

Ranks use midranks for ties with the standard tie-correction factor; KW
p-values come from the chi-square approximation, and the Student-t tail for
Pearson is evaluated through the regularized incomplete beta function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import ParameterError


@dataclass(frozen=True)
class KWResult:
    h: float
    df: int
    p_value: float
    group_sizes: tuple[int, ...]
    mean_ranks: tuple[float, ...]


@dataclass(frozen=True)
class PairComparison:
    a: int
    b: int
    z: float
    p_raw: float
    p_adjusted: float
    significant: bool


@dataclass(frozen=True)
class PosthocResult:
    comparisons: tuple[PairComparison, ...]
    m: int
    alpha: float


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int


def _pooled_ranks(groups):
    cleaned = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(cleaned) < 2:
        raise ParameterError("need at least 2 groups")
    for i, g in enumerate(cleaned):
        if g.size == 0:
            raise ParameterError(f"group {i} is empty")
    pooled = np.concatenate(cleaned)
    ranks = rankdata(pooled)
    sizes = [g.size for g in cleaned]
    bounds = np.cumsum([0] + sizes)
    group_ranks = [ranks[bounds[i]:bounds[i + 1]] for i in range(len(sizes))]
    _, counts = np.unique(pooled, return_counts=True)
    tie_sum = float(np.sum(counts.astype(np.float64) ** 3 - counts))
    return group_ranks, sizes, pooled.size, tie_sum


def kruskal_wallis(groups) -> KWResult:
    """Rank-based H with tie correction; p from chi-square with k-1 df."""
    group_ranks, sizes, n, tie_sum = _pooled_ranks(groups)
    df = len(sizes) - 1
    mean_ranks = tuple(float(r.mean()) for r in group_ranks)
    rank_sums = [float(r.sum()) for r in group_ranks]
    h = 12.0 / (n * (n + 1)) * sum(
        rs * rs / sz for rs, sz in zip(rank_sums, sizes)
    ) - 3.0 * (n + 1)
    correction = 1.0 - tie_sum / (n**3 - n) if n > 1 else 0.0
    if correction <= 0.0:
        # every pooled value identical: no evidence of a group effect
        return KWResult(0.0, df, 1.0, tuple(sizes), mean_ranks)
    h = max(h / correction, 0.0)
    p = float(special.chdtrc(df, h))
    return KWResult(float(h), df, p, tuple(sizes), mean_ranks)


def dunn_sidak(groups, alpha: float = 0.05) -> PosthocResult:
    """Dunn's pairwise z-tests on mean ranks, Sidak-adjusted over all
    k(k-1)/2 comparisons."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    group_ranks, sizes, n, tie_sum = _pooled_ranks(groups)
    k = len(sizes)
    m = k * (k - 1) // 2
    base_var = n * (n + 1) / 12.0 - tie_sum / (12.0 * (n - 1)) if n > 1 else 0.0
    comparisons = []
    for i in range(k):
        for j in range(i + 1, k):
            diff = float(group_ranks[i].mean() - group_ranks[j].mean())
            se = math.sqrt(base_var * (1.0 / sizes[i] + 1.0 / sizes[j]))
            if se == 0.0:
                z, p_raw = 0.0, 1.0
            else:
                z = diff / se
                p_raw = float(2.0 * special.ndtr(-abs(z)))
            p_adj = sidak_adjust(p_raw, m)
            comparisons.append(
                PairComparison(i, j, z, p_raw, p_adj, p_adj < alpha)
            )
    return PosthocResult(tuple(comparisons), m, alpha)


def sidak_adjust(p: float, m: int) -> float:
    """Sidak family-wise adjustment: 1 - (1-p)^m, monotone and >= p."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    p = min(max(p, 0.0), 1.0)
    if p == 1.0:
        return 1.0
    return float(-math.expm1(m * math.log1p(-p)))


def student_t_two_sided_p(t: float, df: int) -> float:
    """P(|T| >= |t|) for Student's t via the regularized incomplete beta."""
    if df < 1:
        raise ParameterError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def pearson(x, y) -> CorrelationResult:
    """Product-moment correlation with a t-distribution p-value (n-2 df)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("x and y must be 1-D with equal lengths")
    n = x.size
    if n < 3:
        raise ParameterError("need n >= 3 for a p-value")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ParameterError("correlation undefined: zero variance")
    r = float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))
    if abs(r) == 1.0:
        return CorrelationResult(r, 0.0, n)
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return CorrelationResult(r, student_t_two_sided_p(t, df), n)
