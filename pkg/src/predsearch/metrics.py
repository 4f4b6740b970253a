"""Benchmarking metrics: primal gap, primal integral, Wilcoxon test.

The primal gap of a bound v against the best-known value v* is
|v - v*| / max(|v*|, 1e-8). It is defined when v exists and v and v*
share a sign; otherwise a capped fallback of 1.0 applies so the primal
integral stays bounded. The primal integral is the exact step-function
integral of the capped gap over [0, T]: 1.0 before the first incumbent,
then the capped gap of the latest incumbent.

The Wilcoxon signed-rank p-value is exact for n <= 20 (full enumeration
of sign patterns via a subset-sum convolution over doubled mid-ranks)
and uses a tie- and continuity-corrected normal approximation above.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DimensionError, ValidationError

GAP_EPS = 1e-8
GAP_FALLBACK = 1.0
EXACT_WILCOXON_MAX_N = 20


def primal_gap(v: float | None, v_star: float) -> float:
    """Raw (uncapped) primal gap; 1.0 when v is missing or signs differ."""
    if v is None or not math.isfinite(v):
        return GAP_FALLBACK
    if v * v_star < 0:
        return GAP_FALLBACK
    return abs(v - v_star) / max(abs(v_star), GAP_EPS)


def capped_primal_gap(v: float | None, v_star: float) -> float:
    return min(1.0, primal_gap(v, v_star))


def primal_integral(trace, v_star: float, horizon: float) -> float:
    """Exact piecewise integral of the capped gap over [0, horizon].

    ``trace`` holds (time, objective) incumbents with non-decreasing times
    within the horizon; the gap is 1.0 before the first entry.
    """
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    times = [t for t, _ in trace]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValidationError("incumbent trace times must be non-decreasing")
    if any(t > horizon + 1e-12 for t in times):
        raise ValidationError("incumbent trace extends past the horizon")
    total = 0.0
    prev_time = 0.0
    gap = 1.0
    for t, obj in trace:
        total += gap * (t - prev_time)
        prev_time = t
        gap = capped_primal_gap(obj, v_star)
    total += gap * (horizon - prev_time)
    return total


def gap_at(trace, v_star: float, t: float) -> float:
    """Capped gap of the latest incumbent at time t (1.0 before the first)."""
    gap = 1.0
    for ti, obj in trace:
        if ti > t:
            break
        gap = capped_primal_gap(obj, v_star)
    return gap


def _mid_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided_p(doubled_ranks: np.ndarray, doubled_w: int) -> float:
    """Distribution of W+ over all 2^n sign patterns via convolution on the
    doubled-rank integer scale (mid-ranks are multiples of 1/2)."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    denom = counts.sum()  # == 2^n exactly in float64 for n <= 20
    p_le = counts[: doubled_w + 1].sum() / denom
    p_ge = counts[doubled_w:].sum() / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def _approx_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    """Continuity-corrected normal approximation with a one-term Edgeworth
    kurtosis adjustment. Moments come straight from the mid-ranks, which
    absorbs ties exactly: W+ = sum r_i * Bernoulli(1/2)."""
    mu = float(ranks.sum()) / 2.0
    sigma2 = float((ranks**2).sum()) / 4.0
    if sigma2 <= 0:
        warnings.warn("degenerate variance in Wilcoxon approximation", stacklevel=2)
        return 1.0
    sigma = math.sqrt(sigma2)
    kurt = -float((ranks**4).sum()) / 8.0 / (sigma2 * sigma2)
    w_low = min(w_plus, 2.0 * mu - w_plus)  # the distribution is symmetric about mu
    z = (w_low + 0.5 - mu) / sigma
    phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    cdf = 0.5 * math.erfc(-z / math.sqrt(2.0)) - phi * (kurt / 24.0) * (z**3 - 3.0 * z)
    return min(1.0, max(0.0, 2.0 * cdf))


def wilcoxon_signed_rank(a, b) -> float:
    """Two-sided Wilcoxon signed-rank p-value for paired samples.

    Zero differences are dropped; mid-ranks handle ties. Requires at least
    5 nonzero differences (all-zero input returns p=1 with a warning).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("paired samples must be equal-length vectors")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        warnings.warn("all paired differences are zero; Wilcoxon p-value is 1", stacklevel=2)
        return 1.0
    if n < 5:
        raise ValidationError(f"need at least 5 nonzero differences, got {n}")
    ranks = _mid_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())

    if n <= EXACT_WILCOXON_MAX_N:
        doubled = np.round(2.0 * ranks).astype(int)
        return _exact_two_sided_p(doubled, int(round(2.0 * w_plus)))
    return _approx_two_sided_p(ranks, w_plus)
