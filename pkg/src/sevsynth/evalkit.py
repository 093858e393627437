"""Segment-level rank correlations, Williams significance test, rescaling.

Kendall's tau uses the tie-corrected tau-b form; Spearman's rho is the
Pearson correlation of mean ranks. The Williams test compares two
correlations sharing the human-score variable; its p-value comes from a
hand-rolled Student-t upper tail (regularized incomplete beta via
continued fraction) so the package needs no statistics dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoredSegments:
    """Metric scores and human scores aligned by segment index."""

    metric: tuple[float, ...]
    human: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.metric) != len(self.human):
            raise ValueError(f"length mismatch: {len(self.metric)} metric vs {len(self.human)} human scores")
        if len(self.metric) < 2:
            raise ValueError("need at least two segments")
        if any(math.isnan(v) for v in self.metric) or any(math.isnan(v) for v in self.human):
            raise ValueError("NaN scores are not allowed")

    @classmethod
    def of(cls, metric, human) -> "ScoredSegments":
        return cls(metric=tuple(float(v) for v in metric), human=tuple(float(v) for v in human))


def _check_not_degenerate(x: np.ndarray, y: np.ndarray) -> None:
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("degenerate ranking: one side is entirely tied")


def kendall_tau_b(pairs: ScoredSegments) -> float:
    """Tie-corrected Kendall correlation.

    tau = (C - D) / sqrt((P - Tx)(P - Ty)) with P = n(n-1)/2 and Tx/Ty the
    numbers of pairs tied within each side.
    """
    x = np.asarray(pairs.metric, dtype=np.float64)
    y = np.asarray(pairs.human, dtype=np.float64)
    _check_not_degenerate(x, y)
    n = x.size
    concordant_minus_discordant = 0
    ties_x = 0
    ties_y = 0
    for i in range(n - 1):
        dx = x[i + 1:] - x[i]
        dy = y[i + 1:] - y[i]
        sign_prod = np.sign(dx) * np.sign(dy)
        concordant_minus_discordant += int(np.count_nonzero(sign_prod > 0)) - int(np.count_nonzero(sign_prod < 0))
        ties_x += int(np.count_nonzero(dx == 0))
        ties_y += int(np.count_nonzero(dy == 0))
    total_pairs = n * (n - 1) // 2
    denom = math.sqrt((total_pairs - ties_x) * (total_pairs - ties_y))
    return (concordant_minus_discordant) / denom


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values assigned their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(pairs: ScoredSegments) -> float:
    """Pearson correlation of mean ranks."""
    x = np.asarray(pairs.metric, dtype=np.float64)
    y = np.asarray(pairs.human, dtype=np.float64)
    _check_not_degenerate(x, y)
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError("incomplete beta continued fraction failed to converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), absolute error well below 1e-10 over the needed domain."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, dof: float) -> float:
    """Upper-tail probability of Student's t with the given degrees of freedom."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = dof / (dof + t * t)
    half_tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x)
    return half_tail if t >= 0 else 1.0 - half_tail


def williams_test(r12: float, r13: float, r23: float, n: int) -> tuple[float, float]:
    """Significance of the difference between two correlations sharing variable 1.

    Returns (t, one-sided p) for the hypothesis that r12 exceeds r13, with
    n - 3 degrees of freedom. The two-sided value is 2 * min(p, 1 - p).
    """
    if n < 4:
        raise ValueError("williams_test needs n >= 4")
    for name, r in (("r12", r12), ("r13", r13), ("r23", r23)):
        if not -1.0 < r < 1.0:
            raise ValueError(f"{name}={r} outside the open interval (-1, 1)")
    det = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23
    denom_sq = 2.0 * det * (n - 1) / (n - 3) + ((r12 + r13) ** 2 / 4.0) * (1.0 - r23) ** 3
    if det <= 0.0 or denom_sq <= 0.0 or not math.isfinite(denom_sq):
        raise ValueError(f"inadmissible correlation triple ({r12}, {r13}, {r23})")
    t = (r12 - r13) * math.sqrt((n - 1) * (1.0 + r23)) / math.sqrt(denom_sq)
    return t, student_t_sf(t, n - 3)


@dataclass(frozen=True)
class RescaleBounds:
    """Anchors for mapping raw scores onto the reporting range.

    lower is the mean score of random unrelated pairs; upper is the mean
    score of near-identical pairs.
    """

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise ValueError(f"upper bound {self.upper} must exceed lower bound {self.lower}")


def bounds_from_samples(low_scores, high_scores) -> RescaleBounds:
    """Means of the two calibration score sets."""
    low = [float(v) for v in low_scores]
    high = [float(v) for v in high_scores]
    if not low or not high:
        raise ValueError("both calibration sets must be non-empty")
    lower = sum(low) / len(low)
    upper = sum(high) / len(high)
    if not upper > lower:
        raise ValueError(f"mean of high scores ({upper}) must exceed mean of low scores ({lower})")
    return RescaleBounds(lower=lower, upper=upper)


def rescale(score: float, bounds: RescaleBounds) -> float:
    """Affine map sending upper -> 0 and lower -> -50; deliberately unclamped."""
    return ((score - bounds.lower) / (bounds.upper - bounds.lower) - 1.0) * 50.0
