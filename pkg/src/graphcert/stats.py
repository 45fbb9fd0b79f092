"""Exact binomial confidence machinery: Clopper-Pearson lower bound and
the two-sided binomial test used to decide between the top two classes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special, stats

from .errors import InvalidInput


@dataclass(frozen=True)
class SampleCounts:
    """Per-class vote counts from ``total`` Monte Carlo samples."""

    counts: tuple

    @classmethod
    def from_labels(cls, labels, num_classes: int | None = None) -> "SampleCounts":
        labels = np.asarray(labels, dtype=np.int64)
        k = num_classes if num_classes is not None else (int(labels.max()) + 1 if labels.size else 1)
        return cls(tuple(int(c) for c in np.bincount(labels, minlength=k)))

    @property
    def total(self) -> int:
        return sum(self.counts)

    def __add__(self, other: "SampleCounts") -> "SampleCounts":
        k = max(len(self.counts), len(other.counts))
        a = list(self.counts) + [0] * (k - len(self.counts))
        b = list(other.counts) + [0] * (k - len(other.counts))
        return SampleCounts(tuple(x + y for x, y in zip(a, b)))

    def top_two(self) -> tuple[int, int]:
        """Indices of the two largest counts; ties go to the lower class index."""
        order = sorted(range(len(self.counts)), key=lambda c: (-self.counts[c], c))
        if len(order) == 1:
            return order[0], order[0]
        return order[0], order[1]


def clopper_pearson_lower(successes: int, trials: int, confidence: float) -> float:
    """Exact one-sided lower confidence limit for a binomial proportion.

    Returns the ``p`` at which ``P(Bin(trials, p) >= successes) = 1 - confidence``,
    i.e. the ``alpha`` quantile of ``Beta(successes, trials - successes + 1)``.
    """
    if trials <= 0:
        raise InvalidInput("trials must be positive")
    if not 0 <= successes <= trials:
        raise InvalidInput(f"successes={successes} outside [0, {trials}]")
    alpha = 1.0 - confidence
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"confidence must lie in (0, 1), got {confidence}")
    if successes == 0:
        return 0.0
    if successes == trials:
        return alpha ** (1.0 / trials)
    return float(stats.beta.ppf(alpha, successes, trials - successes + 1))


def _half_tails(k: int, n: int) -> tuple[Fraction, Fraction]:
    """Exact ``P(X <= k)`` and ``P(X >= k)`` for ``X ~ Bin(n, 1/2)``."""
    c, low, high = 1, 0, 0
    for i in range(n + 1):
        if i <= k:
            low += c
        if i >= k:
            high += c
        c = c * (n - i) // (i + 1)
    den = 1 << n
    return Fraction(low, den), Fraction(high, den)


def _log_tails(k: int, n: int, p0: float) -> tuple[float, float]:
    i = np.arange(n + 1)
    logpmf = (special.gammaln(n + 1) - special.gammaln(i + 1) - special.gammaln(n - i + 1)
              + i * math.log(p0) + (n - i) * math.log1p(-p0))
    return (float(np.exp(special.logsumexp(logpmf[: k + 1]))),
            float(np.exp(special.logsumexp(logpmf[k:]))))


def binomial_two_sided_pvalue(k: int, n: int, p0: float = 0.5) -> float:
    """Doubled smaller tail of ``Bin(n, p0)`` at ``k``, capped at 1.

    Exact integer arithmetic for ``p0 = 1/2``; log-space summation otherwise.
    """
    if not 0 <= k <= n:
        raise InvalidInput(f"k={k} outside [0, {n}]")
    if not 0.0 < p0 < 1.0:
        raise InvalidInput(f"p0 must lie in (0, 1), got {p0}")
    if n == 0:
        return 1.0
    if p0 == 0.5:
        low, high = _half_tails(k, n)
        return float(min(Fraction(1), 2 * min(low, high)))
    low, high = _log_tails(k, n, p0)
    return min(1.0, 2.0 * min(low, high))
