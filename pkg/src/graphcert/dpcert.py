"""Closed-form certificate from the per-edge epsilon-DP bound of the flip channel.

Each flipped edge changes the probability of any output by at most a factor
``e^epsilon`` in either direction, so the top class survives ``R`` flips when
``pA > e^(2 R epsilon) pB``, i.e. ``R = (ln pA - ln pB) / (2 epsilon)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput, InvalidParameter
from .noise import epsilon_from_beta


@dataclass(frozen=True)
class DpCertificate:
    radius_real: float
    epsilon: float

    @property
    def certified_edge_flips(self) -> int:
        return max(0, math.floor(self.radius_real))


def dp_radius(pA_lower: float, pB_upper: float, epsilon: float) -> DpCertificate:
    if not epsilon > 0:
        raise InvalidParameter(f"epsilon must be positive, got {epsilon}")
    if not 0 < pB_upper <= pA_lower <= 1:
        raise InvalidInput(f"need 0 < pB_upper <= pA_lower <= 1, got ({pB_upper}, {pA_lower})")
    return DpCertificate((math.log(pA_lower) - math.log(pB_upper)) / (2.0 * epsilon), epsilon)


def robustness_condition(expected_scores, epsilon: float, R: int) -> bool:
    """Whether soft smoothed scores are robust to ``R`` edge flips."""
    s = np.asarray(expected_scores, dtype=np.float64)
    if s.ndim != 1 or len(s) < 2:
        raise InvalidInput("need scores for at least two classes")
    if (s < 0).any() or (s > 1).any() or abs(s.sum() - 1.0) > 1e-9:
        raise InvalidInput("scores must lie in [0, 1] and sum to 1")
    top, runner_up = np.sort(s)[::-1][:2]
    return bool(top > math.exp(2.0 * epsilon * R) * runner_up)


def _channel_kernel(n_bits: int, beta: float) -> np.ndarray:
    """``K[u, z] = P(u XOR noise = z)`` over all of {0,1}^n_bits."""
    idx = np.arange(2**n_bits, dtype=np.int64)
    h = np.bitwise_count(idx[:, None] ^ idx[None, :])
    return beta ** (n_bits - h) * (1.0 - beta) ** h


def expectation_dp_check(score_fn: Callable, n_bits: int, beta: float,
                         max_bits: int = 10) -> float:
    """Largest ratio ``E[Q_k(x XOR noise)] / E[Q_k(x' XOR noise)]`` over all
    inputs ``x``, single-bit neighbours ``x'`` and classes ``k``.

    ``score_fn`` maps an ``(m, n_bits)`` array of points to ``(m, K)`` scores
    in ``[0, 1]``.  The result never exceeds ``e^epsilon`` for a sound channel.
    """
    if n_bits > max_bits:
        raise InvalidInput(f"enumeration refuses {n_bits} bits (limit {max_bits})")
    epsilon_from_beta(beta)
    idx = np.arange(2**n_bits, dtype=np.int64)
    pts = ((idx[:, None] >> np.arange(n_bits)) & 1).astype(np.uint8)
    scores = np.asarray(score_fn(pts), dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    if (scores < 0).any() or (scores > 1).any():
        raise InvalidInput("scores must lie in [0, 1]")
    expect = _channel_kernel(n_bits, beta) @ scores
    worst = 1.0
    for bit in range(n_bits):
        num, den = expect, expect[idx ^ (1 << bit)]
        both_zero = (num == 0) & (den == 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(both_zero, 1.0, num / den)
        worst = max(worst, float(ratio.max()))
    return worst


def run_dp_oracle_suite(betas=(0.7, 0.9), n_bits: int = 8, functions: int = 50,
                        num_classes: int = 3, seed: int = 0) -> dict:
    """Check ``expectation_dp_check <= e^epsilon`` on random soft score tables.

    Returns a JSON-ready report ``{grid, max_ratio_over_bound, violations}``.
    """
    rng = np.random.default_rng([seed, 7])
    violations = []
    worst = 0.0
    for beta in betas:
        bound = math.exp(epsilon_from_beta(beta))
        for i in range(functions):
            table = rng.dirichlet(np.full(num_classes, 0.3), size=2**n_bits)

            def score(pts, table=table):
                return table[(pts.astype(np.int64) << np.arange(n_bits)).sum(axis=1)]

            ratio = expectation_dp_check(score, n_bits, beta)
            worst = max(worst, ratio / bound)
            if ratio > bound + 1e-12:
                violations.append({"check": "dp", "beta": beta, "function": i, "ratio": ratio,
                                   "bound": bound})
    return {"grid": {"betas": list(betas), "n_bits": n_bits, "functions": functions},
            "max_ratio_over_bound": worst, "violations": violations}
