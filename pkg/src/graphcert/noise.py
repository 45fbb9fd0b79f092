"""Bernoulli edge-flip channel used for smoothing.

Each bit of the input is kept with probability ``beta`` and flipped with
probability ``1 - beta``.  In privacy terms the channel is ``epsilon``-DP per
edge with ``epsilon = ln(beta / (1 - beta))``.

Noise draws are counter based: the pattern for sample ``index`` depends only
on ``(seed, stream, index)``.  Internally samples are generated in fixed
blocks of :data:`BLOCK` rows, each block from its own
``numpy.random.SeedSequence``; a worker that needs a sample range simply
regenerates the blocks it overlaps, so the result never depends on how the
range was split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter

BLOCK = 256


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.5 < beta < 1.0:
        raise InvalidParameter(f"beta must lie in (0.5, 1), got {beta}")
    return beta


def epsilon_from_beta(beta: float) -> float:
    beta = _check_beta(beta)
    return math.log(beta) - math.log1p(-beta)


def beta_from_epsilon(epsilon: float) -> float:
    if not epsilon > 0 or not math.isfinite(epsilon):
        raise InvalidParameter(f"epsilon must be a positive finite number, got {epsilon}")
    # 1 - 1/(1 + e^eps), written to avoid cancellation for small eps
    return 1.0 / (1.0 + math.exp(-epsilon))


@dataclass(frozen=True)
class SmoothingParams:
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_beta(self.beta))

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "SmoothingParams":
        return cls(beta_from_epsilon(epsilon))

    @property
    def epsilon(self) -> float:
        return epsilon_from_beta(self.beta)

    @property
    def flip_prob(self) -> float:
        return 1.0 - self.beta


def _as_params(p) -> SmoothingParams:
    return p if isinstance(p, SmoothingParams) else SmoothingParams(p)


def _block(length: int, flip_prob: float, seed: int, stream: int, block: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, stream, block]))
    return (rng.random((BLOCK, length)) < flip_prob).astype(np.uint8)


def sample_noise_range(length: int, params, seed: int, start: int, count: int,
                       stream: int = 0) -> np.ndarray:
    """Noise rows for sample indices ``start .. start+count-1``, shape ``(count, length)``."""
    p = _as_params(params)
    if length < 0 or start < 0 or count < 0:
        raise InvalidParameter("length, start and count must be non-negative")
    if seed < 0 or seed >= 2**64:
        raise InvalidParameter("seed must be a 64-bit unsigned integer")
    out = np.empty((count, length), dtype=np.uint8)
    if count == 0:
        return out
    first, last = start // BLOCK, (start + count - 1) // BLOCK
    pos = 0
    for b in range(first, last + 1):
        rows = _block(length, p.flip_prob, seed, stream, b)
        lo = max(start, b * BLOCK) - b * BLOCK
        hi = min(start + count, (b + 1) * BLOCK) - b * BLOCK
        out[pos:pos + hi - lo] = rows[lo:hi]
        pos += hi - lo
    return out


def sample_noise(length: int, params, seed: int, index: int = 0, stream: int = 0) -> np.ndarray:
    """A single noise pattern: bit ``i`` is 1 (flip) with probability ``1 - beta``."""
    row = sample_noise_range(length, params, seed, index, 1, stream)[0]
    row.setflags(write=False)
    return row


def channel_table(beta) -> dict[tuple[int, int], float]:
    """``P(output | input)`` for a single bit, keyed by ``(input, output)``."""
    beta = _check_beta(beta)
    return {(0, 0): beta, (0, 1): 1 - beta, (1, 0): 1 - beta, (1, 1): beta}


def channel_dp_ratio(beta) -> float:
    """Worst likelihood ratio of a single output bit between neighbouring inputs."""
    t = channel_table(beta)
    return max(t[(c, out)] / t[(1 - c, out)] for c in (0, 1) for out in (0, 1))
