"""Independent reference computations used only by the tests."""
from fractions import Fraction
from math import comb

import numpy as np


def binom_upper_tail_exceeds(k, n, m, bits, alpha: Fraction) -> bool:
    """Is P(Bin(n, m / 2**bits) >= k) > alpha?  Pure integer arithmetic."""
    q = (1 << bits) - m
    num = sum(comb(n, i) * m**i * q ** (n - i) for i in range(k, n + 1))
    return num * alpha.denominator > alpha.numerator * (1 << (bits * n))


def clopper_pearson_bisect(k, n, alpha: Fraction, bits=48) -> Fraction:
    """Lower confidence limit by bisection on the exact binomial upper tail.

    The tail at ``k`` increases with ``p``; we look for the crossing with ``alpha``.
    """
    if k == 0:
        return Fraction(0)
    lo, hi = 0, 1 << bits
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if binom_upper_tail_exceeds(k, n, mid, bits, alpha):
            hi = mid
        else:
            lo = mid
    return Fraction(lo, 1 << bits)


def binom_tails_exact(k, n, p: Fraction):
    pmf = [comb(n, i) * p**i * (1 - p) ** (n - i) for i in range(n + 1)]
    return sum(pmf[: k + 1]), sum(pmf[k:])


def numeric_grad(loss_fn, model, h=1e-4):
    """Central differences of ``loss_fn()`` with respect to every weight of ``model``."""
    grads = []
    for W in (model.W1, model.W2):
        g = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            old = W[idx]
            W[idx] = old + h
            up = loss_fn()
            W[idx] = old - h
            down = loss_fn()
            W[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
