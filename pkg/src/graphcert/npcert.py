"""Exact discrete Neyman-Pearson certificate for Bernoulli edge-flip smoothing.

For a perturbation of ``l`` flipped bits the noise outcomes split into
regions indexed by ``e = d(z, x XOR delta) - d(z, x)``.  Only the ``l``
flipped positions matter: if ``a`` of them survive the channel unchanged then
``e = 2a - l`` and

    P_X(e) = C(l, a) beta^a (1-beta)^(l-a)
    P_Y(e) = C(l, a) beta^(l-a) (1-beta)^a
    P_X(e) / P_Y(e) = (beta / (1-beta))^e

The worst-case classifier consistent with ``P(f(X) = c_A) >= pA`` puts its
``c_A`` mass on the regions with the *largest* likelihood ratio (fewest
``Y`` points per unit of ``X`` mass); the worst case for the runner-up puts
its mass on the *smallest* ratios.  ``l`` is certified when the first
``Y``-mass still exceeds the second.

Two numeric backends share the greedy code: exact rationals
(:class:`fractions.Fraction`) for ``l <= EXACT_MAX_L`` and log-space floats
beyond, where the strict inequality must hold with margin :data:`LOG_MARGIN`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .bitgraph import Perturbation, as_bits
from .errors import AbstainRequired, InvalidInput, InvalidParameter

EXACT_MAX_L = 64
LOG_MARGIN = 1e-12
ORACLE_MAX_BITS = 12
E2E_MAX_BITS = 10


def exact_beta(beta) -> Fraction:
    """Rational view of ``beta``; floats are read through their shortest decimal repr."""
    if isinstance(beta, Fraction):
        b = beta
    elif isinstance(beta, int):
        b = Fraction(beta)
    else:
        b = Fraction(repr(float(beta)))
    if not Fraction(1, 2) < b < 1:
        raise InvalidParameter(f"beta must lie in (0.5, 1), got {beta}")
    return b


def _to_exact(p) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(p)


@dataclass(frozen=True)
class Region:
    e: int
    agree: int
    prob_x: object
    prob_y: object
    ratio: object


@dataclass(frozen=True)
class RegionTable:
    """Regions ``H(e)`` for one perturbation size, ordered by ascending ``e``.

    ``mode`` is ``"exact"`` (Fraction entries) or ``"log"`` (float entries,
    with ``log_ratio`` carrying ``e * ln(beta/(1-beta))``).
    """

    l: int
    beta: object
    mode: str
    regions: tuple

    def prob_x(self) -> dict:
        return {r.e: r.prob_x for r in self.regions}

    def prob_y(self) -> dict:
        return {r.e: r.prob_y for r in self.regions}

    def dump(self) -> str:
        lines = [f"RegionTable l={self.l} beta={self.beta} mode={self.mode}"]
        for r in self.regions:
            lines.append(f"  e={r.e:+d} a={r.agree} P_X={float(r.prob_x):.6e} "
                         f"P_Y={float(r.prob_y):.6e} ratio={float(r.ratio):.6e}")
        return "\n".join(lines)


@lru_cache(maxsize=4096)
def _exact_table(l: int, beta: Fraction) -> RegionTable:
    q = 1 - beta
    rho = beta / q
    regions = []
    for a in range(l + 1):
        c = math.comb(l, a)
        px = c * beta**a * q ** (l - a)
        py = c * beta ** (l - a) * q**a
        regions.append(Region(2 * a - l, a, px, py, rho ** (2 * a - l)))
    return RegionTable(l, beta, "exact", tuple(regions))


@lru_cache(maxsize=4096)
def _log_table(l: int, beta: float) -> RegionTable:
    lb, lq = math.log(beta), math.log1p(-beta)
    lrho = lb - lq
    regions = []
    for a in range(l + 1):
        lc = math.lgamma(l + 1) - math.lgamma(a + 1) - math.lgamma(l - a + 1)
        px = math.exp(lc + a * lb + (l - a) * lq)
        py = math.exp(lc + (l - a) * lb + a * lq)
        e = 2 * a - l
        # ratio may overflow for large |e|; the greedy fill never divides by it
        ratio = math.exp(e * lrho) if abs(e * lrho) < 700 else (math.inf if e > 0 else 0.0)
        regions.append(Region(e, a, px, py, ratio))
    return RegionTable(l, beta, "log", tuple(regions))


def region_table(l: int, beta, mode: str = "auto") -> RegionTable:
    """Region probabilities for an ``l``-bit perturbation.

    ``mode='auto'`` uses exact rationals up to ``EXACT_MAX_L`` and log-space
    above.  The table never depends on the vector length or on which bits
    are flipped.
    """
    if l < 1:
        raise InvalidInput("region table needs l >= 1; l = 0 is the trivial radius")
    if mode == "auto":
        mode = "exact" if l <= EXACT_MAX_L else "log"
    if mode == "exact":
        return _exact_table(int(l), exact_beta(beta))
    if mode == "log":
        b = float(beta)
        if not 0.5 < b < 1.0:
            raise InvalidParameter(f"beta must lie in (0.5, 1), got {beta}")
        return _log_table(int(l), b)
    raise InvalidParameter(f"unknown numeric mode {mode!r}")


def _greedy_y_mass(target, ordered_regions, exact: bool):
    """Fill X-mass ``target`` region by region (last one fractionally); return its Y-mass."""
    remaining = target
    parts = []
    for r in ordered_regions:
        if remaining <= 0:
            break
        if r.prob_x <= remaining:
            parts.append(r.prob_y)
            remaining -= r.prob_x
        elif r.prob_x > 0:
            parts.append(r.prob_y * (remaining / r.prob_x))
            remaining = 0
    if exact:
        return sum(parts, Fraction(0))
    return math.fsum(parts)


def lower_bound_yA(pA_lower, table: RegionTable):
    """Smallest ``P(f(Y) = c_A)`` over classifiers with ``P(f(X) = c_A) >= pA_lower``."""
    exact = table.mode == "exact"
    p = _to_exact(pA_lower) if exact else float(pA_lower)
    if not 0 < p <= 1:
        raise InvalidInput(f"pA_lower must lie in (0, 1], got {pA_lower}")
    return _greedy_y_mass(p, reversed(table.regions), exact)


def upper_bound_yB(pB_upper, table: RegionTable):
    """Largest ``P(f(Y) = c_B)`` over classifiers with ``P(f(X) = c_B) <= pB_upper``."""
    exact = table.mode == "exact"
    p = _to_exact(pB_upper) if exact else float(pB_upper)
    if not 0 <= p < 1:
        raise InvalidInput(f"pB_upper must lie in [0, 1), got {pB_upper}")
    return _greedy_y_mass(p, table.regions, exact)


def condition_holds(pA_lower, pB_upper, l: int, beta, mode: str = "auto"):
    """Return ``(holds, lower_yA, upper_yB, mode_used)`` for perturbation size ``l``."""
    if l == 0:
        return pA_lower > pB_upper, pA_lower, pB_upper, "exact"
    t = region_table(l, beta, mode)
    lo = lower_bound_yA(pA_lower, t)
    hi = upper_bound_yB(pB_upper, t)
    if t.mode == "exact":
        return lo > hi, lo, hi, t.mode
    return lo - hi > LOG_MARGIN, lo, hi, t.mode


@dataclass(frozen=True)
class NpCertificate:
    radius: int
    lower_yA: float
    upper_yB: float
    next_lower_yA: float | None
    next_upper_yB: float | None
    numeric_mode: str
    monotone: bool = True
    certified_sizes: tuple = field(default=())

    @property
    def radius_L(self) -> int:
        return self.radius


def certified_radius(pA_lower, pB_upper, beta, l_max: int, paranoid: bool = False,
                     mode: str = "auto") -> NpCertificate:
    """Largest ``l <= l_max`` such that every ``l``-flip attack keeps the prediction.

    Scans ``l = 1, 2, ...`` and stops at the first failure.  With
    ``paranoid=True`` the scan continues to ``l_max`` and the certificate
    records whether a failure was ever followed by a success; the radius is
    still the end of the initial run of successes.
    """
    if not pA_lower > 0.5:
        raise AbstainRequired(f"pA_lower={float(pA_lower)} <= 1/2; the prediction must abstain")
    if pB_upper < 0 or float(pB_upper) > 1.0 - float(pA_lower) + 1e-12:
        raise InvalidInput(f"pB_upper={float(pB_upper)} exceeds 1 - pA_lower")
    if l_max < 0:
        raise InvalidInput("l_max must be non-negative")
    if mode == "exact":
        pA_lower, pB_upper = _to_exact(pA_lower), _to_exact(pB_upper)

    radius = 0
    at_radius = (pA_lower, pB_upper)
    nxt = (None, None)
    used_mode = "exact"
    failed = False
    monotone = True
    holds_at = []
    for l in range(1, l_max + 1):
        ok, lo, hi, used = condition_holds(pA_lower, pB_upper, l, beta, mode)
        if ok:
            holds_at.append(l)
            if failed:
                monotone = False
            else:
                radius, at_radius, used_mode = l, (lo, hi), used
        else:
            if not failed:
                nxt, used_mode = (lo, hi), used
            failed = True
            if not paranoid:
                break
    return NpCertificate(
        radius=radius,
        lower_yA=float(at_radius[0]),
        upper_yB=float(at_radius[1]),
        next_lower_yA=None if nxt[0] is None else float(nxt[0]),
        next_upper_yB=None if nxt[1] is None else float(nxt[1]),
        numeric_mode=used_mode,
        monotone=monotone,
        certified_sizes=tuple(holds_at),
    )


# ---------------------------------------------------------------------------
# Enumeration oracles.  Exponential in the vector length by design.


def _all_points(n: int) -> np.ndarray:
    """Every vector in {0,1}^n as rows, bit i of row k equal to bit i of k."""
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _pack(bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


def _channel_powers(n: int, beta: Fraction) -> list[Fraction]:
    """``P(noise = specific pattern with h flips)`` for h = 0..n."""
    return [beta ** (n - h) * (1 - beta) ** h for h in range(n + 1)]


def _check_oracle_inputs(x, d, max_bits):
    x = as_bits(x)
    delta = d.delta if isinstance(d, Perturbation) else as_bits(d)
    if len(x) != len(delta):
        raise InvalidInput("x and delta lengths differ")
    if len(x) > max_bits:
        raise InvalidInput(f"enumeration oracle refuses {len(x)} bits (limit {max_bits})")
    return x, delta


def _distance_pairs(dx, dy, n):
    """Distinct ``(d(z, x), d(z, y))`` pairs with their multiplicities."""
    counts = np.bincount(dx * (n + 1) + dy, minlength=(n + 1) ** 2)
    return [(int(k) // (n + 1), int(k) % (n + 1), int(counts[k])) for k in np.flatnonzero(counts)]


def oracle_region_probs(x, d, beta, max_bits: int = ORACLE_MAX_BITS) -> dict:
    """Exact region masses by enumerating every outcome ``z``.

    Returns ``{e: (P(X in H(e)), P(Y in H(e)))}`` with ``X = x XOR noise``,
    ``Y = x XOR delta XOR noise`` and ``e = d(z, x XOR delta) - d(z, x)``.
    """
    x, delta = _check_oracle_inputs(x, d, max_bits)
    n = len(x)
    b = exact_beta(beta)
    power = _channel_powers(n, b)
    z = _all_points(n)
    dx = np.count_nonzero(z != x, axis=1)
    dy = np.count_nonzero(z != (x ^ delta), axis=1)
    out: dict[int, list] = {}
    for hx, hy, c in _distance_pairs(dx, dy, n):
        acc = out.setdefault(hy - hx, [Fraction(0), Fraction(0)])
        acc[0] += c * power[hx]
        acc[1] += c * power[hy]
    return {e: (v[0], v[1]) for e, v in sorted(out.items())}


def oracle_greedy_bounds(x, d, beta, pA_lower, pB_upper,
                         max_bits: int = ORACLE_MAX_BITS) -> tuple[Fraction, Fraction]:
    """Neyman-Pearson bounds computed over the whole outcome space.

    Each outcome ``z`` is ranked by its own likelihood ratio
    ``P(X=z)/P(Y=z)``.  Outcomes with identical ``(P(X=z), P(Y=z))`` are
    merged into one weighted atom, which changes nothing in the greedy fill;
    the region formula is never used.
    """
    x, delta = _check_oracle_inputs(x, d, max_bits)
    n = len(x)
    b = exact_beta(beta)
    power = _channel_powers(n, b)
    z = _all_points(n)
    dx = np.count_nonzero(z != x, axis=1)
    dy = np.count_nonzero(z != (x ^ delta), axis=1)
    atoms = [(power[hx] / power[hy], m * power[hx], m * power[hy])
             for hx, hy, m in _distance_pairs(dx, dy, n)]

    def fill(target, ordered):
        remaining, y = _to_exact(target), Fraction(0)
        for _, px, py in ordered:
            if remaining <= 0:
                break
            take = min(px, remaining)
            y += py * take / px
            remaining -= take
        return y

    descending = sorted(atoms, key=lambda a: a[0], reverse=True)
    ascending = sorted(atoms, key=lambda a: a[0])
    return fill(pA_lower, descending), fill(pB_upper, ascending)


def tabulate_classifier(f: Callable, n: int) -> np.ndarray:
    """Labels of ``f`` on every point of {0,1}^n, indexed by packed integer."""
    pts = _all_points(n)
    labels = np.asarray(f(pts), dtype=np.int64)
    if labels.shape != (len(pts),):
        raise InvalidInput("classifier must return one label per row")
    return labels


def exact_smoothed_distribution(table: np.ndarray, n: int, u: int, beta,
                                num_classes: int) -> list[Fraction]:
    """``P(f(u XOR noise) = c)`` for each class, exactly."""
    b = exact_beta(beta)
    power = _channel_powers(n, b)
    dist = np.bitwise_count(np.arange(2**n, dtype=np.int64) ^ u)
    hist = np.zeros((num_classes, n + 1), dtype=np.int64)
    np.add.at(hist, (table, dist), 1)
    return [sum((int(hist[c, h]) * power[h] for h in range(n + 1)), Fraction(0))
            for c in range(num_classes)]


@dataclass
class EndToEndResult:
    predicted: int | None
    pA: Fraction | None
    radius: int
    checked_points: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def oracle_end_to_end(f: Callable, x, beta, l_max: int | None = None,
                      num_classes: int | None = None,
                      max_bits: int = E2E_MAX_BITS) -> EndToEndResult:
    """Certify ``x`` with the exact ``pA`` and verify the radius by brute force.

    Every point within Hamming distance ``L`` of ``x`` must keep the certified
    class as the strict argmax of the exact smoothed distribution.
    """
    x = as_bits(x)
    n = len(x)
    if n > max_bits:
        raise InvalidInput(f"end-to-end oracle refuses {n} bits (limit {max_bits})")
    table = tabulate_classifier(f, n)
    k = num_classes if num_classes is not None else int(table.max()) + 1
    xi = _pack(x)
    probs = exact_smoothed_distribution(table, n, xi, beta, k)
    c_a = max(range(k), key=lambda c: (probs[c], -c))
    p_a = probs[c_a]
    if p_a <= Fraction(1, 2):
        return EndToEndResult(None, p_a, 0, 0, [])
    cert = certified_radius(p_a, 1 - p_a, exact_beta(beta),
                            n if l_max is None else min(l_max, n), mode="exact")
    radius = cert.radius
    violations = []
    checked = 0
    for w in range(radius + 1):
        for support in itertools.combinations(range(n), w):
            u = xi ^ sum(1 << i for i in support)
            q = exact_smoothed_distribution(table, n, u, beta, k)
            checked += 1
            if any(q[c] >= q[c_a] for c in range(k) if c != c_a):
                violations.append({"point": u, "distance": w,
                                   "probs": [str(v) for v in q], "certified_class": c_a})
    return EndToEndResult(c_a, p_a, radius, checked, violations)


def random_classifier_family(rng: np.random.Generator, n: int, num_classes: int) -> Callable:
    """A random classifier on {0,1}^n with a dominant class (so it certifies).

    Mixes three shapes: noisy constant, linear threshold and local-majority
    labellings.  Used to drive the soundness oracle.
    """
    kind = int(rng.integers(3))
    pts = _all_points(n)
    if kind == 0:
        base = int(rng.integers(num_classes))
        flip = rng.uniform(0.0, 0.45)
        labels = np.where(rng.random(len(pts)) < flip,
                          rng.integers(num_classes, size=len(pts)), base)
    elif kind == 1:
        w = rng.normal(size=n)
        s = pts @ w + rng.normal() * 0.5
        labels = np.where(s > np.quantile(s, rng.uniform(0.05, 0.4)), 0,
                          rng.integers(1, max(num_classes, 2), size=len(pts)))
    else:
        mask = rng.random(n) < 0.5
        frac = (pts[:, mask].sum(axis=1) + 0.5) / (mask.sum() + 1.0)
        labels = np.minimum((frac * num_classes).astype(np.int64), num_classes - 1)
    labels = labels.astype(np.int64) % max(num_classes, 1)

    def f(batch):
        batch = np.asarray(batch, dtype=np.int64)
        keys = (batch << np.arange(batch.shape[1])).sum(axis=1)
        return labels[keys]

    return f


def run_oracle_suite(max_bits: int = ORACLE_MAX_BITS, betas: Sequence = (0.6, 0.7, 0.9),
                     max_l: int = 8, seed: int = 0, e2e_classifiers: int = 20,
                     e2e_bits: int = 8) -> dict:
    """Cross-check region tables, greedy bounds and end-to-end soundness.

    Returns a JSON-ready report ``{grid, max_abs_error, violations}``.
    """
    rng = np.random.default_rng(seed)
    violations = []
    max_err = 0.0
    cases = 0
    n = max_bits
    ps = [Fraction(p) for p in ("0.55", "0.7", "0.9", "0.99", "0.999")]
    for beta in betas:
        for l in range(1, min(max_l, n) + 1):
            t = region_table(l, beta, mode="exact")
            for _ in range(2):
                x = rng.integers(0, 2, size=n).astype(np.uint8)
                d = np.zeros(n, dtype=np.uint8)
                d[rng.choice(n, size=l, replace=False)] = 1
                got = oracle_region_probs(x, d, beta, max_bits)
                want = {r.e: (r.prob_x, r.prob_y) for r in t.regions}
                cases += 1
                if got != want:
                    violations.append({"check": "region", "beta": beta, "l": l,
                                       "x": x.tolist(), "delta": d.tolist()})
                    continue
                for pa in ps:
                    lo_o, hi_o = oracle_greedy_bounds(x, d, beta, pa, 1 - pa, max_bits)
                    lo, hi = lower_bound_yA(pa, t), upper_bound_yB(1 - pa, t)
                    log_t = region_table(l, beta, mode="log")
                    max_err = max(max_err,
                                  abs(float(lo) - lower_bound_yA(float(pa), log_t)),
                                  abs(float(hi) - upper_bound_yB(float(1 - pa), log_t)))
                    if (lo, hi) != (lo_o, hi_o):
                        violations.append({"check": "greedy", "beta": beta, "l": l,
                                           "pA": str(pa), "region": [str(lo), str(hi)],
                                           "atoms": [str(lo_o), str(hi_o)]})
    e2e_points = 0
    for i in range(e2e_classifiers):
        beta = betas[i % len(betas)]
        f = random_classifier_family(rng, e2e_bits, 3)
        x = rng.integers(0, 2, size=e2e_bits).astype(np.uint8)
        res = oracle_end_to_end(f, x, beta, num_classes=3)
        e2e_points += res.checked_points
        for v in res.violations:
            violations.append({"check": "end_to_end", "beta": beta, **v})
    return {
        "grid": {"max_bits": max_bits, "betas": list(betas), "max_l": max_l,
                 "region_cases": cases, "end_to_end_classifiers": e2e_classifiers,
                 "end_to_end_points": e2e_points},
        "max_abs_error": max_err,
        "violations": violations,
    }
