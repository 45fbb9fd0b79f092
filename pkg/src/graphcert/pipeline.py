"""Monte Carlo prediction and certification, certified accuracy, and the
beta / alpha / sample-count sweeps.

The certification procedure per instance:

1. draw ``M`` noise patterns and count the base classifier's votes;
2. take the top two classes ``A``, ``B``;
3. ``pA_lower`` = one-sided Clopper-Pearson bound on ``count[A] / M``;
4. abstain unless the two-sided binomial test of ``count[A]`` against
   ``count[A] + count[B]`` at ``p = 1/2`` has p-value ``<= alpha`` *and*
   ``pA_lower > 1/2``;
5. ``pB_upper = 1 - pA_lower`` and the radius comes from the exact
   Neyman-Pearson certificate, capped at the bit length.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .bitgraph import GraphRecord, encode_graph, matrix_l0_of
from .dpcert import dp_radius
from .errors import ClassifierFailure, ConfigError, InvalidInput
from .gcn import GcnModel, GraphClassifier, NodeClassifier
from .noise import SmoothingParams, sample_noise_range
from .npcert import certified_radius
from .stats import SampleCounts, binomial_two_sided_pvalue, clopper_pearson_lower

log = logging.getLogger(__name__)

CHUNK = 4096
SELECTION_STREAM_OFFSET = 1 << 32
RADII = tuple(range(17))

RESULT_COLUMNS = ("instance_id", "true_label", "predicted", "abstained", "pa_lower", "pvalue",
                  "np_radius", "dp_radius_real", "dp_radius_floor", "beta", "alpha", "M", "seed",
                  "wall_ms")
CURVE_COLUMNS = ("sweep_value", "r", "certified_accuracy")


@dataclass
class Certificate:
    instance_id: int
    predicted: int | None
    abstained: bool
    pa_lower: float
    pvalue: float
    np_radius: int
    dp_radius_real: float
    dp_radius_floor: int
    beta: float
    alpha: float
    M: int
    seed: int
    counts: tuple = ()
    true_label: int | None = None
    wall_ms: float = 0.0
    monotone: bool = True

    @property
    def correct(self) -> bool:
        return (not self.abstained) and self.true_label is not None \
            and self.predicted == self.true_label

    @property
    def matrix_radius(self) -> int:
        """Radius in entries of the symmetric perturbation matrix."""
        return matrix_l0_of(self.np_radius)

    def row(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "true_label": "" if self.true_label is None else self.true_label,
            "predicted": -1 if self.predicted is None else self.predicted,
            "abstained": int(self.abstained),
            "pa_lower": repr(float(self.pa_lower)),
            "pvalue": repr(float(self.pvalue)),
            "np_radius": self.np_radius,
            "dp_radius_real": repr(float(self.dp_radius_real)),
            "dp_radius_floor": self.dp_radius_floor,
            "beta": repr(float(self.beta)),
            "alpha": repr(float(self.alpha)),
            "M": self.M,
            "seed": self.seed,
            "wall_ms": f"{self.wall_ms:.3f}",
        }


def count_votes(f: Callable, x: np.ndarray, params: SmoothingParams, M: int, seed: int,
                stream: int, num_classes: int | None = None) -> SampleCounts:
    """Votes of ``f`` on ``x XOR noise`` for sample indices ``0 .. M-1``."""
    x = np.asarray(x, dtype=np.uint8)
    votes = None
    for start in range(0, M, CHUNK):
        count = min(CHUNK, M - start)
        batch = x[None, :] ^ sample_noise_range(len(x), params, seed, start, count, stream)
        labels = _classify(f, batch, start, num_classes)
        chunk = SampleCounts.from_labels(labels, num_classes)
        votes = chunk if votes is None else votes + chunk
    return votes if votes is not None else SampleCounts((0,))


def _classify(f, batch, start, num_classes):
    try:
        labels = np.asarray(f(batch))
    except Exception as exc:
        for i, row in enumerate(batch):
            try:
                f(row[None, :])
            except Exception:
                raise ClassifierFailure(f"base classifier raised {exc!r}", start + i) from exc
        raise ClassifierFailure(f"base classifier raised {exc!r} on a batch", start) from exc
    if labels.shape != (len(batch),):
        raise ClassifierFailure(f"classifier returned shape {labels.shape}", start)
    if not np.issubdtype(labels.dtype, np.integer):
        raise ClassifierFailure("classifier returned non-integer labels", start)
    bad = np.flatnonzero((labels < 0) | ((labels >= num_classes) if num_classes else False))
    if bad.size:
        raise ClassifierFailure(f"invalid label {labels[bad[0]]}", start + int(bad[0]))
    return labels


def predict_and_certify(f: Callable, x, beta, M: int, alpha: float, seed: int,
                        instance_id: int = 0, num_classes: int | None = None,
                        l_max: int | None = None, two_phase: bool = False,
                        n_select: int = 100, paranoid: bool = False,
                        true_label: int | None = None) -> Certificate:
    """Smoothed prediction at ``x`` with an L0 certificate, or abstention.

    Noise for this instance is keyed by ``(seed, instance_id, sample index)``.
    With ``two_phase`` the top two classes are chosen on ``n_select`` extra
    samples from an independent stream and only counted on the main ``M``.
    """
    if M < 2:
        raise InvalidInput("need at least two Monte Carlo samples")
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"alpha must lie in (0, 1), got {alpha}")
    params = beta if isinstance(beta, SmoothingParams) else SmoothingParams(beta)
    x = np.asarray(x, dtype=np.uint8)
    l_max = len(x) if l_max is None else min(l_max, len(x))
    t0 = time.perf_counter()

    counts = count_votes(f, x, params, M, seed, instance_id, num_classes)
    if two_phase:
        sel = count_votes(f, x, params, n_select, seed,
                          instance_id + SELECTION_STREAM_OFFSET, num_classes)
        c_a, c_b = sel.top_two()
    else:
        c_a, c_b = counts.top_two()
    cnt = list(counts.counts) + [0] * (max(c_a, c_b) + 1 - len(counts.counts))
    eta_a, eta_b = cnt[c_a], (cnt[c_b] if c_b != c_a else 0)

    pa = clopper_pearson_lower(eta_a, M, 1.0 - alpha)
    pval = binomial_two_sided_pvalue(eta_a, eta_a + eta_b, 0.5) if eta_a + eta_b else 1.0
    common = dict(instance_id=instance_id, pa_lower=pa, pvalue=pval, beta=params.beta,
                  alpha=alpha, M=M, seed=seed, counts=tuple(counts.counts),
                  true_label=true_label)
    if not (pval <= alpha and pa > 0.5):
        return Certificate(predicted=None, abstained=True, np_radius=0, dp_radius_real=0.0,
                           dp_radius_floor=0, wall_ms=_ms(t0), **common)
    pb = 1.0 - pa
    cert = certified_radius(pa, pb, params.beta, l_max, paranoid=paranoid)
    dp = dp_radius(pa, pb, params.epsilon)
    return Certificate(predicted=c_a, abstained=False, np_radius=cert.radius,
                       dp_radius_real=dp.radius_real, dp_radius_floor=dp.certified_edge_flips,
                       wall_ms=_ms(t0), monotone=cert.monotone, **common)


def _ms(t0):
    return (time.perf_counter() - t0) * 1e3


def certify_node(model_or_f, g: GraphRecord, target: int, beta, M: int, alpha: float,
                 seed: int, features=None, instance_id: int | None = None,
                 true_label: int | None = None, **kw) -> Certificate:
    """Certify one node's prediction against edge flips anywhere in ``g``.

    ``model_or_f`` is a trained node-head :class:`GcnModel` (with ``features``)
    or any callable over batches of edge-bit vectors.
    """
    if not 0 <= target < g.n:
        raise InvalidInput(f"target {target} out of range for n={g.n}")
    if isinstance(model_or_f, GcnModel):
        if features is None:
            raise InvalidInput("node features required with a GcnModel")
        f = NodeClassifier(model_or_f, g.n, features, target)
        kw.setdefault("num_classes", model_or_f.num_classes)
    else:
        f = model_or_f
    return predict_and_certify(f, encode_graph(g), beta, M, alpha, seed,
                               instance_id=target if instance_id is None else instance_id,
                               true_label=true_label, **kw)


def certified_accuracy(results: Sequence[Certificate], r: int) -> float:
    """Fraction of instances that are certified, correct, and have radius > r."""
    if not results:
        raise InvalidInput("certified accuracy of an empty result set")
    return sum(1 for c in results if c.correct and c.np_radius > r) / len(results)


def accuracy_curve(results: Sequence[Certificate], radii: Iterable[int] = RADII) -> list[float]:
    return [certified_accuracy(results, r) for r in radii]


def max_certified_radius(results: Sequence[Certificate]) -> int:
    """Largest radius among correctly certified instances (0 if none)."""
    return max((c.np_radius for c in results if c.correct), default=0)


# ---------------------------------------------------------------------------
# Dataset-level certification and sweeps


@dataclass(frozen=True)
class CertifyConfig:
    beta: float = 0.9
    alpha: float = 0.01
    samples: int = 1000
    seed: int = 0
    l_max: int | None = None
    paranoid: bool = False
    two_phase: bool = False

    def __post_init__(self):
        SmoothingParams(self.beta)
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.samples < 2:
            raise ConfigError("samples must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


def _certify_one(args):
    model, g, idx, cfg = args
    f = GraphClassifier(model, g.n)
    return predict_and_certify(f, encode_graph(g), cfg.beta, cfg.samples, cfg.alpha, cfg.seed,
                               instance_id=idx, num_classes=model.num_classes, l_max=cfg.l_max,
                               two_phase=cfg.two_phase, paranoid=cfg.paranoid,
                               true_label=g.label)


def certify_dataset(model: GcnModel, graphs: Sequence[GraphRecord], cfg: CertifyConfig,
                    jobs: int = 1) -> list[Certificate]:
    """Certify every graph; the output is identical for any ``jobs``."""
    if model is None or not graphs:
        raise ConfigError("certification needs a model and a non-empty dataset")
    tasks = [(model, g, i, cfg) for i, g in enumerate(graphs)]
    if jobs <= 1:
        return [_certify_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_certify_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


SWEEP_KINDS = ("beta", "alpha", "samples")


@dataclass
class SweepResult:
    kind: str
    values: list
    curves: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    wall_s: dict = field(default_factory=dict)

    def curve_rows(self, radii=RADII):
        for v in self.values:
            for r, ca in zip(radii, accuracy_curve(self.results[v], radii)):
                yield {"sweep_value": _fmt_value(v), "r": r, "certified_accuracy": repr(ca)}

    def result_rows(self):
        for v in self.values:
            for c in self.results[v]:
                yield c.row()

    def max_radius(self, v) -> int:
        return max_certified_radius(self.results[v])


def _fmt_value(v):
    return str(v) if isinstance(v, int) else repr(float(v))


def run_sweep(kind: str, values: Sequence, base: CertifyConfig, test: Sequence[GraphRecord],
              model_for: Callable[[float], GcnModel] | GcnModel, jobs: int = 1) -> SweepResult:
    """One certified-accuracy curve per sweep value.

    ``model_for`` is a fixed model or a function ``beta -> model`` (so each
    noise level can use a classifier trained under that noise).
    """
    if kind not in SWEEP_KINDS:
        raise ConfigError(f"unknown sweep kind {kind!r}; expected one of {SWEEP_KINDS}")
    if not values:
        raise ConfigError("empty sweep")
    if model_for is None or not test:
        raise ConfigError("sweep needs a model and a test set")
    provider = model_for if callable(model_for) and not isinstance(model_for, GcnModel) \
        else (lambda _b: model_for)
    key = {"beta": "beta", "alpha": "alpha", "samples": "samples"}[kind]
    out = SweepResult(kind, list(values))
    for v in values:
        cfg = CertifyConfig(**{**asdict(base), key: v})
        t0 = time.perf_counter()
        res = certify_dataset(provider(cfg.beta), test, cfg, jobs)
        out.wall_s[v] = time.perf_counter() - t0
        out.results[v] = res
        out.curves[v] = accuracy_curve(res)
        log.info("%s=%s: CA(0)=%.3f max radius %d (%.1fs)", kind, v, out.curves[v][0],
                 out.max_radius(v), out.wall_s[v])
    return out


def write_csv(rows: Iterable[dict], columns: Sequence[str], path=None) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
