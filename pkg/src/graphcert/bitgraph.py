"""Binary edge-vector encoding of undirected graphs and XOR perturbations.

A graph on ``n`` nodes is flattened to its strict upper triangle in
row-major order, ``(0,1), (0,2), ..., (0,n-1), (1,2), ...``, giving one bit
per possible undirected edge.  Bit vectors are read-only ``uint8`` arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import InvalidInput


def n_bits(n: int) -> int:
    """Number of edge bits for a graph on ``n`` nodes."""
    return n * (n - 1) // 2


def nodes_for_bits(length: int) -> int:
    """Inverse of :func:`n_bits`; raises if ``length`` is not triangular."""
    n = (1 + math.isqrt(1 + 8 * length)) // 2
    if n_bits(n) != length:
        raise InvalidInput(f"{length} is not a triangular bit count")
    return n


def edge_index(i: int, j: int, n: int) -> int:
    if i > j:
        i, j = j, i
    if i == j or j >= n or i < 0:
        raise InvalidInput(f"no edge slot for ({i}, {j}) with n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def as_bits(values) -> np.ndarray:
    """Coerce a 0/1 sequence or a string like ``"0110"`` to a frozen bit vector."""
    if isinstance(values, str):
        if set(values) - {"0", "1"}:
            raise InvalidInput(f"not a bit string: {values!r}")
        arr = np.frombuffer(values.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(values)
        if arr.ndim != 1:
            raise InvalidInput("bit vector must be one-dimensional")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise InvalidInput("bit vector entries must be 0 or 1")
    return _freeze(arr.astype(np.uint8, copy=True))


def bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


@dataclass(frozen=True)
class GraphRecord:
    """An undirected simple graph with a class label.

    ``edges`` holds pairs ``(i, j)`` with ``i < j``; pairs given in the
    other order are normalised on construction.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)
    label: int = 0
    family: str = ""

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidInput(f"node count must be a positive integer, got {self.n!r}")
        normalised = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InvalidInput(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvalidInput(f"edge ({i}, {j}) out of range for n={self.n}")
            pair = (min(i, j), max(i, j))
            if pair in normalised:
                raise InvalidInput(f"duplicate edge {pair}")
            normalised.add(pair)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", frozenset(normalised))
        object.__setattr__(self, "label", int(self.label))

    @property
    def num_bits(self) -> int:
        return n_bits(self.n)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def relabel(self, perm) -> "GraphRecord":
        """Copy with node ``v`` renamed to ``perm[v]``."""
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.n)):
            raise InvalidInput("relabelling must be a permutation of range(n)")
        return GraphRecord(self.n, frozenset((perm[i], perm[j]) for i, j in self.edges),
                           self.label, self.family)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.sorted_edges()],
                "label": self.label, "family": self.family}

    @classmethod
    def from_json(cls, obj: dict) -> "GraphRecord":
        try:
            return cls(int(obj["n"]), frozenset(tuple(e) for e in obj["edges"]),
                       int(obj.get("label", 0)), str(obj.get("family", "")))
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed graph record: {exc}") from exc


def encode_graph(g: GraphRecord) -> np.ndarray:
    bits = np.zeros(g.num_bits, dtype=np.uint8)
    for i, j in g.edges:
        bits[edge_index(i, j, g.n)] = 1
    return _freeze(bits)


def decode_bits(bits, n: int | None = None, label: int = 0, family: str = "") -> GraphRecord:
    bits = as_bits(bits)
    if n is None:
        n = nodes_for_bits(len(bits))
    elif n_bits(n) != len(bits):
        raise InvalidInput(f"{len(bits)} bits do not encode a graph on {n} nodes")
    iu, ju = np.triu_indices(n, k=1)
    on = np.flatnonzero(bits)
    return GraphRecord(n, frozenset(zip(iu[on].tolist(), ju[on].tolist())), label, family)


def weight(bits) -> int:
    """L0 norm: number of set bits."""
    return int(np.count_nonzero(bits))


def hamming(x, y) -> int:
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise InvalidInput(f"length mismatch: {x.shape} vs {y.shape}")
    return int(np.count_nonzero(x != y))


@dataclass(frozen=True)
class Perturbation:
    """An edge-flip pattern; ``weight`` is the number of flipped edges."""

    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", as_bits(self.delta))

    @property
    def weight(self) -> int:
        return weight(self.delta)

    def __len__(self):
        return len(self.delta)


def apply_perturbation(x, d) -> np.ndarray:
    """``x XOR d``; ``d`` may be a :class:`Perturbation` or a raw bit vector."""
    delta = d.delta if isinstance(d, Perturbation) else np.asarray(d, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != delta.shape:
        raise InvalidInput(f"length mismatch: {x.shape} vs {delta.shape}")
    return _freeze(np.bitwise_xor(x, delta))


def matrix_l0_of(edge_flips: int) -> int:
    """Entries of the symmetric perturbation matrix touched by ``edge_flips`` edge flips."""
    if edge_flips < 0:
        raise InvalidInput("edge flip count must be non-negative")
    return 2 * edge_flips


def bits_to_adjacency(bits: np.ndarray, n: int) -> np.ndarray:
    """Batched decode: ``(..., N)`` bit array to ``(..., n, n)`` float adjacency."""
    bits = np.asarray(bits)
    iu, ju = np.triu_indices(n, k=1)
    if bits.shape[-1] != len(iu):
        raise InvalidInput(f"{bits.shape[-1]} bits do not encode a graph on {n} nodes")
    a = np.zeros(bits.shape[:-1] + (n, n), dtype=np.float64)
    a[..., iu, ju] = bits
    a[..., ju, iu] = bits
    return a


def write_jsonl(graphs: Iterable[GraphRecord], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for g in graphs:
            fh.write(json.dumps(g.to_json(), separators=(",", ":")) + "\n")


def iter_jsonl(path) -> Iterator[GraphRecord]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
            yield GraphRecord.from_json(obj)


def read_jsonl(path) -> list[GraphRecord]:
    return list(iter_jsonl(path))
