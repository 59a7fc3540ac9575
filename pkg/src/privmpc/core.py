"""Bit-vector indexing, function tables, accuracy measures and weight tensors.

Global convention: an input ``x = (x_1, ..., x_k)`` is stored at integer index
``sum_i x_i * 2**(k - i)``, i.e. party 1 is the most significant bit.  Parties
are numbered from 0 in code, so party ``i`` owns bit ``k - 1 - i`` of the index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import ConfigurationError

MAX_PARTIES = 16


def _check_k(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= MAX_PARTIES:
        raise ConfigurationError(f"party count k must be in [1, {MAX_PARTIES}], got {k!r}")


def encode(bits: Sequence[int]) -> int:
    """Map ``(x_1, ..., x_k)`` to its integer index (x_1 most significant)."""
    v = 0
    for b in bits:
        if b not in (0, 1):
            raise ConfigurationError(f"bits must be 0/1, got {b!r}")
        v = (v << 1) | int(b)
    return v


def decode(v: int, k: int) -> tuple[int, ...]:
    _check_k(k)
    if not 0 <= v < 1 << k:
        raise ConfigurationError(f"index {v} out of range for k={k}")
    return tuple((v >> (k - 1 - i)) & 1 for i in range(k))


def flip(v: int, i: int, k: int) -> int:
    """Toggle the bit of party ``i`` (0-based) in index ``v``."""
    if not 0 <= i < k:
        raise ConfigurationError(f"party {i} out of range for k={k}")
    return v ^ (1 << (k - 1 - i))


def bit_of(v: int, i: int, k: int) -> int:
    return (v >> (k - 1 - i)) & 1


def bitstring(v: int, k: int) -> str:
    return format(v, f"0{k}b")


def all_bits(k: int) -> np.ndarray:
    """``(2**k, k)`` array whose row ``v`` is ``decode(v, k)``."""
    v = np.arange(1 << k)
    shifts = np.arange(k - 1, -1, -1)
    return (v[:, None] >> shifts[None, :]) & 1


@dataclass(frozen=True)
class BitIndex:
    k: int
    value: int

    def __post_init__(self):
        _check_k(self.k)
        if not 0 <= self.value < 1 << self.k:
            raise ConfigurationError(f"index {self.value} out of range for k={self.k}")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BitIndex":
        return cls(len(bits), encode(bits))

    @property
    def bits(self) -> tuple[int, ...]:
        return decode(self.value, self.k)

    def flip(self, i: int) -> "BitIndex":
        return BitIndex(self.k, flip(self.value, i, self.k))

    def __str__(self) -> str:
        return bitstring(self.value, self.k)


@dataclass(frozen=True)
class FunctionSpec:
    """Truth table of ``f: {0,1}^k -> labels``; ``table[v]`` is f at index v."""

    k: int
    labels: tuple
    table: tuple

    def __post_init__(self):
        _check_k(self.k)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "table", tuple(self.table))
        if not self.labels:
            raise ConfigurationError("label alphabet is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigurationError("labels must be distinct")
        if len(self.table) != 1 << self.k:
            raise ConfigurationError(
                f"table has {len(self.table)} entries, expected {1 << self.k}")
        missing = {y for y in self.table if y not in self.labels}
        if missing:
            raise ConfigurationError(f"table values {sorted(map(str, missing))} not in labels")

    @classmethod
    def from_callable(cls, k: int, fn: Callable[[tuple[int, ...]], Hashable],
                      labels: Sequence | None = None) -> "FunctionSpec":
        table = [fn(decode(v, k)) for v in range(1 << k)]
        if labels is None:
            labels = sorted(set(table))
        return cls(k, tuple(labels), tuple(table))

    def __call__(self, bits: Sequence[int]) -> Hashable:
        return self.table[encode(bits)]

    def label_indices(self) -> np.ndarray:
        pos = {y: j for j, y in enumerate(self.labels)}
        return np.array([pos[y] for y in self.table], dtype=int)


@dataclass(frozen=True)
class AccuracyMeasure:
    """Payoff ``w[j, l] = w(labels[j], labels[l])`` (true label, decided label)."""

    labels: tuple
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        w = np.array(self.w, dtype=float)
        n = len(self.labels)
        if n == 0:
            raise ConfigurationError("label alphabet is empty")
        if w.shape != (n, n):
            raise ConfigurationError(f"w must be {n}x{n}, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ConfigurationError("w must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __call__(self, y, y_hat) -> float:
        return float(self.w[self.labels.index(y), self.labels.index(y_hat)])


@dataclass(frozen=True)
class WeightTensor:
    """``values[x, j] = w(f(x), labels[j])``, one column per decided label."""

    k: int
    labels: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (1 << self.k, len(self.labels)):
            raise ConfigurationError(
                f"weight tensor shape {values.shape} does not match k={self.k}, "
                f"{len(self.labels)} labels")
        values.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", values)

    def for_label(self, y) -> np.ndarray:
        return self.values[:, self.labels.index(y)]

    @property
    def n_labels(self) -> int:
        return len(self.labels)


def indicator_measure(labels: Sequence) -> AccuracyMeasure:
    labels = tuple(labels)
    if not labels:
        raise ConfigurationError("label alphabet is empty")
    return AccuracyMeasure(labels, np.eye(len(labels)))


def build_weight_tensor(f: FunctionSpec, w: AccuracyMeasure) -> WeightTensor:
    if tuple(f.labels) != tuple(w.labels):
        raise ConfigurationError(
            f"alphabet mismatch: function labels {f.labels} vs measure labels {w.labels}")
    return WeightTensor(f.k, f.labels, w.w[f.label_indices(), :])


def xor_function(k: int) -> FunctionSpec:
    return FunctionSpec.from_callable(k, lambda b: sum(b) % 2, labels=(0, 1))


def and_function(k: int) -> FunctionSpec:
    return FunctionSpec.from_callable(k, lambda b: int(all(b)), labels=(0, 1))


def constant_function(k: int, label=0, labels: Sequence = (0, 1)) -> FunctionSpec:
    return FunctionSpec(k, tuple(labels), (label,) * (1 << k))


def random_function(k: int, n_labels: int, rng: np.random.Generator) -> FunctionSpec:
    labels = tuple(range(n_labels))
    return FunctionSpec(k, labels, tuple(int(y) for y in rng.integers(0, n_labels, 1 << k)))


def distance_measure(labels: Sequence[int], top: float) -> AccuracyMeasure:
    """``w(y, y') = top - |y - y'|`` on numeric labels."""
    lab = np.array(labels, dtype=float)
    return AccuracyMeasure(tuple(labels), top - np.abs(lab[:, None] - lab[None, :]))


def problem_from_dict(doc: dict) -> tuple[FunctionSpec, AccuracyMeasure]:
    """Parse ``{"k", "labels", "table": {bitstring: label}, "w": [[...]]}``.

    ``w`` is optional and defaults to the indicator measure.
    """
    for key in ("k", "labels", "table"):
        if key not in doc:
            raise ConfigurationError(f"problem document: missing field {key!r}")
    k = doc["k"]
    _check_k(k)
    labels = tuple(doc["labels"])
    table_doc = doc["table"]
    if not isinstance(table_doc, dict):
        raise ConfigurationError("problem document: field 'table' must be an object")
    table = []
    for v in range(1 << k):
        key = bitstring(v, k)
        if key not in table_doc:
            raise ConfigurationError(f"problem document: field 'table' missing input {key!r}")
        table.append(table_doc[key])
    extra = set(table_doc) - {bitstring(v, k) for v in range(1 << k)}
    if extra:
        raise ConfigurationError(f"problem document: field 'table' has unknown keys {sorted(extra)}")
    f = FunctionSpec(k, labels, tuple(table))
    w = AccuracyMeasure(labels, doc["w"]) if "w" in doc else indicator_measure(labels)
    return f, w


def problem_to_dict(f: FunctionSpec, w: AccuracyMeasure | None = None) -> dict:
    doc = {
        "k": f.k,
        "labels": list(f.labels),
        "table": {bitstring(v, f.k): y for v, y in enumerate(f.table)},
    }
    if w is not None:
        doc["w"] = w.w.tolist()
    return doc


def load_problem(path: str | Path) -> tuple[FunctionSpec, AccuracyMeasure]:
    with open(path) as fh:
        return problem_from_dict(json.load(fh))
