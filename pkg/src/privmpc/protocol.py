"""Protocol matrices, randomized response, DP checks and rank-1 compatibility."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import _check_k, all_bits, bitstring
from .errors import ConfigurationError, InputError

DEFAULT_TOL = 1e-9
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class PrivacyBudget:
    """Per-party ``lambda_i = exp(eps_i)``."""

    lambdas: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ConfigurationError("privacy budget needs at least one party (k = 0)")
        _check_k(len(lam))
        bad = [x for x in lam if not (math.isfinite(x) and x >= 1.0)]
        if bad:
            raise ConfigurationError(f"lambda_i must be finite and >= 1, got {bad}")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def uniform(cls, k: int, lam: float) -> "PrivacyBudget":
        return cls((lam,) * k)

    @classmethod
    def from_epsilons(cls, eps: Sequence[float]) -> "PrivacyBudget":
        return cls(tuple(math.exp(e) for e in eps))

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @property
    def epsilons(self) -> tuple[float, ...]:
        return tuple(math.log(x) for x in self.lambdas)

    @property
    def degenerate_parties(self) -> tuple[int, ...]:
        return tuple(i for i, x in enumerate(self.lambdas) if x == 1.0)


@dataclass(frozen=True)
class Protocol:
    """``p[x, t] = P(transcripts[t] | x)`` with inputs in the global index order."""

    k: int
    transcripts: tuple
    p: np.ndarray

    def __post_init__(self):
        _check_k(self.k)
        p = np.array(self.p, dtype=float)
        tr = tuple(self.transcripts)
        if p.ndim != 2 or p.shape != (1 << self.k, len(tr)):
            raise ConfigurationError(
                f"protocol matrix shape {p.shape} does not match 2^k={1 << self.k} rows "
                f"and {len(tr)} transcripts")
        if len(set(tr)) != len(tr):
            raise ConfigurationError("transcript identifiers must be distinct")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ConfigurationError("protocol entries must be finite and nonnegative")
        dev = np.abs(p.sum(axis=1) - 1.0).max()
        if dev > STOCHASTIC_TOL:
            raise ConfigurationError(f"protocol rows must sum to 1 (max deviation {dev:.3g})")
        p.setflags(write=False)
        object.__setattr__(self, "transcripts", tr)
        object.__setattr__(self, "p", p)

    @property
    def n_transcripts(self) -> int:
        return len(self.transcripts)

    def column(self, tau) -> np.ndarray:
        try:
            j = self.transcripts.index(tau)
        except ValueError:
            raise KeyError(f"unknown transcript {tau!r}") from None
        return self.p[:, j]

    def permuted(self, order: Sequence[int]) -> "Protocol":
        order = list(order)
        return Protocol(self.k, tuple(self.transcripts[j] for j in order), self.p[:, order])


def randomized_response(budget: PrivacyBudget) -> Protocol:
    """Every party publishes its bit, kept w.p. lambda_i/(1+lambda_i)."""
    k = budget.k
    lam = np.array(budget.lambdas)
    keep = lam / (1.0 + lam)
    flip_ = 1.0 / (1.0 + lam)
    bits = all_bits(k)
    same = bits[:, None, :] == bits[None, :, :]  # [x, tau, i]
    p = np.where(same, keep, flip_).prod(axis=2)
    return Protocol(k, tuple(bitstring(v, k) for v in range(1 << k)), p)


def uniform_protocol(k: int, n_transcripts: int = 1) -> Protocol:
    return Protocol(k, tuple(f"t{j}" for j in range(n_transcripts)),
                    np.full((1 << k, n_transcripts), 1.0 / n_transcripts))


@dataclass(frozen=True)
class DPReport:
    ratios: tuple[float, ...]
    passed: tuple[bool, ...]

    @property
    def ok(self) -> bool:
        return all(self.passed)


def _party_slices(p: np.ndarray, k: int, i: int) -> tuple[np.ndarray, np.ndarray]:
    t = p.reshape((2,) * k + (p.shape[1],))
    return np.take(t, 0, axis=i), np.take(t, 1, axis=i)


def _max_ratio(a: np.ndarray, b: np.ndarray) -> float:
    """max of a/b with 0/0 -> 1 and c/0 -> inf."""
    both_zero = (a == 0) & (b == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(both_zero, 1.0, a / b)
    r = np.where((b == 0) & (a > 0), np.inf, r)
    return float(r.max()) if r.size else 1.0


def check_dp(p: Protocol, budget: PrivacyBudget, tol: float = DEFAULT_TOL) -> DPReport:
    """Per-party worst likelihood ratio over transcripts and the other bits."""
    if budget.k != p.k:
        raise ConfigurationError(f"budget has {budget.k} parties, protocol has {p.k}")
    ratios, passed = [], []
    for i in range(p.k):
        a, b = _party_slices(p.p, p.k, i)
        r = max(_max_ratio(a, b), _max_ratio(b, a))
        ratios.append(r)
        passed.append(r <= budget.lambdas[i] + tol)
    return DPReport(tuple(ratios), tuple(passed))


def column_tensor(p: Protocol, tau) -> np.ndarray:
    """Reshape one protocol column into a ``2 x ... x 2`` tensor (axis i = party i)."""
    return p.column(tau).reshape((2,) * p.k)


@dataclass(frozen=True)
class Rank1Fit:
    """Result of a rank-1 fit ``T = c * [1, s_1] (x) ... (x) [1, s_k]``.

    ``c``/``s`` are None when no fit exists; ``degenerate`` marks an all-zero tensor.
    """

    c: float | None
    s: tuple[float, ...] | None
    degenerate: bool = False

    def __bool__(self) -> bool:
        return self.s is not None


def outer_vector(s: Sequence[float]) -> np.ndarray:
    """Vectorized ``[1, s_1] (x) ... (x) [1, s_k]`` in the global index order."""
    v = np.ones(1)
    for si in s:
        v = np.kron(v, [1.0, si])
    return v


def rank1_factorize(t: np.ndarray, tol: float = DEFAULT_TOL) -> Rank1Fit:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("rank-1 factorization expects a nonnegative tensor")
    k = t.ndim
    flat = t.reshape(-1)
    if not np.any(flat != 0):
        return Rank1Fit(None, None, degenerate=True)
    c = float(flat[0])
    if c == 0:
        return Rank1Fit(None, None)
    s = tuple(float(flat[1 << (k - 1 - i)]) / c for i in range(k))
    if np.abs(c * outer_vector(s) - flat).max() > tol:
        return Rank1Fit(None, None)
    return Rank1Fit(c, s)


def is_rank1_compatible(p: Protocol, tol: float = DEFAULT_TOL) -> bool:
    return all(rank1_factorize(column_tensor(p, tau), tol) or not np.any(p.column(tau))
               for tau in p.transcripts)


# -- serialization -----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def matrix_to_csv(row_ids: Sequence[str], col_ids: Sequence, m: np.ndarray,
                  corner: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([corner, *map(str, col_ids)])
    for rid, row in zip(row_ids, m):
        w.writerow([rid, *map(_fmt, row)])
    return buf.getvalue()


def matrix_from_csv(text: str) -> tuple[list[str], list[str], np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ConfigurationError("empty CSV document")
    header = rows[0][1:]
    ids, vals = [], []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(header) + 1:
            raise ConfigurationError(f"CSV line {n}: expected {len(header) + 1} fields")
        ids.append(row[0])
        try:
            vals.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise ConfigurationError(f"CSV line {n}: {exc}") from None
    return ids, header, np.array(vals, dtype=float).reshape(len(ids), len(header))


def protocol_to_csv(p: Protocol) -> str:
    return matrix_to_csv([bitstring(v, p.k) for v in range(1 << p.k)], p.transcripts, p.p,
                         corner="input")


def protocol_from_csv(text: str) -> Protocol:
    ids, header, m = matrix_from_csv(text)
    k = len(ids[0]) if ids else 0
    _check_k(k)
    expected = [bitstring(v, k) for v in range(1 << k)]
    if ids != expected:
        raise ConfigurationError("protocol CSV rows must list every input bit-string in order")
    return Protocol(k, tuple(header), m)


def protocol_to_dict(p: Protocol) -> dict:
    return {"k": p.k, "transcripts": list(p.transcripts), "p": p.p.tolist()}


def protocol_from_dict(doc: dict) -> Protocol:
    try:
        return Protocol(doc["k"], tuple(doc["transcripts"]), np.array(doc["p"], dtype=float))
    except KeyError as exc:
        raise ConfigurationError(f"protocol document: missing field {exc.args[0]!r}") from None


def protocol_to_json(p: Protocol) -> str:
    return json.dumps(protocol_to_dict(p))


def protocol_from_json(text: str) -> Protocol:
    return protocol_from_dict(json.loads(text))
