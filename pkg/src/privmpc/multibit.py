"""Two-party protocols over multi-bit inputs where interaction beats randomized response.

Party 1 holds the leading bits of the input index and speaks first; party 2
holds the trailing bits and answers after seeing party 1's message.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import AccuracyMeasure, FunctionSpec, all_bits, bitstring, build_weight_tensor, distance_measure
from .decision import optimal_accuracy
from .errors import ConfigurationError, InputError
from .protocol import PrivacyBudget, Protocol, _fmt, randomized_response


def _check_lambda(lam: float) -> None:
    if not (math.isfinite(lam) and lam >= 1.0):
        raise InputError(f"lambda must be finite and >= 1, got {lam!r}")


def selector_function() -> FunctionSpec:
    """``f(x, y1, y2)`` is ``y1 xor y2`` when ``x = 0`` and ``y1 and y2`` when ``x = 1``."""
    return FunctionSpec.from_callable(
        3, lambda b: (b[1] ^ b[2]) if b[0] == 0 else (b[1] & b[2]), labels=(0, 1))


def hamming_function() -> FunctionSpec:
    """Hamming distance between party 1's pair ``(x1, x2)`` and party 2's ``(y1, y2)``."""
    return FunctionSpec.from_callable(
        4, lambda b: (b[0] ^ b[2]) + (b[1] ^ b[3]), labels=(0, 1, 2))


def hamming_measure() -> AccuracyMeasure:
    return distance_measure((0, 1, 2), top=2.0)


@dataclass(frozen=True)
class TwoRoundProtocol:
    """Party 1 sends ``m1`` from ``first``; party 2 replies from ``second[m1]``.

    ``first[x, a]`` is over party 1's ``2^k1`` inputs, ``second[a, y, b]`` over
    party 2's ``2^k2`` inputs.  The induced protocol has transcripts ``"m1:m2"``.
    """

    k1: int
    k2: int
    first: np.ndarray
    first_messages: tuple
    second: np.ndarray
    second_messages: tuple

    def __post_init__(self):
        first = np.array(self.first, dtype=float)
        second = np.array(self.second, dtype=float)
        n1, n2 = len(self.first_messages), len(self.second_messages)
        if first.shape != (1 << self.k1, n1):
            raise ConfigurationError(f"first-round matrix shape {first.shape}")
        if second.shape != (n1, 1 << self.k2, n2):
            raise ConfigurationError(f"second-round tensor shape {second.shape}")
        for name, arr in (("first", first), ("second", second)):
            if np.any(arr < 0) or np.abs(arr.sum(axis=-1) - 1).max() > 1e-12:
                raise ConfigurationError(f"{name}-round rows must be probability vectors")
        first.setflags(write=False)
        second.setflags(write=False)
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        object.__setattr__(self, "first_messages", tuple(self.first_messages))
        object.__setattr__(self, "second_messages", tuple(self.second_messages))

    @property
    def k(self) -> int:
        return self.k1 + self.k2

    @property
    def protocol(self) -> Protocol:
        # p[x, y, a, b] = first[x, a] * second[a, y, b]
        joint = np.einsum("xa,ayb->xyab", self.first, self.second)
        n = len(self.first_messages) * len(self.second_messages)
        names = tuple(f"{a}:{b}" for a in self.first_messages for b in self.second_messages)
        return Protocol(self.k, names, joint.reshape(1 << self.k, n))


def _rr_matrix(k: int, lam: float) -> np.ndarray:
    return randomized_response(PrivacyBudget.uniform(k, lam)).p


def selector_interactive_protocol(lam: float) -> TwoRoundProtocol:
    """Party 1 releases ``x`` by RR; party 2 releases the branch-selected bit by RR."""
    _check_lambda(lam)
    rr1 = _rr_matrix(1, lam)
    ys = all_bits(2)
    second = np.zeros((2, 4, 2))
    for a in (0, 1):
        b = ys[:, 0] ^ ys[:, 1] if a == 0 else ys[:, 0] & ys[:, 1]
        second[a] = rr1[b]
    return TwoRoundProtocol(1, 2, rr1, ("0", "1"), second, ("0", "1"))


def hamming_reply_table(lam: float) -> np.ndarray:
    """``table[d, j] = P(reply j | d_H(x_published, y) = d)``."""
    _check_lambda(lam)
    z = lam * (1 + lam)
    return np.array([
        [lam * lam / z, (lam - 1) / z, 1 / z],
        [1 / (1 + lam), (lam - 1) / (1 + lam), 1 / (1 + lam)],
        [1 / z, (lam - 1) / z, lam * lam / z],
    ])


def hamming_interactive_protocol(lam: float) -> TwoRoundProtocol:
    """Party 1 releases both bits by RR; party 2 replies with a noisy distance estimate.

    The reply depends on ``y`` only through its distance to party 1's published pair.
    """
    _check_lambda(lam)
    table = hamming_reply_table(lam)
    bits = all_bits(2)
    dist = (bits[:, None, :] != bits[None, :, :]).sum(axis=2)  # [a, y]
    second = table[dist]
    names = tuple(bitstring(v, 2) for v in range(4))
    return TwoRoundProtocol(2, 2, _rr_matrix(2, lam), names, second, ("0", "1", "2"))


def bipartition_rank1(column: np.ndarray, k: int, split: int, tol: float = 1e-9) -> bool:
    """Rank-1 test of a column reshaped as (first ``split`` bits) x (remaining bits)."""
    m = np.asarray(column, dtype=float).reshape(1 << split, 1 << (k - split))
    sv = np.linalg.svd(m, compute_uv=False)
    return bool(sv.size < 2 or sv[1] <= tol * max(1.0, sv[0]))


def compare_curves(protocol_a: Callable[[float], Protocol | TwoRoundProtocol],
                   protocol_b: Callable[[float], Protocol | TwoRoundProtocol],
                   f: FunctionSpec, w: AccuracyMeasure, eps_grid: Iterable[float],
                   mode: str = "average") -> list[tuple[float, float, float]]:
    """``(eps, acc_a, acc_b)`` per grid point, each under its optimal decision rule."""
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise InputError("epsilon grid is empty")
    W = build_weight_tensor(f, w)
    rows = []
    for eps in grid:
        lam = math.exp(eps)
        accs = []
        for make in (protocol_a, protocol_b):
            p = make(lam)
            if isinstance(p, TwoRoundProtocol):
                p = p.protocol
            accs.append(optimal_accuracy(p, W, mode))
        rows.append((eps, accs[0], accs[1]))
    return rows


def rr_baseline(k: int) -> Callable[[float], Protocol]:
    return lambda lam: randomized_response(PrivacyBudget.uniform(k, lam))


def curves_to_csv(rows: Sequence[tuple[float, float, float]],
                  names: tuple[str, str] = ("acc_interactive", "acc_rr")) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["eps", *names])
    for row in rows:
        out.writerow([_fmt(v) for v in row])
    return buf.getvalue()
