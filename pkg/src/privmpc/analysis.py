"""Closed-form accuracies and the hypothesis-testing view of binary mechanisms."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .decision import DecisionRule
from .errors import ConfigurationError, InputError, PreconditionError
from .protocol import _fmt

REGION_TOL = 1e-12


def _check_lambda(lam: float) -> None:
    if not (math.isfinite(lam) and lam >= 1.0):
        raise InputError(f"lambda must be finite and >= 1, got {lam!r}")


def xor_accuracy(k: int, lam: float) -> float:
    """Optimal accuracy (average and worst case) for XOR of k bits."""
    if k < 1:
        raise InputError("k must be >= 1")
    _check_lambda(lam)
    num = sum(math.comb(k, 2 * i) * lam ** (k - 2 * i) for i in range(k // 2 + 1))
    return num / (1.0 + lam) ** k


def xor_asymptotic_gap(k: int, eps: float) -> float:
    """Leading small-eps expansion ``1/2 + 2^-(k+1) eps^k`` of ``xor_accuracy``."""
    if eps < 0:
        raise InputError("eps must be >= 0")
    return 0.5 + 2.0 ** -(k + 1) * eps ** k


def and_accuracy_two_party(lam: float) -> float:
    _check_lambda(lam)
    return lam * (lam * lam + lam + 2) / (1.0 + lam) ** 3


def collaborative_xor_accuracy(lam: float) -> float:
    """Accuracy when the parties pool their bits and release one noisy XOR."""
    _check_lambda(lam)
    return lam / (1.0 + lam)


@dataclass(frozen=True)
class Mechanism:
    """Binary-input channel; ``rows[x, z] = P(z | x)``."""

    rows: np.ndarray
    outputs: tuple = ()

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != 2 or rows.shape[1] < 1:
            raise ConfigurationError(f"mechanism must have two rows, got shape {rows.shape}")
        if np.any(rows < 0) or np.abs(rows.sum(axis=1) - 1).max() > 1e-12:
            raise ConfigurationError("mechanism rows must be probability vectors")
        outputs = tuple(self.outputs) or tuple(range(rows.shape[1]))
        if len(outputs) != rows.shape[1]:
            raise ConfigurationError("one output label per column required")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "outputs", outputs)

    def is_dp(self, lam: float, tol: float = 0.0) -> bool:
        """Entrywise check ``P(z|x) <= lam P(z|x')`` in both directions."""
        a, b = self.rows
        return bool(np.all(a <= lam * b + tol) and np.all(b <= lam * a + tol))


def rr_mechanism(lam: float) -> Mechanism:
    _check_lambda(lam)
    keep, flip = lam / (1 + lam), 1 / (1 + lam)
    return Mechanism(np.array([[keep, flip], [flip, keep]]), (0, 1))


def gmps_and_mechanism(lam: float) -> Mechanism:
    """Three-letter mechanism used with the AND decision ``1 if any 2 else a & b``."""
    _check_lambda(lam)
    d = (1 + lam) ** 2
    m0 = [lam / (1 + lam), lam / d, 1 / d]
    m1 = [1 / (1 + lam), lam * lam / d, lam / d]
    return Mechanism(np.array([m0, m1]), (0, 1, 2))


@dataclass(frozen=True)
class TradeoffRegion:
    """Lower-left boundary of the (P_MD, P_FA) region from (0, 1) to (1, 0)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def lower(self, md: float) -> float:
        """Smallest P_FA on the boundary at the given P_MD."""
        v = self.vertices
        best = math.inf
        for (x0, y0), (x1, y1) in zip(v[:-1], v[1:]):
            if x0 - REGION_TOL <= md <= x1 + REGION_TOL:
                if x1 - x0 <= REGION_TOL:
                    best = min(best, y0, y1)
                else:
                    t = min(max((md - x0) / (x1 - x0), 0.0), 1.0)
                    best = min(best, y0 + t * (y1 - y0))
        return best

    def canonical(self) -> "TradeoffRegion":
        """Same boundary with collinear and repeated vertices removed."""
        return TradeoffRegion(np.array(_drop_collinear([tuple(v) for v in self.vertices])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p_md", "p_fa"])
        for md, fa in self.vertices:
            w.writerow([_fmt(md), _fmt(fa)])
        return buf.getvalue()


def _drop_collinear(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[tuple[float, float]] = []
    for p in points:
        if out and abs(p[0] - out[-1][0]) <= REGION_TOL and abs(p[1] - out[-1][1]) <= REGION_TOL:
            continue
        while len(out) >= 2:
            (x0, y0), (x1, y1) = out[-2], out[-1]
            cross = (x1 - x0) * (p[1] - y0) - (y1 - y0) * (p[0] - x0)
            if abs(cross) <= REGION_TOL:
                out.pop()
            else:
                break
        out.append(p)
    return out


def tradeoff_region(m: Mechanism) -> TradeoffRegion:
    """Boundary traced by likelihood-ratio rejection sets (reject x=0 on S)."""
    p0, p1 = m.rows
    keep = ~((p0 == 0) & (p1 == 0))
    p0, p1 = p0[keep], p1[keep]
    with np.errstate(divide="ignore"):
        ratio = np.where(p0 == 0, np.inf, p1 / np.where(p0 == 0, 1.0, p0))
    order = sorted(range(ratio.size), key=lambda j: (-ratio[j], j))
    fa, md = 0.0, 1.0
    points = [(md, fa)]
    for j in order:
        fa += p0[j]
        md -= p1[j]
        points.append((max(md, 0.0), min(fa, 1.0)))
    points[-1] = (0.0, 1.0)
    points.reverse()
    return TradeoffRegion(np.array(_drop_collinear(points)))


def dp_region(lam: float) -> TradeoffRegion:
    """Boundary of ``P_FA + lam P_MD >= 1`` and ``lam P_FA + P_MD >= 1``.

    The middle vertex is kept even at ``lam = 1``, where it is collinear.
    """
    _check_lambda(lam)
    mid = 1.0 / (1.0 + lam)
    return TradeoffRegion(np.array([[0.0, 1.0], [mid, mid], [1.0, 0.0]]))


def region_contains(outer: TradeoffRegion, inner: TradeoffRegion, tol: float = 1e-9) -> bool:
    """True iff every vertex of ``inner`` lies on or above ``outer``'s boundary."""
    return all(fa >= outer.lower(md) - tol for md, fa in inner.vertices)


def regions_equal(a: TradeoffRegion, b: TradeoffRegion, tol: float = 1e-9) -> bool:
    """Vertex-wise comparison of the canonical boundaries."""
    a, b = a.canonical(), b.canonical()
    return (a.vertices.shape == b.vertices.shape
            and bool(np.abs(a.vertices - b.vertices).max() <= tol))


def simulate_mechanism(target: Mechanism, lam: float, tol: float = 1e-9) -> Mechanism | None:
    """Post-processing ``T`` of RR's output with ``target = T o M_RR(lam)``, or None.

    ``T.rows[r]`` is the output distribution given RR output ``r``.
    """
    _check_lambda(lam)
    if not region_contains(dp_region(lam), tradeoff_region(target), tol):
        raise PreconditionError(f"target mechanism is not {lam}-differentially private")
    rows = target.rows
    if lam == 1.0:
        if np.abs(rows[0] - rows[1]).max() > tol:
            return None
        return Mechanism(np.vstack([rows[0], rows[0]]), target.outputs)
    inv = (1 + lam) / (lam * lam - 1) * np.array([[lam, -1.0], [-1.0, lam]])
    T = inv @ rows
    if T.min() < -tol:
        return None
    T = np.clip(T, 0.0, None)
    return Mechanism(T / T.sum(axis=1, keepdims=True), target.outputs)


def compose(T: Mechanism, m: Mechanism) -> np.ndarray:
    """Rows of ``T o m``: the distribution of ``T``'s output given ``m``'s input."""
    if T.rows.shape[0] != m.rows.shape[1]:
        raise ConfigurationError("post-processing input alphabet does not match")
    return m.rows @ T.rows


def rr_simulation_decision(lam: float) -> DecisionRule:
    """Randomized AND rule on two RR bits that reproduces the 3-letter mechanism."""
    _check_lambda(lam)
    mixed0 = lam / (1 + lam)
    q = np.array([[1.0, 0.0], [mixed0, 1 - mixed0], [mixed0, 1 - mixed0], [0.0, 1.0]])
    return DecisionRule(("00", "01", "10", "11"), (0, 1), q)


def accuracy_curve(fn: Callable[[float], float], eps_grid: Iterable[float]) -> list[tuple[float, float]]:
    return [(float(e), float(fn(e))) for e in eps_grid]


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
