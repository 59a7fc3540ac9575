"""Decision rules: accuracy evaluation and optimal rules (average and worst case).

A rule for the central observer is a ``|T| x |Y|`` row-stochastic matrix.  A
rule for party ``i`` also sees its own bit, so it holds one such matrix per
value of ``x_i`` (``q`` has shape ``(2, |T|, |Y|)``).
"""

from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass

import numpy as np

from .core import WeightTensor, all_bits
from .errors import ConfigurationError, SolverError
from .lp import OPTIMAL, TOL, LinearProgram, solve, verify_solution
from .protocol import Protocol, _fmt

TIE_TOL = 1e-12
SNAP_TOL = 1e-12  # LP round-off below this is treated as exact zero


@dataclass(frozen=True)
class DecisionRule:
    transcripts: tuple
    labels: tuple
    q: np.ndarray
    party: int | None = None

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        shape = (len(self.transcripts), len(self.labels))
        want = shape if self.party is None else (2,) + shape
        if q.shape != want:
            raise ConfigurationError(f"decision rule shape {q.shape}, expected {want}")
        if np.any(q < -1e-12) or np.abs(q.sum(axis=-1) - 1).max(initial=0.0) > 1e-9:
            raise ConfigurationError("decision rule rows must be probability vectors")
        q = np.clip(q, 0.0, None)
        q.setflags(write=False)
        object.__setattr__(self, "transcripts", tuple(self.transcripts))
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "q", q)

    @classmethod
    def deterministic(cls, transcripts, labels, choice, party=None) -> "DecisionRule":
        """Build from label indices (shape ``(|T|,)``, or ``(2, |T|)`` for a party)."""
        choice = np.asarray(choice, dtype=int)
        q = np.zeros(choice.shape + (len(labels),))
        np.put_along_axis(q, choice[..., None], 1.0, axis=-1)
        return cls(tuple(transcripts), tuple(labels), q, party)

    def matrix_for(self, bit: int = 0) -> np.ndarray:
        return self.q if self.party is None else self.q[bit]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.q == 0) | (self.q == 1)))

    def choices(self) -> np.ndarray:
        """Label index with the largest probability for every transcript."""
        return np.argmax(self.q, axis=-1)


@dataclass(frozen=True)
class AccuracyReport:
    value: float
    kind: str
    argmin: int | None = None
    per_input: np.ndarray | None = None


def _check_shapes(p: Protocol, W: WeightTensor, q: DecisionRule | None = None) -> None:
    if W.k != p.k:
        raise ConfigurationError(f"weight tensor is for k={W.k}, protocol has k={p.k}")
    if q is not None:
        if q.transcripts != p.transcripts:
            raise ConfigurationError("decision rule and protocol transcripts differ")
        if q.labels != W.labels:
            raise ConfigurationError("decision rule and weight tensor labels differ")
        if q.party is not None and not 0 <= q.party < p.k:
            raise ConfigurationError(f"decision rule party {q.party} out of range")


def expected_payoff(p: Protocol, q: DecisionRule, W: WeightTensor) -> np.ndarray:
    """``E_x = sum_{t,y} P(t|x) Q(t,y) W_x^(y)`` for every input ``x``."""
    _check_shapes(p, W, q)
    if q.party is None:
        return np.einsum("xt,ty,xy->x", p.p, q.q, W.values)
    own = all_bits(p.k)[:, q.party]
    return np.einsum("xt,xty,xy->x", p.p, q.q[own], W.values)


def acc_average(p: Protocol, q: DecisionRule, W: WeightTensor) -> AccuracyReport:
    e = expected_payoff(p, q, W)
    return AccuracyReport(float(e.mean()), "average", per_input=e)


def acc_worstcase(p: Protocol, q: DecisionRule, W: WeightTensor) -> AccuracyReport:
    e = expected_payoff(p, q, W)
    j = int(np.argmin(e))
    return AccuracyReport(float(e[j]), "worst-case", argmin=j, per_input=e)


def _scope(k: int, party: int | None, bit: int) -> np.ndarray:
    if party is None:
        return np.ones(1 << k, dtype=bool)
    return all_bits(k)[:, party] == bit


def _argmax_lowest(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax, breaking (near-)ties toward the lowest label index."""
    top = scores.max(axis=1, keepdims=True)
    scale = max(1.0, float(np.abs(scores).max(initial=0.0)))
    return np.argmax(scores >= top - TIE_TOL * scale, axis=1)


def optimal_average_decision(p: Protocol, W: WeightTensor,
                             conditioning: int | None = None) -> DecisionRule:
    """Deterministic argmax rule; ``conditioning`` is a party index or None."""
    _check_shapes(p, W)
    bits = (0,) if conditioning is None else (0, 1)
    choice = []
    for b in bits:
        mask = _scope(p.k, conditioning, b)
        scores = p.p[mask].T @ W.values[mask]  # [t, y]
        choice.append(_argmax_lowest(scores))
    choice = choice[0] if conditioning is None else np.stack(choice)
    return DecisionRule.deterministic(p.transcripts, W.labels, choice, conditioning)


def worstcase_lp(p: Protocol, W: WeightTensor, mask: np.ndarray | None = None) -> LinearProgram:
    """``max xi`` s.t. ``xi <= sum_{t,y} P(t|x) W_x^(y) Q(t,y)`` for x in ``mask``.

    Variables are ``Q`` flattened transcript-major followed by the free ``xi``.
    """
    nt, ny = p.n_transcripts, W.n_labels
    if mask is None:
        mask = np.ones(1 << p.k, dtype=bool)
    xs = np.nonzero(mask)[0]
    nv = nt * ny + 1
    c = np.zeros(nv)
    c[-1] = 1.0
    gain = p.p[xs][:, :, None] * W.values[xs][:, None, :]  # [x, t, y]
    A_le = np.hstack([-gain.reshape(len(xs), nt * ny), np.ones((len(xs), 1))])
    A_eq = np.zeros((nt, nv))
    for t in range(nt):
        A_eq[t, t * ny:(t + 1) * ny] = 1.0
    free = np.zeros(nv, dtype=bool)
    free[-1] = True
    return LinearProgram(c, A_eq, np.ones(nt), A_le, np.zeros(len(xs)), free)


def _solve_worstcase(p: Protocol, W: WeightTensor, mask: np.ndarray,
                     tol: float = TOL.verify) -> tuple[np.ndarray, float]:
    lp = worstcase_lp(p, W, mask)
    sol = solve(lp)
    if sol.status != OPTIMAL:
        raise SolverError(f"worst-case decision LP ended {sol.status}", sol.basis)
    check = verify_solution(lp, sol, tol)
    if not check.ok:
        raise SolverError(f"worst-case decision LP failed verification: {check}", sol.basis)
    q = sol.x[:-1].reshape(p.n_transcripts, W.n_labels)
    q = np.where(q < SNAP_TOL, 0.0, q)
    q /= q.sum(axis=1, keepdims=True)
    return q, sol.objective


def optimal_worstcase_decision(p: Protocol, W: WeightTensor,
                               conditioning: int | None = None,
                               tol: float = TOL.verify) -> DecisionRule:
    """Possibly randomized max-min rule obtained from the LP solution.

    ``tol`` is the tolerance of the independent LP solution check.
    """
    _check_shapes(p, W)
    if conditioning is None:
        q, _ = _solve_worstcase(p, W, _scope(p.k, None, 0), tol)
    else:
        q = np.stack([_solve_worstcase(p, W, _scope(p.k, conditioning, b), tol)[0]
                      for b in (0, 1)])
    return DecisionRule(p.transcripts, W.labels, q, conditioning)


def optimal_worstcase_value(p: Protocol, W: WeightTensor, tol: float = TOL.verify) -> float:
    """LP optimum of the central-observer max-min problem."""
    _check_shapes(p, W)
    return _solve_worstcase(p, W, _scope(p.k, None, 0), tol)[1]


def optimal_accuracy(p: Protocol, W: WeightTensor, mode: str, tol: float = TOL.verify) -> float:
    """Accuracy of ``p`` under its optimal central-observer rule."""
    if mode == "average":
        return acc_average(p, optimal_average_decision(p, W), W).value
    if mode == "worst-case":
        return optimal_worstcase_value(p, W, tol)
    raise ConfigurationError(f"mode must be 'average' or 'worst-case', got {mode!r}")


# -- serialization -----------------------------------------------------------

def rule_to_dict(q: DecisionRule) -> dict:
    return {"transcripts": list(q.transcripts), "labels": list(q.labels),
            "party": q.party, "q": q.q.tolist()}


def rule_from_dict(doc: dict) -> DecisionRule:
    try:
        return DecisionRule(tuple(doc["transcripts"]), tuple(doc["labels"]),
                            np.array(doc["q"], dtype=float), doc.get("party"))
    except KeyError as exc:
        raise ConfigurationError(f"decision document: missing field {exc.args[0]!r}") from None


def rule_to_json(q: DecisionRule) -> str:
    return json.dumps(rule_to_dict(q))


def rule_to_csv(q: DecisionRule) -> str:
    """Rows are transcripts, columns labels; party rules get a leading own-bit column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if q.party is None:
        w.writerow(["transcript", *map(str, q.labels)])
        for t, row in zip(q.transcripts, q.q):
            w.writerow([t, *map(_fmt, row)])
    else:
        w.writerow(["own_bit", "transcript", *map(str, q.labels)])
        for b in (0, 1):
            for t, row in zip(q.transcripts, q.q[b]):
                w.writerow([b, t, *map(_fmt, row)])
    return buf.getvalue()
