"""Brute-force decision oracles and random feasible protocols for checking RR optimality."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import WeightTensor, bitstring
from .decision import optimal_accuracy
from .errors import ConfigurationError, InputError, SamplingError, ScaleError
from .geometry import extremal_signatures
from .protocol import (DEFAULT_TOL, PrivacyBudget, Protocol, _fmt, check_dp, column_tensor,
                       outer_vector, randomized_response, rank1_factorize)

ENUMERATION_BUDGET = 10 ** 7
CHUNK = 1 << 15
MAX_REJECTIONS = 1000
MODES = ("average", "worst-case")


def _rule_count(n_labels: int, n_transcripts: int) -> int:
    n = n_labels ** n_transcripts
    if n > ENUMERATION_BUDGET:
        raise ScaleError(
            f"{n_labels}^{n_transcripts} deterministic rules exceed the enumeration budget "
            f"of {ENUMERATION_BUDGET}")
    return n


def _digit_chunks(n_rules: int, n_labels: int, n_transcripts: int):
    """Yield ``(chunk, |T|)`` arrays of label choices covering every rule once."""
    place = n_labels ** np.arange(n_transcripts, dtype=np.int64)
    for start in range(0, n_rules, CHUNK):
        idx = np.arange(start, min(start + CHUNK, n_rules), dtype=np.int64)
        yield (idx[:, None] // place[None, :]) % n_labels


def brute_force_average_optimum(p: Protocol, W: WeightTensor) -> float:
    """Best average accuracy over every deterministic rule, by exhaustive enumeration."""
    nt, ny = p.n_transcripts, W.n_labels
    n = _rule_count(ny, nt)
    score = p.p.T @ W.values  # [t, y]
    cols = np.arange(nt)
    best = -math.inf
    for digits in _digit_chunks(n, ny, nt):
        best = max(best, float(score[cols, digits].sum(axis=1).max()))
    return best / (1 << p.k)


def brute_force_worstcase_deterministic(p: Protocol, W: WeightTensor) -> float:
    """Best worst-case accuracy over deterministic rules (randomized rules may do better)."""
    nt, ny = p.n_transcripts, W.n_labels
    n = _rule_count(ny, nt)
    gain = p.p[:, :, None] * W.values[:, None, :]  # [x, t, y]
    best = -math.inf
    for digits in _digit_chunks(n, ny, nt):
        e = np.zeros((digits.shape[0], gain.shape[0]))
        for t in range(nt):
            e += gain[:, t, digits[:, t]].T
        best = max(best, float(e.min(axis=1).max()))
    return best


# -- sampling ----------------------------------------------------------------

@dataclass(frozen=True)
class SampledProtocol:
    """A rank-1 feasible protocol together with how it was generated.

    Column ``j`` equals ``weights[j] * outer_vector(signatures[j])``.
    """

    protocol: Protocol
    signatures: np.ndarray
    weights: np.ndarray
    seed: tuple
    attempts: int = 1

    def check(self, budget: PrivacyBudget, tol: float = DEFAULT_TOL) -> bool:
        """DP holds and every column factors with its signature inside the box."""
        if not check_dp(self.protocol, budget, tol).ok:
            return False
        lam = np.array(budget.lambdas)
        for tau in self.protocol.transcripts:
            col = column_tensor(self.protocol, tau)
            if not np.any(col):
                continue
            fit = rank1_factorize(col, tol)
            if not fit:
                return False
            s = np.array(fit.s)
            if np.any(s < 1 / lam - tol) or np.any(s > lam + tol):
                return False
        return True


def _seed_tuple(seed) -> tuple:
    if isinstance(seed, (tuple, list)):
        return tuple(int(v) for v in seed)
    return (int(seed),)


def _corner_names(budget: PrivacyBudget, active: list[int]) -> list[str]:
    """RR-style transcript names; parties with lambda = 1 show as ``*``."""
    kk = len(active)
    full = (1 << kk) - 1
    names = []
    for c in range(1 << kk):
        bits = bitstring(full ^ c, kk) if kk else ""
        chars = ["*"] * budget.k
        for pos, i in enumerate(active):
            chars[i] = bits[pos]
        names.append("".join(chars))
    return names


def sample_feasible_protocol(budget: PrivacyBudget, m: int, seed,
                             max_rejections: int = MAX_REJECTIONS) -> SampledProtocol:
    """Random rank-1 feasible protocol with ``m`` columns.

    ``m - 2^k'`` interior signatures are drawn log-uniformly in the privacy box
    (``k'`` counts parties with ``lambda > 1``) and given a random share of the
    probability mass; the corners then absorb the residual.  Draws that would
    need a negative corner weight are rejected and redrawn from a derived seed.
    """
    lam = np.array(budget.lambdas)
    active = [i for i in range(budget.k) if lam[i] > 1.0]
    kk = len(active)
    n_corner = 1 << kk
    if m < n_corner:
        raise InputError(f"need at least {n_corner} columns, got m={m}")
    n_int = m - n_corner
    if kk:
        reduced = extremal_signatures(PrivacyBudget(tuple(lam[active])))
        corner_matrix = reduced.matrix
        corner_red = np.array([sig.s for sig in reduced.signatures])
    else:
        corner_matrix = np.ones((1, 1))
        corner_red = np.zeros((1, 0))
    log_lam = np.log(lam[active])
    entropy = _seed_tuple(seed)

    for attempt in range(max_rejections):
        rng = np.random.default_rng(np.random.SeedSequence([*entropy, attempt]))
        if n_int:
            sig_red = np.exp(rng.uniform(-log_lam, log_lam, size=(n_int, kk)))
            c = rng.uniform() * rng.dirichlet(np.ones(n_int))
            V = np.column_stack([outer_vector(s) for s in sig_red])
            resid = 1.0 - V @ c
        else:
            sig_red = np.zeros((0, kk))
            c = np.zeros(0)
            resid = np.ones(n_corner)
        alpha = np.linalg.solve(corner_matrix, resid)
        if alpha.min() < 0:
            continue
        red = np.vstack([sig_red, corner_red])
        sigs = np.ones((m, budget.k))
        sigs[:, active] = red
        weights = np.concatenate([c, alpha])
        cols = np.column_stack([w * outer_vector(s) for w, s in zip(weights, sigs)])
        cols /= cols.sum(axis=1, keepdims=True)
        names = [f"i{j}" for j in range(n_int)] + _corner_names(budget, active)
        p = Protocol(budget.k, tuple(names), cols)
        return SampledProtocol(p, sigs, weights, entropy, attempt + 1)
    raise SamplingError(
        f"{max_rejections} consecutive draws needed negative corner weights (seed {entropy})")


def optimality_gap(sp: SampledProtocol | Protocol, W: WeightTensor, budget: PrivacyBudget,
                   mode: str) -> float:
    """RR's optimal accuracy minus the sampled protocol's optimal accuracy."""
    p = sp.protocol if isinstance(sp, SampledProtocol) else sp
    return (optimal_accuracy(randomized_response(budget), W, mode)
            - optimal_accuracy(p, W, mode))


# -- experiments ---------------------------------------------------------------

@dataclass(frozen=True)
class GapRecord:
    sample: int
    m: int
    problem: str
    mode: str
    acc_rr: float
    acc_protocol: float

    @property
    def gap(self) -> float:
        return self.acc_rr - self.acc_protocol


def sample_columns(k_active: int, i: int) -> int:
    """Column count used for sample ``i``: a few interior columns beyond the corners."""
    return (1 << k_active) + 1 + i % 4


def run_gap_experiment(budget: PrivacyBudget, problems: Mapping[str, WeightTensor],
                       modes: Sequence[str], samples: int, seed: int) -> list[GapRecord]:
    """Evaluate every problem and mode on the same ``samples`` sampled protocols.

    Sample ``i`` uses seed ``(seed, i)``, so records are reproducible and independent
    of how many samples are requested.
    """
    for mode in modes:
        if mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    rr = randomized_response(budget)
    base = {(name, mode): optimal_accuracy(rr, W, mode)
            for name, W in problems.items() for mode in modes}
    k_active = budget.k - len(budget.degenerate_parties)
    records = []
    for i in range(samples):
        m = sample_columns(k_active, i)
        sp = sample_feasible_protocol(budget, m, (seed, i))
        for name, W in problems.items():
            for mode in modes:
                records.append(GapRecord(i, m, name, mode, base[name, mode],
                                         optimal_accuracy(sp.protocol, W, mode)))
    return records


@dataclass(frozen=True)
class Manifest:
    k: int
    lambdas: tuple
    function: str
    measure: str | None
    mode: str
    samples: int
    seed: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"field 'mode': expected one of {MODES}, got {self.mode!r}")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise ConfigurationError(f"field 'samples': must be a positive integer, got {self.samples!r}")
        if len(self.lambdas) != self.k:
            raise ConfigurationError(f"field 'lambdas': expected {self.k} values, got {len(self.lambdas)}")

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(tuple(self.lambdas))


def manifest_from_dict(doc: dict) -> Manifest:
    known = {"k", "lambdas", "function", "measure", "mode", "samples", "seed"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"manifest: unknown fields {sorted(unknown)}")
    for key in ("k", "lambdas", "function"):
        if key not in doc:
            raise ConfigurationError(f"manifest: missing field {key!r}")
    lambdas = doc["lambdas"]
    if isinstance(lambdas, (int, float)):
        lambdas = [lambdas] * int(doc["k"])
    return Manifest(int(doc["k"]), tuple(float(v) for v in lambdas), str(doc["function"]),
                    doc.get("measure"), doc.get("mode", "average"),
                    doc.get("samples", 1000), int(doc.get("seed", 0)))


def load_manifest(path: str | Path) -> Manifest:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return manifest_from_dict(doc)


def run_manifest(manifest: Manifest) -> list[GapRecord]:
    from .problems import weight_tensor

    W = weight_tensor(manifest.function, manifest.k, manifest.measure)
    return run_gap_experiment(manifest.budget, {manifest.function: W}, (manifest.mode,),
                              manifest.samples, manifest.seed)


LOG_HEADER = ["sample", "m", "function", "mode", "acc_rr", "acc_protocol", "gap"]


def _log_rows(records: Iterable[GapRecord]):
    for r in records:
        yield [r.sample, r.m, r.problem, r.mode, _fmt(r.acc_rr), _fmt(r.acc_protocol), _fmt(r.gap)]


def gap_log_csv(records: Iterable[GapRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_HEADER)
    w.writerows(_log_rows(records))
    return buf.getvalue()


def append_gap_log(path: str | Path, records: Iterable[GapRecord]) -> None:
    """Append records to a CSV log, writing the header when the file is new or empty."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(LOG_HEADER)
        w.writerows(_log_rows(records))
