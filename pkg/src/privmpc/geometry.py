"""Signature vectors, the corner polytope and LP dual optimality certificates.

A signature ``s`` in the box ``prod_i [1/lambda_i, lambda_i]`` stands for every
transcript whose column is proportional to ``[1, s_1] (x) ... (x) [1, s_k]``.
The 2^k corners (each ``s_i`` at an end of its interval) span a simplex that
contains the whole manifold of signatures.

Corner ``c`` (an integer in the global index order) has sign pattern
``a_i = +1`` where bit i of ``c`` is 0 and ``a_i = -1`` where it is 1, so corner
0 is ``(lambda_1, ..., lambda_k)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import WeightTensor, all_bits, bitstring
from .errors import ConfigurationError, DegenerateBudgetError, InputError, SolverError
from .lp import OPTIMAL, LinearProgram, solve, verify_solution
from .protocol import PrivacyBudget, Protocol, outer_vector

HARD_MARGIN = -1e-7
TIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Signature:
    s: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(float(v) for v in self.s))

    @property
    def k(self) -> int:
        return len(self.s)

    @property
    def vectorized(self) -> np.ndarray:
        return outer_vector(self.s)

    def in_box(self, budget: PrivacyBudget, tol: float = 1e-12) -> bool:
        lam = np.array(budget.lambdas)
        s = np.array(self.s)
        return bool(np.all(s >= 1 / lam - tol) and np.all(s <= lam + tol))


@dataclass(frozen=True)
class CornerSet:
    patterns: np.ndarray     # (2^k, k) entries in {-1, +1}
    signatures: tuple        # Signature per corner
    matrix: np.ndarray       # (2^k, 2^k), column c = vectorized corner c

    def __len__(self) -> int:
        return len(self.signatures)


def sign_patterns(k: int) -> np.ndarray:
    return 1 - 2 * all_bits(k)


def extremal_signatures(budget: PrivacyBudget) -> CornerSet:
    lam = np.array(budget.lambdas)
    patterns = sign_patterns(budget.k)
    sigs = tuple(Signature(tuple(lam ** a)) for a in patterns)
    matrix = np.column_stack([s.vectorized for s in sigs])
    return CornerSet(patterns, sigs, matrix)


def halfspace_value(T: np.ndarray, a: Sequence[int], budget: PrivacyBudget) -> float:
    """Signed value of ``T`` against the face ``H_a``; membership means ``>= 0``.

    ``(-1)^k (prod_j a_j) sum_x T_x prod_i (-lambda_i)^(a_i x_i)``
    """
    T = np.asarray(T, dtype=float)
    k = budget.k
    if T.shape != (1 << k,):
        raise ConfigurationError(f"T must have length {1 << k}")
    a = np.asarray(a, dtype=int)
    lam = np.array(budget.lambdas)
    weights = outer_vector(-(lam ** a))
    return float((-1) ** k * np.prod(a) * (weights @ T))


def halfspace_values(T: np.ndarray, budget: PrivacyBudget) -> np.ndarray:
    """``halfspace_value`` for every sign pattern, in corner order."""
    return np.array([halfspace_value(T, a, budget) for a in sign_patterns(budget.k)])


def polytope_member(T: np.ndarray, budget: PrivacyBudget, tol: float = 1e-9) -> bool:
    T = np.asarray(T, dtype=float)
    if T.shape != (1 << budget.k,):
        raise InputError(f"T must have length {1 << budget.k}")
    if abs(T[0] - 1.0) > tol:
        raise InputError(f"T must be normalized with T[0...0] = 1, got {T[0]!r}")
    return bool(np.all(halfspace_values(T, budget) >= -tol))


def corner_weights(T: np.ndarray, budget: PrivacyBudget) -> np.ndarray:
    """Solve ``corner_matrix @ alpha = T`` (no sign or normalization checks)."""
    if budget.degenerate_parties:
        raise DegenerateBudgetError(
            f"parties {list(budget.degenerate_parties)} have lambda = 1; corners coincide")
    return np.linalg.solve(extremal_signatures(budget).matrix, np.asarray(T, dtype=float))


def corner_decomposition(sig: Signature, budget: PrivacyBudget) -> np.ndarray:
    """Convex weights over the corners reproducing ``sig.vectorized``."""
    if sig.k != budget.k:
        raise ConfigurationError(f"signature has {sig.k} coordinates, budget {budget.k}")
    if not sig.in_box(budget):
        raise InputError(f"signature {sig.s} lies outside the privacy box")
    alpha = corner_weights(sig.vectorized, budget)
    return np.where((alpha < 0) & (alpha > -1e-13), 0.0, alpha)


# -- LP certificates ----------------------------------------------------------

def _gain_matrix(W: WeightTensor, columns: np.ndarray) -> np.ndarray:
    """``g[j, y] = <columns[:, j], W^(y)>``."""
    return columns.T @ W.values


def signature_lp(W: WeightTensor, columns: np.ndarray, mode: str) -> LinearProgram:
    """Restriction of the signature LP to the given columns.

    Variables are ``theta[j, y]`` flattened column-major-by-signature (index
    ``j * |Y| + y``), followed by ``xi`` in worst-case mode.  The average
    objective carries the 1/2^k factor, so its optimum is an accuracy.
    """
    n_x, n_sig = columns.shape
    ny = W.n_labels
    stoch = np.repeat(columns, ny, axis=1)  # column j*ny+y is columns[:, j]
    if mode == "average":
        c = (_gain_matrix(W, columns) / n_x).reshape(-1)
        return LinearProgram(c, stoch, np.ones(n_x))
    if mode == "worst-case":
        nv = n_sig * ny + 1
        c = np.zeros(nv)
        c[-1] = 1.0
        gain = columns[:, :, None] * W.values[:, None, :]  # [x, j, y]
        A_le = np.hstack([-gain.reshape(n_x, -1), np.ones((n_x, 1))])
        A_eq = np.hstack([stoch, np.zeros((n_x, 1))])
        free = np.zeros(nv, dtype=bool)
        free[-1] = True
        return LinearProgram(c, A_eq, np.ones(n_x), A_le, np.zeros(n_x), free)
    raise ConfigurationError(f"mode must be 'average' or 'worst-case', got {mode!r}")


def signature_lp_value(W: WeightTensor, columns: np.ndarray, mode: str) -> float:
    lp = signature_lp(W, columns, mode)
    sol = solve(lp)
    if sol.status != OPTIMAL:
        raise SolverError(f"signature LP ended {sol.status}", sol.basis)
    return sol.objective


@dataclass
class DualCertificate:
    kind: str
    optimum: float
    mu: np.ndarray
    nu: np.ndarray | None
    margins: np.ndarray          # (corners, labels) dual slack at each corner
    theta: np.ndarray            # (corners, labels) primal weights
    budget: PrivacyBudget
    degenerate: bool = False
    notes: list = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())

    @property
    def corners_checked(self) -> int:
        return int(self.margins.shape[0])

    @property
    def certified(self) -> bool:
        return self.min_margin >= HARD_MARGIN

    @property
    def status(self) -> str:
        if self.min_margin >= 0:
            return "certified"
        return "warning" if self.certified else "failed"

    @property
    def tied_corners(self) -> list[int]:
        """Corners where more than one label is tight: the optimal rule is not unique."""
        tight = self.margins <= TIGHT_TOL
        return [int(c) for c in np.nonzero(tight.sum(axis=1) > 1)[0]]

    def slack(self, W: WeightTensor, s: Sequence[float]) -> np.ndarray:
        """Per-label dual slack at an arbitrary signature ``s``."""
        T = outer_vector(s)
        lhs = T @ self.mu
        if self.kind == "average":
            rhs = (T @ W.values) / T.size
        else:
            rhs = (T * self.nu) @ W.values
        return lhs - rhs

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "optimum": self.optimum,
            "mu": self.mu.tolist(),
            "nu": None if self.nu is None else self.nu.tolist(),
            "min_margin": self.min_margin,
            "corners_checked": self.corners_checked,
            "status": self.status,
            "tied_corners": self.tied_corners,
            "lambdas": list(self.budget.lambdas),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _certify(W: WeightTensor, budget: PrivacyBudget, mode: str) -> DualCertificate:
    if W.k != budget.k:
        raise ConfigurationError(f"weight tensor is for k={W.k}, budget has {budget.k} parties")
    corners = extremal_signatures(budget).matrix
    lp = signature_lp(W, corners, mode)
    sol = solve(lp)
    if sol.status != OPTIMAL:
        raise SolverError(f"corner LP ended {sol.status}", sol.basis)
    check = verify_solution(lp, sol)
    if not check.ok:
        raise SolverError(f"corner LP failed verification: {check}", sol.basis)
    ny = W.n_labels
    n_c = corners.shape[1]
    mu = sol.dual_eq
    theta = sol.x[:n_c * ny].reshape(n_c, ny)
    lhs = corners.T @ mu  # <T^(a), mu>
    if mode == "average":
        nu = None
        rhs = _gain_matrix(W, corners) / corners.shape[0]
    else:
        nu = sol.dual_le
        rhs = (corners * nu[:, None]).T @ W.values
    margins = lhs[:, None] - rhs
    cert = DualCertificate(mode, sol.objective, mu, nu, margins, theta, budget)
    if budget.degenerate_parties:
        cert.degenerate = True
        cert.notes.append(
            f"degenerate budget: parties {list(budget.degenerate_parties)} have lambda = 1, "
            "so several corners coincide")
    if cert.tied_corners:
        cert.notes.append("optimal decision rule is not unique (labels tie at some corners)")
    return cert


def certify_average_optimality(W: WeightTensor, budget: PrivacyBudget) -> DualCertificate:
    """Solve the corner-restricted average LP and check its dual at every corner.

    The dual slack is multilinear in ``s``, so checking corners covers the box.
    ``mu`` is on the accuracy scale: ``sum(mu)`` equals the optimum.
    """
    return _certify(W, budget, "average")


def certify_worstcase_optimality(W: WeightTensor, budget: PrivacyBudget) -> DualCertificate:
    return _certify(W, budget, "worst-case")


def protocol_from_certificate(cert: DualCertificate) -> Protocol:
    """Protocol whose columns are the corners scaled by their total primal mass.

    Transcripts are named like randomized-response outputs: corner ``c`` is the
    transcript whose bits are the complement of ``c``'s bits.
    """
    k = cert.budget.k
    corners = extremal_signatures(cert.budget).matrix
    mass = cert.theta.sum(axis=1)
    keep = np.nonzero(mass > 1e-14)[0]
    full = (1 << k) - 1
    transcripts = tuple(bitstring(full ^ int(c), k) for c in keep)
    cols = corners[:, keep] * mass[keep]
    return Protocol(k, transcripts, cols / cols.sum(axis=1, keepdims=True))
