"""Command-line front end.

Exit codes: 0 ok, 2 invalid configuration, 3 solver failure, 4 failed
certificate or verification check, 5 sampling failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, multibit
from .decision import optimal_accuracy, optimal_average_decision, optimal_worstcase_decision, \
    rule_to_csv, rule_to_json
from .errors import ConfigurationError, InputError, SamplingError, ScaleError, SolverError
from .geometry import certify_average_optimality, certify_worstcase_optimality
from .oracle import MODES, gap_log_csv, run_gap_experiment
from .problems import BUILTIN_FUNCTIONS, FIXED_K, weight_tensor
from .protocol import PrivacyBudget, _fmt, randomized_response

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK, EXIT_SAMPLING = 0, 2, 3, 4, 5
COMMANDS = ("accuracy", "certify", "verify", "region", "compare", "decision")
DEFAULT_TOL = {"certify": 1e-7, "verify": 1e-9, "region": 1e-9, "compare": 1e-9}
DEFAULT_COMPARE_GRID = "0:5:20"


@dataclass
class RunConfig:
    command: str
    k: int | None = None
    lambdas: tuple | None = None
    function: str = "xor"
    measure: str | None = None
    mode: str = "average"
    eps: tuple | None = None
    seed: int = 0
    samples: int = 1000
    out: str | None = None
    tol: float | None = None
    mechanism: str = "rr"
    party: int | None = None
    format: str = "csv"

    def budgets(self) -> list[tuple[float | None, PrivacyBudget]]:
        """``(eps, budget)`` pairs; eps is None for heterogeneous budgets."""
        if self.eps is not None:
            return [(e, PrivacyBudget.uniform(self.k, math.exp(e))) for e in self.eps]
        lam = self.lambdas
        eps = math.log(lam[0]) if len(set(lam)) == 1 else None
        return [(eps, PrivacyBudget(lam))]

    def single_budget(self) -> PrivacyBudget:
        pairs = self.budgets()
        if len(pairs) != 1:
            raise ConfigurationError(f"field 'eps': command {self.command!r} takes a single budget")
        return pairs[0][1]

    @property
    def tolerance(self) -> float:
        return self.tol if self.tol is not None else DEFAULT_TOL.get(self.command, 1e-8)


def parse_grid(text) -> tuple[float, ...]:
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    elif isinstance(text, (int, float)):
        vals = [float(text)]
    else:
        text = str(text).strip()
        try:
            if ":" in text:
                start, stop, num = text.split(":")
                vals = list(np.linspace(float(start), float(stop), int(num)))
            else:
                vals = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"field 'eps': cannot parse grid {text!r}") from None
    if any(not math.isfinite(v) or v < 0 for v in vals):
        raise ConfigurationError("field 'eps': values must be finite and >= 0")
    return tuple(float(v) for v in vals)


def _parse_lambdas(value) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        value = [value]
    if isinstance(value, str):
        value = value.split(",")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"field 'lambda': cannot parse {value!r}") from None


CONFIG_KEYS = {
    "k": "k", "lambda": "lambdas", "lambdas": "lambdas", "f": "function", "function": "function",
    "measure": "measure", "mode": "mode", "eps": "eps", "seed": "seed", "samples": "samples",
    "out": "out", "tol": "tol", "mechanism": "mechanism", "party": "party", "format": "format",
}


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"--config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    out = {}
    for key, value in doc.items():
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"{path}: unknown field {key!r}")
        out[CONFIG_KEYS[key]] = value
    return out


def build_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge file and flags (flags win), normalize, and validate."""
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    cfg = RunConfig(command)
    names = {f.name for f in fields(RunConfig)}
    for key, value in merged.items():
        if key in names:
            setattr(cfg, key, value)
    if cfg.lambdas is not None:
        cfg.lambdas = _parse_lambdas(cfg.lambdas)
    if cfg.eps is not None:
        cfg.eps = parse_grid(cfg.eps)
    if command == "compare" and cfg.eps is None:
        cfg.eps = parse_grid(DEFAULT_COMPARE_GRID)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    def bad(name, msg):
        raise ConfigurationError(f"field {name!r}: {msg}")

    if cfg.mode not in MODES:
        bad("mode", f"expected one of {MODES}, got {cfg.mode!r}")
    if cfg.k is not None:
        try:
            cfg.k = int(cfg.k)
        except (TypeError, ValueError):
            bad("k", f"not an integer: {cfg.k!r}")
    fixed = FIXED_K.get(cfg.function)
    if cfg.command == "compare":
        if cfg.function not in ("selector", "hamming"):
            bad("f", "compare supports 'selector' and 'hamming'")
    if cfg.command == "region":
        if cfg.mechanism not in ("rr", "gmps", "dp"):
            bad("mechanism", f"expected rr, gmps or dp, got {cfg.mechanism!r}")
        cfg.k = 1 if cfg.k is None else cfg.k
    if cfg.k is None:
        if fixed is not None:
            cfg.k = fixed
        elif cfg.lambdas is not None and len(cfg.lambdas) > 1:
            cfg.k = len(cfg.lambdas)
        else:
            bad("k", "required (or give one lambda per party)")
    if cfg.k < 1:
        bad("k", f"must be >= 1, got {cfg.k}")
    if fixed is not None and cfg.k != fixed:
        bad("k", f"function {cfg.function!r} needs k={fixed}, got {cfg.k}")
    if cfg.command != "compare":
        if cfg.lambdas is None and cfg.eps is None:
            bad("lambda", "give --lambda or --eps")
        if cfg.lambdas is not None and cfg.eps is not None:
            bad("eps", "give either --lambda or --eps, not both")
    if cfg.lambdas is not None:
        if len(cfg.lambdas) == 1:
            cfg.lambdas = cfg.lambdas * cfg.k
        if len(cfg.lambdas) != cfg.k:
            bad("lambda", f"expected 1 or {cfg.k} values, got {len(cfg.lambdas)}")
        if any(not math.isfinite(v) or v < 1 for v in cfg.lambdas):
            bad("lambda", "values must be finite and >= 1")
    if cfg.eps is not None and not cfg.eps:
        bad("eps", "grid is empty")
    try:
        cfg.samples = int(cfg.samples)
        cfg.seed = int(cfg.seed)
    except (TypeError, ValueError):
        bad("samples", "samples and seed must be integers")
    if cfg.command == "verify" and cfg.samples < 1:
        bad("samples", f"must be >= 1, got {cfg.samples}")
    if cfg.tol is not None:
        cfg.tol = float(cfg.tol)
        if not cfg.tol >= 0:
            bad("tol", "must be >= 0")
    if cfg.party is not None and not 0 <= int(cfg.party) < cfg.k:
        bad("party", f"must be in [0, {cfg.k})")
    if cfg.format not in ("csv", "json"):
        bad("format", "expected csv or json")


# -- commands ----------------------------------------------------------------

def _eps_cell(eps, budget: PrivacyBudget) -> str:
    if eps is not None:
        return _fmt(eps)
    return ";".join(_fmt(e) for e in budget.epsilons)


def cmd_accuracy(cfg: RunConfig) -> tuple[int, str]:
    W = weight_tensor(cfg.function, cfg.k, cfg.measure)
    lines = ["eps,accuracy"]
    for eps, budget in cfg.budgets():
        acc = optimal_accuracy(randomized_response(budget), W, cfg.mode, cfg.tolerance)
        lines.append(f"{_eps_cell(eps, budget)},{_fmt(acc)}")
    return EXIT_OK, "\n".join(lines) + "\n"


def cmd_certify(cfg: RunConfig) -> tuple[int, str]:
    W = weight_tensor(cfg.function, cfg.k, cfg.measure)
    budget = cfg.single_budget()
    certify = certify_average_optimality if cfg.mode == "average" else certify_worstcase_optimality
    cert = certify(W, budget)
    for note in cert.notes:
        print(f"note: {note}", file=sys.stderr)
    ok = cert.min_margin >= -cfg.tolerance
    if not ok:
        print(f"certificate failed: min corner margin {cert.min_margin!r}", file=sys.stderr)
    return (EXIT_OK if ok else EXIT_CHECK), json.dumps(cert.to_dict(), indent=2) + "\n"


def cmd_verify(cfg: RunConfig) -> tuple[int, str]:
    W = weight_tensor(cfg.function, cfg.k, cfg.measure)
    budget = cfg.single_budget()
    records = run_gap_experiment(budget, {cfg.function: W}, (cfg.mode,), cfg.samples, cfg.seed)
    min_gap = min(r.gap for r in records)
    ok = min_gap >= -cfg.tolerance
    print(f"{len(records)} samples, min gap {min_gap!r}: {'ok' if ok else 'VIOLATION'}",
          file=sys.stderr)
    return (EXIT_OK if ok else EXIT_CHECK), gap_log_csv(records)


def cmd_region(cfg: RunConfig) -> tuple[int, str]:
    budget = cfg.single_budget()
    if len(set(budget.lambdas)) != 1:
        raise ConfigurationError("field 'lambda': region takes a single lambda")
    lam = budget.lambdas[0]
    if cfg.mechanism == "dp":
        region = analysis.dp_region(lam)
    else:
        mech = analysis.rr_mechanism(lam) if cfg.mechanism == "rr" else analysis.gmps_and_mechanism(lam)
        region = analysis.tradeoff_region(mech)
        inside = analysis.region_contains(analysis.dp_region(lam), region, cfg.tolerance)
        print(f"contained in the {lam!r}-DP region: {inside}", file=sys.stderr)
    return EXIT_OK, region.to_csv()


def cmd_compare(cfg: RunConfig) -> tuple[int, str]:
    if cfg.function == "selector":
        interactive, k = multibit.selector_interactive_protocol, 3
        f, w = multibit.selector_function(), None
    else:
        interactive, k = multibit.hamming_interactive_protocol, 4
        f, w = multibit.hamming_function(), multibit.hamming_measure()
    if cfg.measure is not None or w is None:
        from .problems import resolve_measure
        w = resolve_measure(cfg.measure or "indicator", f)
    rows = multibit.compare_curves(interactive, multibit.rr_baseline(k), f, w, cfg.eps, cfg.mode)
    worst = min(a - b for _, a, b in rows)
    print(f"min(interactive - rr) = {worst!r}", file=sys.stderr)
    return EXIT_OK, multibit.curves_to_csv(rows)


def cmd_decision(cfg: RunConfig) -> tuple[int, str]:
    W = weight_tensor(cfg.function, cfg.k, cfg.measure)
    p = randomized_response(cfg.single_budget())
    party = None if cfg.party is None else int(cfg.party)
    if cfg.mode == "average":
        rule = optimal_average_decision(p, W, party)
    else:
        rule = optimal_worstcase_decision(p, W, party, cfg.tolerance)
    text = rule_to_json(rule) + "\n" if cfg.format == "json" else rule_to_csv(rule)
    return EXIT_OK, text


HANDLERS = {
    "accuracy": cmd_accuracy, "certify": cmd_certify, "verify": cmd_verify,
    "region": cmd_region, "compare": cmd_compare, "decision": cmd_decision,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privmpc", description="Optimal differentially private protocols for single-bit parties.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "accuracy": "accuracy of randomized response under the optimal decision rule",
        "certify": "LP dual certificate that randomized response is optimal",
        "verify": "compare randomized response against sampled feasible protocols",
        "region": "hypothesis-testing region vertices of a binary mechanism",
        "compare": "interactive multi-bit protocols versus randomized response",
        "decision": "emit the optimal decision rule for randomized response",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="JSON file with default values (flags override)")
        p.add_argument("--k", type=int)
        p.add_argument("--lambda", dest="lambdas", nargs="+", type=float,
                       help="one value (broadcast) or one per party")
        p.add_argument("--eps", help="epsilon grid, start:stop:num or comma list")
        p.add_argument("--f", dest="function",
                       help=f"{'|'.join(BUILTIN_FUNCTIONS)}, random:<labels>:<seed> or a JSON path")
        p.add_argument("--measure", help="indicator, hamming or a JSON path")
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--out", help="output path (default stdout)")
        if name == "region":
            p.add_argument("--mechanism", choices=("rr", "gmps", "dp"))
        if name == "decision":
            p.add_argument("--party", type=int, help="condition the rule on this party's own bit")
            p.add_argument("--format", choices=("csv", "json"))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, flags)
        code, text = HANDLERS[cfg.command](cfg)
    except (ConfigurationError, InputError, ScaleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SamplingError as exc:
        print(f"sampling error: {exc}", file=sys.stderr)
        return EXIT_SAMPLING
    if cfg.out:
        try:
            Path(cfg.out).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {cfg.out}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
