"""Name-based lookup of functions and accuracy measures for the CLI and experiment manifests.

Function sources: ``xor``, ``and``, ``selector``, ``hamming``, ``random:<labels>:<seed>``
or the path of a JSON problem document.  Measure sources: ``indicator``,
``hamming`` (distance payoff ``2 - |d - d'|``) or a JSON path holding ``labels``
and ``w``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import (AccuracyMeasure, FunctionSpec, WeightTensor, and_function, build_weight_tensor,
                   indicator_measure, load_problem, random_function, xor_function)
from .errors import ConfigurationError
from .multibit import hamming_function, hamming_measure, selector_function

BUILTIN_FUNCTIONS = ("xor", "and", "selector", "hamming")
FIXED_K = {"selector": 3, "hamming": 4}


def resolve_function(source: str, k: int | None) -> tuple[FunctionSpec, AccuracyMeasure | None]:
    """Return the function and, for JSON documents, the measure they carry."""
    name = str(source)
    if name in FIXED_K:
        if k is not None and k != FIXED_K[name]:
            raise ConfigurationError(f"function {name!r} needs k={FIXED_K[name]}, got k={k}")
        return (selector_function() if name == "selector" else hamming_function()), None
    if name in ("xor", "and"):
        if k is None:
            raise ConfigurationError(f"function {name!r} needs k")
        return (xor_function(k) if name == "xor" else and_function(k)), None
    if name.startswith("random:"):
        parts = name.split(":")
        if len(parts) != 3 or k is None:
            raise ConfigurationError("random functions are written random:<labels>:<seed> and need k")
        try:
            n_labels, seed = int(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigurationError(f"bad random function spec {name!r}") from None
        if n_labels < 1:
            raise ConfigurationError("random function needs at least one label")
        return random_function(k, n_labels, np.random.default_rng(seed)), None
    path = Path(name)
    if not path.exists():
        raise ConfigurationError(
            f"unknown function {name!r}: not one of {BUILTIN_FUNCTIONS} and no such file")
    try:
        f, w = load_problem(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if k is not None and f.k != k:
        raise ConfigurationError(f"{path}: problem has k={f.k}, config has k={k}")
    return f, w


def default_measure(function_source: str) -> str:
    return "hamming" if function_source == "hamming" else "indicator"


def resolve_measure(source: str | None, f: FunctionSpec,
                    carried: AccuracyMeasure | None = None) -> AccuracyMeasure:
    if source is None:
        return carried if carried is not None else indicator_measure(f.labels)
    if source == "indicator":
        return indicator_measure(f.labels)
    if source == "hamming":
        return hamming_measure()
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"unknown measure {source!r}: no such file") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    if "w" not in doc:
        raise ConfigurationError(f"{path}: missing field 'w'")
    return AccuracyMeasure(tuple(doc.get("labels", f.labels)), doc["w"])


def weight_tensor(function_source: str, k: int | None,
                  measure_source: str | None = None) -> WeightTensor:
    f, carried = resolve_function(function_source, k)
    if measure_source is None and carried is None:
        measure_source = default_measure(function_source)
    return build_weight_tensor(f, resolve_measure(measure_source, f, carried))
