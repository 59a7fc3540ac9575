import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import and_w, rr, xor_w
from privmpc.core import AccuracyMeasure, FunctionSpec, build_weight_tensor, constant_function, \
    indicator_measure, random_function
from privmpc.errors import ConfigurationError, InputError, SamplingError, ScaleError
from privmpc.oracle import (MODES, Manifest, SampledProtocol, append_gap_log, brute_force_average_optimum,
                            brute_force_worstcase_deterministic, gap_log_csv, load_manifest,
                            manifest_from_dict, optimality_gap, run_gap_experiment, run_manifest,
                            sample_feasible_protocol)
from privmpc.protocol import PrivacyBudget, Protocol, randomized_response, uniform_protocol

budgets = st.lists(st.floats(1.0, 6.0), min_size=1, max_size=3).map(
    lambda l: PrivacyBudget(tuple(1.0 if v < 1.2 else v for v in l)))


def test_brute_force_examples():
    assert brute_force_average_optimum(rr(2, 2.0), xor_w(2)) == pytest.approx(5 / 9, abs=1e-15)
    W = build_weight_tensor(FunctionSpec(1, (0, 1), (0, 1)), indicator_measure((0, 1)))
    assert brute_force_average_optimum(rr(1, 3.0), W) == pytest.approx(0.75, abs=1e-15)
    Wc = build_weight_tensor(constant_function(2), indicator_measure((0, 1)))
    assert brute_force_average_optimum(rr(2, 2.0), Wc) == pytest.approx(1.0)
    # AND worst case: the best deterministic rule is strictly below the randomized optimum
    assert brute_force_worstcase_deterministic(rr(2, 2.0), and_w(2)) < 16 / 27 - 1e-3


def test_enumeration_budget():
    p = uniform_protocol(2, 24)
    with pytest.raises(ScaleError):
        brute_force_average_optimum(p, xor_w(2))
    with pytest.raises(ScaleError):
        brute_force_worstcase_deterministic(p, xor_w(2))


def test_corner_only_sample_is_rr():
    budget = PrivacyBudget((2.0, 3.0))
    sp = sample_feasible_protocol(budget, 4, seed=0)
    ref = randomized_response(budget)
    assert set(sp.protocol.transcripts) == set(ref.transcripts)
    for t in ref.transcripts:
        assert np.abs(sp.protocol.column(t) - ref.column(t)).max() <= 1e-12


def test_sample_k2_m6():
    budget = PrivacyBudget((2.0, 2.0))
    sp = sample_feasible_protocol(budget, 6, seed=1)
    assert sp.protocol.p.shape == (4, 6)
    assert sp.check(budget)


def test_all_degenerate_gives_uniform_columns():
    budget = PrivacyBudget.uniform(3, 1.0)
    for m in (1, 2, 5):
        sp = sample_feasible_protocol(budget, m, seed=m)
        assert np.allclose(sp.protocol.p, sp.protocol.p[0], atol=1e-15)
        assert sp.check(budget)


@settings(max_examples=40, deadline=None)
@given(budgets, st.integers(0, 6), st.integers(0, 2 ** 31))
def test_samples_are_feasible(budget, extra, seed):
    k_active = budget.k - len(budget.degenerate_parties)
    sp = sample_feasible_protocol(budget, (1 << k_active) + extra, seed)
    assert sp.check(budget)
    assert np.allclose(sp.protocol.p.sum(axis=1), 1.0, atol=1e-12)
    lam = np.array(budget.lambdas)
    assert np.all(sp.signatures >= 1 / lam - 1e-12) and np.all(sp.signatures <= lam + 1e-12)


def test_sampler_is_deterministic():
    budget = PrivacyBudget((1.3, 2.0, 3.5))
    a = sample_feasible_protocol(budget, 11, (5, 2))
    b = sample_feasible_protocol(budget, 11, (5, 2))
    assert np.array_equal(a.protocol.p, b.protocol.p)


def test_sampler_errors():
    with pytest.raises(InputError):
        sample_feasible_protocol(PrivacyBudget((2.0, 2.0)), 3, 0)
    # with a single allowed draw, some seeds must hit a rejection
    failures = 0
    for seed in range(50):
        try:
            sample_feasible_protocol(PrivacyBudget((2.0, 2.0)), 40, seed, max_rejections=1)
        except SamplingError:
            failures += 1
    assert failures > 0


def test_gap_examples():
    budget = PrivacyBudget((2.0, 2.0))
    assert optimality_gap(randomized_response(budget), xor_w(2), budget, "average") == 0.0
    gap = optimality_gap(uniform_protocol(2, 3), xor_w(2), budget, "average")
    assert gap == pytest.approx(5 / 9 - 1 / 2)


def test_gap_sampling_k2_xor():
    budget = PrivacyBudget((2.0, 2.0))
    records = run_gap_experiment(budget, {"xor": xor_w(2)}, ("average",), 1000, seed=11)
    assert len(records) == 1000
    assert min(r.gap for r in records) >= -1e-9


def test_experiment_is_prefix_stable():
    budget = PrivacyBudget((2.0, 3.0))
    long = run_gap_experiment(budget, {"and": and_w(2)}, MODES, 6, seed=4)
    short = run_gap_experiment(budget, {"and": and_w(2)}, MODES, 3, seed=4)
    assert long[:len(short)] == short


def test_manifest_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"k": 2, "lambdas": 2.0, "function": "xor", "mode": "worst-case",
                                "samples": 5, "seed": 3}))
    man = load_manifest(path)
    assert man.lambdas == (2.0, 2.0)
    records = run_manifest(man)
    log = tmp_path / "log.csv"
    append_gap_log(log, records)
    append_gap_log(log, records)
    lines = log.read_text().splitlines()
    assert lines[0].startswith("sample,m,function")
    assert len(lines) == 11
    assert gap_log_csv(records).splitlines()[1:] == lines[1:6]


def test_manifest_validation():
    with pytest.raises(ConfigurationError, match="samples"):
        manifest_from_dict({"k": 1, "lambdas": [2], "function": "xor", "samples": 0})
    with pytest.raises(ConfigurationError, match="mode"):
        manifest_from_dict({"k": 1, "lambdas": [2], "function": "xor", "mode": "best"})
    with pytest.raises(ConfigurationError, match="unknown"):
        manifest_from_dict({"k": 1, "lambdas": [2], "function": "xor", "colour": 1})
    with pytest.raises(ConfigurationError, match="lambdas"):
        manifest_from_dict({"k": 2, "lambdas": [2, 2, 2], "function": "xor"})
