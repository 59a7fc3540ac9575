import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import and_w, rr, xor_w
from privmpc.core import (AccuracyMeasure, FunctionSpec, build_weight_tensor, constant_function,
                          indicator_measure, random_function)
from privmpc.decision import (DecisionRule, acc_average, acc_worstcase, optimal_accuracy,
                              optimal_average_decision, optimal_worstcase_decision,
                              optimal_worstcase_value, rule_from_dict, rule_to_csv, rule_to_dict,
                              rule_to_json)
from privmpc.errors import ConfigurationError
from privmpc.oracle import brute_force_average_optimum, brute_force_worstcase_deterministic
from privmpc.protocol import PrivacyBudget, Protocol, randomized_response, uniform_protocol


def xor_rule(p):
    choice = [sum(map(int, t)) % 2 for t in p.transcripts]
    return DecisionRule.deterministic(p.transcripts, (0, 1), choice)


def single_label(k, value=1.0):
    f = constant_function(k, "c", labels=("c",))
    return build_weight_tensor(f, AccuracyMeasure(("c",), [[value]]))


def test_xor_rule_accuracy():
    p = rr(2, 2.0)
    assert abs(acc_average(p, xor_rule(p), xor_w(2)).value - 5 / 9) < 1e-15
    rep = acc_worstcase(p, xor_rule(p), xor_w(2))
    assert abs(rep.value - 5 / 9) < 1e-15
    assert np.allclose(rep.per_input, 5 / 9)


def test_single_label_is_perfect():
    p = rr(2, 3.0)
    W = single_label(2)
    q = DecisionRule(p.transcripts, ("c",), np.ones((4, 1)))
    assert acc_average(p, q, W).value == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(acc_worstcase(p, q, W).per_input, 1.0)


def test_identity_k1():
    p = rr(1, 3.0)
    W = build_weight_tensor(FunctionSpec(1, (0, 1), (0, 1)), indicator_measure((0, 1)))
    q = DecisionRule.deterministic(p.transcripts, (0, 1), [0, 1])
    assert acc_average(p, q, W).value == pytest.approx(0.75, abs=1e-15)


def test_optimal_average_xor_is_xor():
    p = rr(2, 2.0)
    rule = optimal_average_decision(p, xor_w(2))
    assert rule.choices().tolist() == [0, 1, 1, 0]


def test_uniform_protocol_ties_go_to_label_zero():
    rule = optimal_average_decision(uniform_protocol(2, 3), xor_w(2))
    assert rule.choices().tolist() == [0, 0, 0]


def test_optimal_average_and():
    # At lambda=2 the transcript 11 still favours label 0 (score 5/9 against 4/9), so
    # the optimal rule is constant; the AND of received bits only wins for lambda > 1 + sqrt(2).
    p = rr(2, 2.0)
    assert optimal_average_decision(p, and_w(2)).choices().tolist() == [0, 0, 0, 0]
    assert optimal_accuracy(p, and_w(2), "average") == pytest.approx(0.75, abs=1e-15)
    q = rr(2, 3.0)
    assert optimal_average_decision(q, and_w(2)).choices().tolist() == [0, 0, 0, 1]


def test_optimal_worstcase_and():
    p = rr(2, 2.0)
    rule = optimal_worstcase_decision(p, and_w(2))
    assert acc_worstcase(p, rule, and_w(2)).value == pytest.approx(16 / 27, abs=1e-12)
    assert optimal_worstcase_value(p, and_w(2)) == pytest.approx(16 / 27, abs=1e-12)


@pytest.mark.parametrize("lam", [1.0, 1.7, 2.0, 4.0])
def test_optimal_worstcase_xor(lam):
    p = rr(2, lam)
    rule = optimal_worstcase_decision(p, xor_w(2))
    value = (lam ** 2 + 1) / (1 + lam) ** 2
    assert optimal_worstcase_value(p, xor_w(2)) == pytest.approx(value, abs=1e-12)
    if lam > 1:
        assert rule.is_deterministic
        assert rule.choices().tolist() == [0, 1, 1, 0]


def test_single_label_worstcase():
    f = FunctionSpec(2, ("c",), ("c",) * 4)
    W = build_weight_tensor(f, AccuracyMeasure(("c",), [[0.7]]))
    assert optimal_worstcase_value(rr(2, 2.0), W) == pytest.approx(0.7, abs=1e-12)


def small_instance(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    n = int(rng.integers(1, 4))
    f = random_function(k, n, rng)
    w = AccuracyMeasure(f.labels, rng.uniform(-1, 2, (n, n)))
    nt = int(rng.integers(1, 5))
    p = rng.uniform(size=(1 << k, nt))
    p /= p.sum(axis=1, keepdims=True)
    return Protocol(k, tuple(f"t{j}" for j in range(nt)), p), build_weight_tensor(f, w), rng


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_average_matches_exhaustive_search(seed):
    p, W, _ = small_instance(seed)
    best = optimal_accuracy(p, W, "average")
    assert abs(best - brute_force_average_optimum(p, W)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_worstcase_dominates_deterministic_and_random_rules(seed):
    p, W, rng = small_instance(seed)
    value = optimal_worstcase_value(p, W)
    assert value >= brute_force_worstcase_deterministic(p, W) - 1e-9
    q = rng.dirichlet(np.ones(W.n_labels), size=(1000, p.n_transcripts))
    e = np.einsum("xt,rty,xy->rx", p.p, q, W.values)
    assert value >= e.min(axis=1).max() - 1e-9


def test_per_party_rule_recomputes_inner_sum():
    p = rr(3, 2.5)
    W = xor_w(3)
    for party in range(3):
        rule = optimal_average_decision(p, W, conditioning=party)
        bits = np.array([[int(c) for c in format(x, "03b")] for x in range(8)])
        for b in (0, 1):
            mask = bits[:, party] == b
            scores = np.array([[sum(p.p[x, t] * W.values[x, y] for x in np.nonzero(mask)[0])
                                for y in range(2)] for t in range(p.n_transcripts)])
            assert np.array_equal(rule.q[b].argmax(axis=1), scores.argmax(axis=1))
        # knowing one bit turns the XOR of the other published bits into a better guess
        assert acc_average(p, rule, W).value > acc_average(p, xor_rule(p), W).value


def test_per_party_worstcase_rule_shape():
    p = rr(2, 2.0)
    rule = optimal_worstcase_decision(p, and_w(2), conditioning=1)
    assert rule.q.shape == (2, 4, 2)
    assert acc_worstcase(p, rule, and_w(2)).value >= 16 / 27 - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(-5, 5), st.floats(0.1, 10))
def test_argmax_invariant_under_affine_payoff(seed, shift, scale):
    p, W, _ = small_instance(seed)
    base = optimal_average_decision(p, W).choices()
    W2 = type(W)(W.k, W.labels, W.values * scale + shift)
    scores = p.p.T @ W.values
    top = np.sort(scores, axis=1)
    # skip near-ties, where round-off may legitimately pick another label
    if top.shape[1] > 1 and np.min(top[:, -1] - top[:, -2]) < 1e-9:
        return
    assert np.array_equal(optimal_average_decision(p, W2).choices(), base)


def test_shape_errors():
    p = rr(2, 2.0)
    with pytest.raises(ConfigurationError):
        acc_average(p, xor_rule(rr(1, 2.0)), xor_w(2))
    with pytest.raises(ConfigurationError):
        acc_average(p, xor_rule(p), xor_w(3))
    with pytest.raises(ConfigurationError):
        DecisionRule(("a",), (0, 1), [[0.5, 0.6]])
    with pytest.raises(ConfigurationError):
        optimal_accuracy(p, xor_w(2), "median")


def test_rule_serialization():
    p = rr(2, 2.0)
    rule = optimal_worstcase_decision(p, and_w(2))
    back = rule_from_dict(json.loads(rule_to_json(rule)))
    assert np.array_equal(back.q, rule.q) and back.transcripts == rule.transcripts
    lines = rule_to_csv(rule).splitlines()
    assert lines[0] == "transcript,0,1" and lines[1].startswith("00,")
    party = optimal_average_decision(p, xor_w(2), conditioning=0)
    assert rule_to_csv(party).splitlines()[0] == "own_bit,transcript,0,1"
    assert rule_from_dict(rule_to_dict(party)).party == 0
    with pytest.raises(ConfigurationError):
        rule_from_dict({"labels": [0, 1]})
