import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from privmpc.errors import ConfigurationError, InputError
from privmpc.protocol import (PrivacyBudget, Protocol, check_dp, column_tensor, is_rank1_compatible,
                              outer_vector, protocol_from_csv, protocol_from_json, protocol_to_csv,
                              protocol_to_json, randomized_response, rank1_factorize,
                              uniform_protocol)

lambdas = st.lists(st.floats(1.0, 20.0), min_size=1, max_size=5)


def brute_rr_entry(x_bits, t_bits, lams):
    # direct product over parties, written independently of the vectorized builder
    out = 1.0
    for xi, ti, lam in zip(x_bits, t_bits, lams):
        out *= lam / (1 + lam) if xi == ti else 1 / (1 + lam)
    return out


def test_rr_column_00_at_lambda_2():
    p = randomized_response(PrivacyBudget((2.0, 2.0)))
    assert p.transcripts == ("00", "01", "10", "11")
    assert np.allclose(p.column("00"), [4 / 9, 2 / 9, 2 / 9, 1 / 9], atol=1e-15)


def test_rr_at_lambda_1_is_a_coin():
    p = randomized_response(PrivacyBudget((1.0,)))
    assert np.array_equal(p.p, np.full((2, 2), 0.5))


@given(st.floats(1.0, 50.0))
def test_rr_diagonal(lam):
    p = randomized_response(PrivacyBudget.uniform(2, lam))
    assert np.allclose(np.diag(p.p), lam ** 2 / (1 + lam) ** 2, rtol=1e-13)


@given(lambdas)
def test_rr_matches_direct_product(lams):
    p = randomized_response(PrivacyBudget(tuple(lams)))
    k = len(lams)
    for x in range(1 << k):
        xb = [int(c) for c in format(x, f"0{k}b")]
        for j, t in enumerate(p.transcripts):
            assert math.isclose(p.p[x, j], brute_rr_entry(xb, [int(c) for c in t], lams),
                                rel_tol=1e-13)


@given(lambdas)
def test_rr_dp_is_tight(lams):
    budget = PrivacyBudget(tuple(lams))
    report = check_dp(randomized_response(budget), budget)
    assert report.ok
    assert np.allclose(report.ratios, lams, rtol=1e-12)


@given(lambdas)
def test_rr_columns_are_rank1_with_corner_signatures(lams):
    budget = PrivacyBudget(tuple(lams))
    p = randomized_response(budget)
    for t in p.transcripts:
        fit = rank1_factorize(column_tensor(p, t))
        assert fit
        for si, lam in zip(fit.s, lams):
            assert math.isclose(si, lam, rel_tol=1e-12) or math.isclose(si, 1 / lam, rel_tol=1e-12)


def test_uniform_protocol_passes_dp():
    p = uniform_protocol(3, 5)
    report = check_dp(p, PrivacyBudget.uniform(3, 1.0))
    assert report.ok and report.ratios == (1.0, 1.0, 1.0)


def test_identity_release_fails_dp():
    p = Protocol(2, ("00", "01", "10", "11"), np.eye(4))
    report = check_dp(p, PrivacyBudget.uniform(2, 1e6))
    assert not report.ok
    assert report.ratios == (math.inf, math.inf)


def test_zero_over_zero_counts_as_one():
    # transcript "b" is never emitted
    p = Protocol(1, ("a", "b"), [[1.0, 0.0], [1.0, 0.0]])
    assert check_dp(p, PrivacyBudget((1.0,))).ok


def test_budget_validation():
    with pytest.raises(ConfigurationError):
        PrivacyBudget(())
    with pytest.raises(ConfigurationError):
        PrivacyBudget((0.5,))
    b = PrivacyBudget.from_epsilons((0.0, math.log(3)))
    assert b.lambdas[0] == 1.0 and math.isclose(b.lambdas[1], 3.0)
    assert b.degenerate_parties == (0,)


def test_protocol_validation():
    with pytest.raises(ConfigurationError):
        Protocol(1, ("a", "b"), [[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ConfigurationError):
        Protocol(1, ("a", "a"), [[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(ConfigurationError):
        Protocol(1, ("a", "b"), [[1.5, -0.5], [0.5, 0.5]])
    with pytest.raises(ConfigurationError):
        Protocol(2, ("a",), [[1.0], [1.0]])


def test_column_tensor():
    p = randomized_response(PrivacyBudget((2.0, 2.0)))
    assert np.allclose(column_tensor(p, "00"), [[4 / 9, 2 / 9], [2 / 9, 1 / 9]])
    q = uniform_protocol(1, 3)
    assert np.array_equal(column_tensor(q, "t1"), q.column("t1"))
    r = randomized_response(PrivacyBudget.uniform(3, 1.0))
    assert np.allclose(column_tensor(r, "000"), 1 / 8)
    with pytest.raises(KeyError):
        column_tensor(p, "22")


def test_rank1_examples():
    p = randomized_response(PrivacyBudget((2.0, 2.0)))
    fit = rank1_factorize(column_tensor(p, "00"))
    assert math.isclose(fit.c, 4 / 9) and np.allclose(fit.s, (0.5, 0.5))
    fit = rank1_factorize(np.full((2, 2), 0.25))
    assert fit.c == 0.25 and fit.s == (1.0, 1.0)
    assert not rank1_factorize(np.array([[0.5, 0.0], [0.0, 0.5]]))


def test_rank1_degenerate_and_invalid():
    fit = rank1_factorize(np.zeros((2, 2)))
    assert not fit and fit.degenerate
    fit = rank1_factorize(np.array([[0.0, 0.0], [0.3, 0.0]]))
    assert not fit and not fit.degenerate
    with pytest.raises(InputError):
        rank1_factorize(np.array([[-0.1, 0.0], [0.0, 0.0]]))


@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=6), st.floats(1e-3, 10.0))
def test_rank1_recovers_factors(s, c):
    k = len(s)
    t = (c * outer_vector(s)).reshape((2,) * k)
    fit = rank1_factorize(t)
    assert fit
    assert math.isclose(fit.c, c, rel_tol=1e-12)
    assert np.allclose(fit.s, s, rtol=1e-12)


@settings(max_examples=30)
@given(lambdas, st.randoms(use_true_random=False))
def test_permutation_keeps_stochasticity(lams, rnd):
    p = randomized_response(PrivacyBudget(tuple(lams)))
    order = list(range(p.n_transcripts))
    rnd.shuffle(order)
    q = p.permuted(order)
    assert np.allclose(q.p.sum(axis=1), 1.0, atol=1e-12)
    assert is_rank1_compatible(q)
    assert np.array_equal(q.column(p.transcripts[order[0]]), p.p[:, order[0]])


@given(lambdas)
def test_serialization_is_bit_exact(lams):
    p = randomized_response(PrivacyBudget(tuple(lams)))
    for q in (protocol_from_csv(protocol_to_csv(p)), protocol_from_json(protocol_to_json(p))):
        assert q.transcripts == p.transcripts
        assert np.array_equal(q.p, p.p)


def test_csv_layout_and_errors():
    text = protocol_to_csv(randomized_response(PrivacyBudget((2.0,))))
    assert text.splitlines()[0] == "input,0,1"
    assert text.splitlines()[1] == "0,0.6666666666666666,0.3333333333333333"
    with pytest.raises(ConfigurationError):
        protocol_from_csv("input,a\n1,1.0\n0,1.0\n")
    with pytest.raises(ConfigurationError):
        protocol_from_csv("input,a\n0,zz\n1,1.0\n")
