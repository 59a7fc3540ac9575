import math

import numpy as np
import pytest

from privmpc.core import and_function, build_weight_tensor, indicator_measure, xor_function
from privmpc.protocol import PrivacyBudget, randomized_response

# Filled by test_acceptance.py: criterion number -> (passed, detail)
ACCEPTANCE_RESULTS: dict = {}


def xor_w(k):
    return build_weight_tensor(xor_function(k), indicator_measure((0, 1)))


def and_w(k):
    return build_weight_tensor(and_function(k), indicator_measure((0, 1)))


def rr(k, lam):
    lams = (lam,) * k if np.isscalar(lam) else tuple(lam)
    return randomized_response(PrivacyBudget(lams))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
