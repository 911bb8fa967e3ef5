"""The thirteen acceptance criteria at their stated tolerances.

Each case prints one PASS/FAIL line (run with -s to see them inline; they are
also collected in the terminal summary).
"""

import pytest

from hylo.acceptance import CRITERIA, run_criterion

LINES = []


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"c{n:02d}-{CRITERIA[n][0].replace(' ', '_')}")
def test_criterion(number):
    res = run_criterion(number)
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.passed, f"{line}: {res.details}"
    assert res.seconds < res.budget, f"{line}: over the runtime budget"


