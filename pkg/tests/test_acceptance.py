"""Acceptance gate: every criterion at its pinned tolerance.

Each criterion prints one PASS/FAIL line; conftest.py repeats the lines in
the terminal summary.
"""
import pytest

from opstar.acceptance import CRITERIA

RESULTS = []


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda c: c.__name__)
def test_criterion(criterion):
    result = criterion()
    RESULTS.append(result)
    print(result.line())
    assert result.passed, result.detail
