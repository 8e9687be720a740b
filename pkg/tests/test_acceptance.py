"""Runs every acceptance criterion at its stated tolerance.

One PASS/FAIL line per criterion is printed (visible with ``pytest -s`` and
in the terminal summary below).
"""

import pytest

from gp_mass.acceptance import CRITERIA, format_row, make_context, run_criterion

_rows = []


@pytest.fixture(scope="module")
def ctx():
    return make_context()


@pytest.mark.slow
@pytest.mark.parametrize("cid", list(CRITERIA) + ["D"])
def test_criterion(cid, ctx):
    res = run_criterion(cid, ctx)
    line = format_row(res)
    _rows.append(line)
    print(line)
    assert res.passed, line

