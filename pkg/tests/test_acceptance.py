"""One test per acceptance criterion; each prints a single pass/fail line."""

import time

import pytest

from ispsim.acceptance import CRITERIA, format_result

TIME_LIMIT_S = 30.0


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    start = time.perf_counter()
    result = CRITERIA[number]()
    elapsed = time.perf_counter() - start
    with capsys.disabled():
        print(f"\n{format_result(result)} [{elapsed:.1f} s]")
    assert result.number == number
    assert result.passed, format_result(result)
    assert elapsed < TIME_LIMIT_S
