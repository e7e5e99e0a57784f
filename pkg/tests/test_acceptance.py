"""Acceptance gate: runs every release criterion and prints its verdict.

Each check is an independent end-to-end scenario defined in
``nvpair.validation``; a run prints one PASS/FAIL line per criterion so the
suite output doubles as the acceptance report.
"""

import pytest

from nvpair.validation import ALL_CHECKS


@pytest.mark.parametrize(("label", "check"), ALL_CHECKS,
                         ids=[label for label, _ in ALL_CHECKS])
def test_acceptance(label, check, capsys):
    result = check()
    with capsys.disabled():
        status = "PASS" if result.passed else "FAIL"
        print(f"\n{label} {status} {result.name}: {result.detail}")
    assert result.passed, f"{label} {result.name}: {result.detail}"
