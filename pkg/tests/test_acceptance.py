"""Acceptance gate: every end-to-end criterion at full size, one line each."""
from pathlib import Path

import pytest

from rbqkd.selftest import CHECKS, SIZES, check_rate_curves

FIGURE_CSV = Path(__file__).resolve().parents[1] / "figures" / "rates.csv"


def report(capsys, result):
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


# the rate-curve check also compares the published CSV, so it runs separately
PLAIN = [c for c in CHECKS if c is not check_rate_curves]


@pytest.mark.parametrize("check", PLAIN, ids=lambda c: c.__name__.removeprefix("check_"))
def test_criterion(check, capsys):
    report(capsys, check(SIZES["full"]))


def test_criterion_rate_curves_and_figure(tmp_path, capsys):
    fresh = tmp_path / "rates.csv"
    report(capsys, check_rate_curves(SIZES["full"], csv_path=fresh))
    assert FIGURE_CSV.exists(), "figures/rates.csv missing; regenerate with `rbqkd rates --out`"
    assert FIGURE_CSV.read_text() == fresh.read_text()
