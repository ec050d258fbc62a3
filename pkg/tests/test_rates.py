import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import entropy

from rbqkd.rates import (
    CSV_HEADER,
    UNBOUNDED,
    RatePoint,
    base_rate,
    base_threshold,
    binary_entropy,
    key_rate,
    key_threshold,
    rate_curve,
    total_key_ratio,
    write_rate_csv,
)


def oracle_h(x):
    return float(entropy([x, 1 - x], base=2))


# frozen from the scipy.stats.entropy oracle
RK_005 = 0.4272060857680876
RB_005 = 0.5310044064107189
RB_010 = 0.2780719051126377
LK_005 = 0.45544786732283216


class TestBinaryEntropy:
    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    def test_near_key_threshold(self):
        assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)

    @given(st.floats(0, 1))
    def test_matches_oracle(self, x):
        assert binary_entropy(x) == pytest.approx(oracle_h(x), abs=1e-12)

    @given(st.floats(0, 1))
    def test_symmetric(self, x):
        assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)

    def test_concave_on_grid(self):
        xs = np.linspace(0, 1, 401)
        for a, b in zip(xs[:-2], xs[2:]):
            mid = binary_entropy((a + b) / 2)
            assert mid >= (binary_entropy(a) + binary_entropy(b)) / 2 - 1e-12

    @pytest.mark.parametrize("x", [-1e-9, 1.0001, math.nan])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            binary_entropy(x)


class TestKeyAndBaseRate:
    def test_key_rate_values(self):
        assert key_rate(0.0) == 1.0
        assert key_rate(0.05) == pytest.approx(RK_005, abs=1e-12)
        assert key_rate(0.5) == -1.0

    def test_base_rate_values(self):
        assert base_rate(0.0) == 1.0
        assert base_rate(0.25) == 0.0
        assert base_rate(0.1) == pytest.approx(RB_010, abs=1e-12)
        assert base_rate(0.05) == pytest.approx(RB_005, abs=1e-12)

    def test_base_rate_out_of_range_flag(self):
        assert base_rate(0.3, return_flag=True) == (0.0, False)
        assert base_rate(0.2, return_flag=True)[1] is True

    @pytest.mark.parametrize("fn", [key_rate, base_rate])
    @pytest.mark.parametrize("e", [-0.1, 0.6])
    def test_domain(self, fn, e):
        with pytest.raises(ValueError):
            fn(e)

    def test_base_dominates_key(self):
        for e in np.linspace(0, 0.25, 251):
            assert base_rate(e) - key_rate(e) == pytest.approx(
                2 * binary_entropy(e) - binary_entropy(2 * e), abs=1e-12
            )
            assert base_rate(e) >= key_rate(e) - 1e-12


class TestTotalKeyRatio:
    def test_zero_error_unbounded(self):
        assert total_key_ratio(0.0) is UNBOUNDED

    def test_value(self):
        assert total_key_ratio(0.05) == pytest.approx(LK_005, abs=1e-12)
        assert total_key_ratio(0.05) == pytest.approx(0.4554, abs=1e-4)

    @pytest.mark.parametrize("e", [0.1101, 0.15, 0.25])
    def test_clamped_above_threshold(self, e):
        assert total_key_ratio(e) == 0.0

    def test_at_threshold(self):
        assert total_key_ratio(key_threshold()) == pytest.approx(0.0, abs=1e-8)
        # 0.11 is just below the root, so a sliver of key survives
        assert 0 < total_key_ratio(0.11) < 1e-3

    def test_reuse_never_loses(self):
        for e in np.linspace(1e-4, key_threshold() - 1e-6, 200):
            assert total_key_ratio(e) >= key_rate(e) / 2

    def test_domain(self):
        with pytest.raises(ValueError):
            total_key_ratio(0.26)


class TestThresholds:
    def test_key_threshold(self):
        t = key_threshold()
        assert 0.1099 < t < 0.1101
        assert abs(key_rate(t)) <= 1e-8

    def test_key_threshold_oracle(self):
        # independent: dense grid sign change of 1 - 2H using scipy's entropy
        grid = np.linspace(0.109, 0.111, 20001)
        vals = np.array([1 - 2 * oracle_h(x) for x in grid])
        idx = np.nonzero(np.diff(np.sign(vals)))[0][0]
        assert key_threshold() == pytest.approx(grid[idx], abs=2e-7)

    def test_base_threshold(self):
        assert base_threshold() == 0.25


class TestRateCurve:
    def test_two_point_grid(self):
        pts = rate_curve(0, 0.25, 0.25)
        assert [p.e for p in pts] == [0.0, 0.25]
        assert pts[0].lk_over_2n is UNBOUNDED
        assert pts[1].r_b == 0.0

    def test_full_grid(self):
        pts = rate_curve(0, 0.25, 0.005)
        assert len(pts) == 51
        rk = np.array([p.r_k for p in pts])
        rb = np.array([p.r_b for p in pts])
        assert np.all(np.diff(rk) < 0) and np.all(np.diff(rb) < 0)
        assert np.all(rb >= rk)
        for p in pts:
            assert p == RatePoint(p.e, key_rate(p.e), base_rate(p.e), total_key_ratio(p.e))

    @pytest.mark.parametrize("args", [(0.1, 0.1, 0.01), (-0.1, 0.2, 0.01), (0, 0.3, 0.01), (0, 0.2, 0), (0, 0.2, -1)])
    def test_bad_grid(self, args):
        with pytest.raises(ValueError):
            rate_curve(*args)

    def test_csv(self, tmp_path):
        path = tmp_path / "r.csv"
        text = write_rate_csv(rate_curve(0, 0.25, 0.05), path)
        assert path.read_text() == text
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER) == "e,R_k,R_b,Lk_over_2n"
        assert lines[1] == "0,1,1,inf"
        assert lines[-1].startswith("0.25,") and lines[-1].endswith(",0,0")
        assert lines[2] == "0.05,0.427206,0.531004,0.455448"
