import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import paired_t as oracle_ttest, two_tailed_p as oracle_two_tailed
from tweetstudy.stats import (
    LengthMismatch, PeriodMatrix, TooFewPairs, betainc, format_long, format_matrix,
    paired_ttest, stars, t_cdf, t_sf2, ttest_matrix, write_matrix,
)


def test_reference_pair():
    res = paired_ttest([1, 2, 3, 4, 5], [2, 2, 4, 4, 6])
    t, p = oracle_ttest([1, 2, 3, 4, 5], [2, 2, 4, 4, 6])
    assert res.t_statistic == pytest.approx(t, abs=1e-12)
    assert abs(res.p_value - p) < 1e-8
    assert res.degrees_of_freedom == 4 and res.mean_difference == pytest.approx(-0.6)


def test_degenerate_cases():
    assert paired_ttest([1, 2, 3], [1, 2, 3]).p_value == 1.0
    r = paired_ttest([2, 3, 4, 5], [1, 2, 3, 4])
    assert r.p_value == 0.0 and r.mean_difference == 1.0 and r.t_statistic == math.inf
    with pytest.raises(LengthMismatch):
        paired_ttest([1, 2], [1, 2, 3])
    with pytest.raises(TooFewPairs):
        paired_ttest([1], [2])


@pytest.mark.parametrize("seed", range(5))
def test_against_quadrature(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        n = int(rng.integers(2, 201))
        a = rng.normal(0, 1, n)
        b = a + rng.normal(rng.normal(0, 0.3), 1, n)
        res = paired_ttest(a, b)
        t, p = oracle_ttest(a, b)
        assert abs(res.p_value - p) < 1e-8


@settings(max_examples=200, deadline=None)
@given(st.floats(-40, 40), st.integers(1, 400))
def test_tail_probability(t, df):
    p = t_sf2(t, df)
    assert 0.0 <= p <= 1.0
    assert abs(p - oracle_two_tailed(t, df)) < 1e-9
    assert t_cdf(t, df) + t_cdf(-t, df) == pytest.approx(1.0, abs=1e-12)


def test_betainc_edges():
    assert betainc(2, 3, 0.0) == 0.0 and betainc(2, 3, 1.0) == 1.0
    assert betainc(1, 1, 0.3) == pytest.approx(0.3)
    assert betainc(2, 3, 0.4) == pytest.approx(1 - betainc(3, 2, 0.6), abs=1e-14)
    with pytest.raises(ValueError):
        betainc(1, 1, 1.5)


def test_stars_half_open():
    assert stars(0.05) == "" and stars(0.0499) == "*"
    assert stars(0.001) == "*" and stars(0.000999) == "**"
    assert stars(0.0001) == "**" and stars(0.0000999) == "***"
    assert stars(None) == "" and stars(float("nan")) == ""


def test_matrix_constant_panel():
    r = np.tile(np.arange(15) * 1e-3, (10, 1))
    m = ttest_matrix(np.zeros((10, 15)))
    assert np.all(m.p[np.tril_indices(15, -1)] == 1.0)
    assert "*" not in format_matrix(m).split("\n\n")[0]
    # constant but different per period: every difference is exact, p = 0
    m = ttest_matrix(r)
    assert m.pvalue(2, 1) == 0.0 and m.star(1, 2) == "***"


def test_matrix_injected_period(rng):
    r = rng.normal(0, 0.004, (200, 15))
    r[:, 1] += 0.002
    m = ttest_matrix(r)
    for j in range(1, 16):
        if j != 2:
            assert m.pvalue(2, j) < 0.05
            t, p = oracle_ttest(r[:, 1], r[:, j - 1])
            assert abs(m.pvalue(2, j) - p) < 1e-8
    assert m.mean[1] == pytest.approx(r[:, 1].mean())
    with pytest.raises(ValueError):
        m.pvalue(3, 3)


def test_matrix_symmetry_property(rng):
    r = rng.normal(0, 1, (30, 15))
    m = ttest_matrix(r)
    for i in range(1, 16):
        for j in range(1, i):
            assert m.pvalue(i, j) == m.pvalue(j, i)
            assert m.pvalue(i, j) == paired_ttest(r[:, i - 1], r[:, j - 1]).p_value


def test_table_layout(tmp_path, rng):
    m = ttest_matrix(rng.normal(0, 0.004, (50, 15)))
    text = format_matrix(m)
    lines = text.splitlines()
    assert lines[0].split("\t") == ["ROI"] + [f"t{k}" for k in range(1, 16)]
    assert lines[1] == "t1\t-"
    assert lines[15].split("\t")[-1] == "-" and len(lines[15].split("\t")) == 16
    assert lines[16].startswith("Mean\t") and lines[17].startswith("SD\t")
    assert "* <0.05 , ** <0.001 , *** <0.0001" in lines[-1]
    assert not any(c.startswith("0.") for c in lines[16].split("\t"))
    table, long = write_matrix(m, tmp_path / "m.txt")
    assert open(table).read() == text
    assert open(long).read() == format_long(m)
    assert len(open(long).read().splitlines()) == 1 + 105


def test_period_matrix_from_panel_like():
    class P:
        returns = np.ones((3, 15))
    assert isinstance(ttest_matrix(P()), PeriodMatrix)
    with pytest.raises(ValueError):
        ttest_matrix(np.zeros((0, 15)))
