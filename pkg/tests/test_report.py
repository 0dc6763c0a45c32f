import json

import numpy as np
import pytest

from tweetstudy.eventstudy import N_PERIODS, DropReport, EventPanel, EventWindow
from tweetstudy.miner import BinScheme, Predicate, condition_stats
from tweetstudy.report import CurveSeries, EmptyGroup, cumulative_curves, groups_by_bins, render
from tweetstudy.stats import format_matrix, ttest_matrix

from conftest import T0, make_tweet


def _panel(rows, excess=None):
    return EventPanel(EventWindow(str(i), "S", T0, 0, np.asarray(r, float),
                                  None if excess is None else np.asarray(excess[i], float))
                      for i, r in enumerate(rows))


def test_single_window_curve():
    r = np.linspace(-0.001, 0.002, N_PERIODS)
    (c,) = cumulative_curves(_panel([r]))
    assert c.label == "all:return" and c.n == 1 and c.sd is None
    assert np.array_equal(c.values, np.cumsum(r))
    assert c.points[0] == (1, float(r[0]))


def test_symmetric_windows_cancel():
    x = np.full(N_PERIODS, 0.001)
    ret, ex = cumulative_curves(_panel([x, -x], excess=[x, -x]))
    assert np.all(ret.values == 0) and np.all(ex.values == 0)
    assert ex.label == "all:excess"


def test_curve_length_checked():
    with pytest.raises(ValueError):
        CurveSeries("x", np.zeros(3))


def test_empty_panel_and_groups(tmp_path):
    with pytest.raises(EmptyGroup):
        cumulative_curves(_panel([]))
    written = render(tmp_path, panel=_panel([]))
    assert (tmp_path / "curves.txt").read_text() == "no event windows\n"
    assert (tmp_path / "summary.txt").read_text() == "windows\t0\n"
    assert tmp_path / "curves.txt" in written
    p = _panel([np.zeros(N_PERIODS), np.ones(N_PERIODS) * 1e-3])
    curves = cumulative_curves(p, {"a": ["0"], "none": ["zz"]})
    assert [c.label for c in curves] == ["a:return"]


def test_groups_by_bins():
    tweets = [make_tweet(str(i), statuses_count=i * 10) for i in range(11)]
    g = groups_by_bins(tweets, "statuses_count", BinScheme("statuses_count", 0, 100))
    assert list(g) == [f"statuses_count[{lo:g},{hi:g}]#{b}"
                       for b, (lo, hi) in enumerate([(0, 20), (20, 40), (40, 60), (60, 80), (80, 100)], 1)]
    assert g["statuses_count[80,100]#5"] == ["8", "9", "10"]


def test_render_pass_through_and_determinism(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.normal(0, 0.004, (60, N_PERIODS))
    rows[:, 1] += 0.003
    p = _panel(rows, excess=rows - 1e-4)
    m = ttest_matrix(p)
    st = [condition_stats((Predicate("language", "equals-category", "en"),), p,
                          np.ones(len(p), bool))]
    drops = DropReport(windows=60, with_excess=60)
    drops.counts["incomplete_window"] = 2
    kw = dict(panel=p, matrix=m, stats=st, drop_report=drops,
              backtest_summary={"trades": 3}, groups={"odd": [str(i) for i in range(1, 60, 2)]})
    render(tmp_path / "a", **kw)
    render(tmp_path / "b", **kw)
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    assert (tmp_path / "a" / "ttest_matrix.txt").read_text() == format_matrix(m)
    assert "***" in (tmp_path / "a" / "ttest_matrix.txt").read_text()
    assert json.loads((tmp_path / "a" / "drops.json").read_text())["incomplete_window"] == 2
    # printed values are the upstream values at the printed precision
    line = (tmp_path / "a" / "curves.txt").read_text().splitlines()[1].split("\t")
    assert line[2:] == [f"{v:.6f}" for v in p.cumret.mean(axis=0)]
    csv_rows = (tmp_path / "a" / "curves.csv").read_text().splitlines()
    assert csv_rows[0] == "label,n,period,value,sd" and len(csv_rows) == 1 + 2 * N_PERIODS
    render(tmp_path / "c", matrix="given table\n")
    assert (tmp_path / "c" / "ttest_matrix.txt").read_text() == "given table\n"
