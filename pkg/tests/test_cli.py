import json
import subprocess
import sys

import numpy as np
import pytest

from tweetstudy import cli, pipeline, synthetic
from tweetstudy.eventstudy import build_panel, read_panel
from tweetstudy.ingest import ingest_dirs, load_store, parse_candles, parse_tweets, save_store
from tweetstudy.strategy import read_datasheet
from tweetstudy.textlab import tokenize


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    corpus = synthetic.generate(root / "raw", seed=5, n_symbols=4, n_bars=3000, n_tweets=280)
    return root, corpus


def _run(*args):
    assert cli.main([str(a) for a in args]) == 0


def test_synthetic_layout(small):
    root, c = small
    assert len(list((root / "raw" / "candles").glob("*.csv"))) == 4
    tweets = parse_tweets(root / "raw" / "tweets" / "tweets.jsonl")
    assert len(tweets) == c.n_tweets == 280
    planted = set(c.planted_ids)
    for t in tweets:
        assert ("listing" in tokenize(t.text)) == (t.tweet_id in planted)
        if t.tweet_id in planted:
            assert not t.is_retweet and not t.is_quote
    s = parse_candles(root / "raw" / "candles" / "C00BTC.csv", "C00BTC")
    assert np.all(np.diff(s.open_time) >= 60_000)


def test_synthetic_drift_only_changes_planted_windows(tmp_path):
    a = synthetic.generate(tmp_path / "a", seed=1, n_symbols=1, n_bars=400, n_tweets=5,
                           gaps_per_symbol=0, planted_share=1.0, retweet_share=0.0)
    synthetic.generate(tmp_path / "b", seed=1, drift_scale=0.0, n_symbols=1, n_bars=400,
                       n_tweets=5, gaps_per_symbol=0, planted_share=1.0, retweet_share=0.0)
    sa = ingest_dirs(tmp_path / "a" / "candles", tmp_path / "a" / "tweets")
    sb = ingest_dirs(tmp_path / "b" / "candles", tmp_path / "b" / "tweets")
    assert sa.tweets == sb.tweets and len(a.planted_ids) == 5
    ra = np.diff(np.log(sa.series["C00BTC"].open))
    rb = np.diff(np.log(sb.series["C00BTC"].open))
    pa, _ = build_panel(sa.tweets, sa.series, sa.symbols)
    pb, _ = build_panel(sb.tweets, sb.series, sb.symbols)
    assert np.allclose(pa.returns - pb.returns, synthetic.DRIFT_PROFILE, atol=1e-12)
    assert np.allclose((ra - rb).sum(), 5 * synthetic.DRIFT_PROFILE.sum(), atol=1e-10)


def test_full_cli_chain(small, tmp_path, capsys):
    root, _ = small
    raw = root / "raw"
    store = tmp_path / "store"
    _run("ingest", "--candles", raw / "candles", "--tweets", raw / "tweets", "--out", store)
    _run("featurize", "--store", store, "--min-count", 20)
    vocab, bins = pipeline.read_features(store)
    assert "listing" in vocab and "sentiment" in bins
    assert all(t.tokens is not None for t in load_store(store).tweets)
    _run("align", "--store", store, "--out", tmp_path / "panel.csv")
    assert json.loads((tmp_path / "panel_drops.json").read_text())["windows"] == len(
        read_panel(tmp_path / "panel.csv"))
    _run("mine", "--panel", tmp_path / "panel.csv", "--store", store, "--min-support", 20,
         "--out", tmp_path / "stats")
    _run("ttest", "--panel", tmp_path / "panel.csv", "--out", tmp_path / "matrix.txt")
    _run("select", "--stats", tmp_path / "stats", "--out", tmp_path / "sheet.csv")
    sheet = read_datasheet(tmp_path / "sheet.csv")
    assert any(p.predicates[0].value == "listing" for p in sheet)
    _run("backtest", "--store", store, "--sheet", tmp_path / "sheet.csv", "--fee", 0.001,
         "--spend", 0.5, "--out", tmp_path / "trades.csv")
    summary = json.loads((tmp_path / "trades_summary.json").read_text())
    assert summary["trades"] > 0
    _run("report", "--panel", tmp_path / "panel.csv", "--stats", tmp_path / "stats",
         "--matrix", tmp_path / "matrix.txt", "--log", tmp_path / "trades.csv",
         "--out", tmp_path / "report")
    assert json.loads((tmp_path / "report" / "backtest.json").read_text()) == summary
    assert (tmp_path / "report" / "ttest_matrix.txt").read_text() == (tmp_path / "matrix.txt").read_text()

    scenario = {"start_ms": synthetic.START_MS + 1000, "symbols": {"acct00": "C00BTC"},
                "timelines": {"acct00": [{"tweet_id": "x1", "created_at": synthetic.START_MS + 500,
                                          "screen_name": "acct00", "text": "big listing today"}]},
                "prices": {"C00BTC": [[synthetic.START_MS, 0.001]]}, "cycles": 2}
    (tmp_path / "sc.json").write_text(json.dumps(scenario))
    capsys.readouterr()
    _run("run", "--sheet", tmp_path / "sheet.csv", "--mock-scenario", tmp_path / "sc.json",
         "--store", store, "--out", tmp_path / "live.csv")
    out = json.loads(capsys.readouterr().out)
    assert out["trades"] == 1 and out["requests"] >= 2


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["align", "--store", str(tmp_path / "nope"), "--out", str(tmp_path / "p.csv")]) == 1
    assert "tweetstudy align" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["bogus"])


def test_features_round_trip(tmp_path):
    synthetic.generate(tmp_path / "raw", seed=2, n_symbols=2, n_bars=1000, n_tweets=40)
    store = ingest_dirs(tmp_path / "raw" / "candles", tmp_path / "raw" / "tweets")
    save_store(store, tmp_path / "store")
    vocab, bins = pipeline.featurize_store(store, min_count=5)
    v2, b2 = pipeline.read_features(tmp_path / "store")
    assert v2 == vocab and b2 == bins
    with pytest.raises(FileNotFoundError):
        pipeline.read_features(tmp_path)


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "tweetstudy.cli", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for cmd in ("ingest", "featurize", "align", "mine", "ttest", "select", "backtest", "run", "report"):
        assert cmd in out
