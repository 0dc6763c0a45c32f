import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tweetstudy.ingest import (
    MINUTE_MS, DuplicateTweetId, MalformedRow, NonMonotonicTimestamp, NonPositivePrice,
    Store, TweetRecord, ingest_dirs, load_store, parse_candles, parse_tweets, read_symbol_map,
    save_store, scan_gaps, write_candles, write_symbol_map, write_tweets,
)

from conftest import T0, make_series, make_tweet

HEADER = "open_time_ms,open,high,low,close,volume\n"


def _csv(tmp_path, rows, name="X.csv"):
    p = tmp_path / name
    p.write_text(HEADER + "".join(rows))
    return p


def test_three_rows_parse(tmp_path):
    p = _csv(tmp_path, [f"{T0 + i * MINUTE_MS},1,1.1,0.9,1,5\n" for i in range(3)])
    s = parse_candles(p, "X")
    assert len(s) == 3
    assert s[1].open_time == T0 + MINUTE_MS
    assert s.open_at(T0 + 2 * MINUTE_MS) == 1.0
    assert s.open_at(T0 + 3 * MINUTE_MS) is None


def test_zero_open_rejected(tmp_path):
    p = _csv(tmp_path, [f"{T0},0,1.1,0.9,1,5\n"])
    with pytest.raises(NonPositivePrice) as e:
        parse_candles(p, "X")
    assert e.value.line == 2


def test_out_of_order_rejected(tmp_path):
    p = _csv(tmp_path, [f"{T0 + MINUTE_MS},1,1,1,1,1\n", f"{T0},1,1,1,1,1\n"])
    with pytest.raises(NonMonotonicTimestamp):
        parse_candles(p, "X")


def test_duplicate_time_rejected(tmp_path):
    p = _csv(tmp_path, [f"{T0},1,1,1,1,1\n", f"{T0},1,1,1,1,1\n"])
    with pytest.raises(NonMonotonicTimestamp):
        parse_candles(p, "X")


@pytest.mark.parametrize("row", [
    f"{T0 + 5},1,1,1,1,1\n",          # not on a minute
    f"{T0},1,1,1,1\n",                # short row
    f"{T0},abc,1,1,1,1\n",            # not a number
    f"{T0},1,0.9,0.8,1,1\n",          # high below open
    f"{T0},1,1,1,1,-1\n",             # negative volume
    f"{T0},nan,1,1,1,1\n",
])
def test_bad_rows(tmp_path, row):
    with pytest.raises(MalformedRow):
        parse_candles(_csv(tmp_path, [row]), "X")


def test_bad_header(tmp_path):
    p = tmp_path / "X.csv"
    p.write_text("t,o,h,l,c,v\n")
    with pytest.raises(MalformedRow):
        parse_candles(p, "X")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-8, 1e6, allow_nan=False), min_size=1, max_size=30),
       st.lists(st.integers(1, 4), min_size=30, max_size=30))
def test_candle_round_trip(tmp_path_factory, prices, steps):
    times = T0 + MINUTE_MS * np.cumsum([0] + steps[:len(prices) - 1])
    s = make_series(prices, times=times)
    p = tmp_path_factory.mktemp("c") / "S.csv"
    write_candles(s, p)
    back = parse_candles(p, "XBTC")
    assert np.array_equal(back.open_time, s.open_time)
    for a in ("open", "high", "low", "close", "volume"):
        assert np.array_equal(getattr(back, a), getattr(s, a))


def test_tweet_flags_and_missing_fields(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text(json.dumps({"tweet_id": 5, "created_at": T0, "screen_name": "a", "text": "x",
                             "retweet_text": "orig"}) + "\n")
    (t,) = parse_tweets(p)
    assert t.tweet_id == "5" and t.is_retweet and not t.is_quote
    p.write_text(json.dumps({"tweet_id": 5, "screen_name": "a", "text": "x"}) + "\n")
    with pytest.raises(MalformedRow):
        parse_tweets(p)


def test_duplicate_tweet_id(tmp_path):
    p = tmp_path / "t.jsonl"
    rec = {"tweet_id": "1", "created_at": T0, "screen_name": "a", "text": "x"}
    p.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(DuplicateTweetId):
        parse_tweets(p)


@pytest.mark.parametrize("extra", [
    {"followers_count": -1}, {"media_type": "gif"}, {"hashtags": "notalist"}, {"bogus": 1},
])
def test_tweet_field_validation(tmp_path, extra):
    p = tmp_path / "t.jsonl"
    p.write_text(json.dumps({"tweet_id": "1", "created_at": T0, "screen_name": "a",
                             "text": "x", **extra}) + "\n")
    with pytest.raises(MalformedRow):
        parse_tweets(p)


def test_empty_list_means_absent(tmp_path):
    p = tmp_path / "t.jsonl"
    p.write_text(json.dumps({"tweet_id": "1", "created_at": T0, "screen_name": "a",
                             "text": "x", "hashtags": []}) + "\n")
    assert parse_tweets(p)[0].hashtags is None


texts = st.text(st.characters(blacklist_categories=("Cs",)), max_size=40)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(texts, st.integers(0, 2**40), st.one_of(st.none(), st.integers(0, 10**9)),
                          st.one_of(st.none(), st.lists(st.text("abc", min_size=1), min_size=1))),
                max_size=10))
def test_tweet_round_trip(tmp_path_factory, rows):
    tweets = [TweetRecord(str(i), t, "n", text, followers_count=f, hashtags=h)
              for i, (text, t, f, h) in enumerate(rows)]
    p = tmp_path_factory.mktemp("t") / "t.jsonl"
    write_tweets(tweets, p)
    assert parse_tweets(p) == tweets


def test_gap_report():
    assert scan_gaps(make_series([1] * 6)).gaps == []
    rep = scan_gaps(make_series([1, 1], times=[T0, T0 + 3 * MINUTE_MS]))
    assert rep.gaps == [(T0 + MINUTE_MS, T0 + 2 * MINUTE_MS, 2)]
    assert rep.missing_bars == 2
    assert scan_gaps(make_series([])).gaps == []


@settings(max_examples=50, deadline=None)
@given(st.sets(st.integers(0, 200), min_size=1, max_size=60))
def test_gap_count_matches_grid(minutes):
    m = sorted(minutes)
    s = make_series([1.0] * len(m), times=[T0 + x * MINUTE_MS for x in m])
    expected = set(range(m[0], m[-1] + 1)) - set(m)
    assert scan_gaps(s).missing_bars == len(expected)


def test_store_round_trip(tmp_path):
    cdir, tdir = tmp_path / "c", tmp_path / "t"
    cdir.mkdir()
    tdir.mkdir()
    write_candles(make_series([1, 2, 3], symbol="AAA"), cdir / "AAA.csv")
    write_tweets([make_tweet("2", T0 + 5), make_tweet("1", T0)], tdir / "a.jsonl")
    write_symbol_map({"alice": "AAA"}, tdir / "symbols.csv")
    store = ingest_dirs(cdir, tdir)
    assert [t.tweet_id for t in store.tweets] == ["1", "2"]
    assert store.symbols == {"alice": "AAA"}
    save_store(store, tmp_path / "store")
    back = load_store(tmp_path / "store")
    assert back.tweets == store.tweets
    assert np.array_equal(back.series["AAA"].open, [1, 2, 3])
    assert back.series_for(back.tweets[0]).symbol == "AAA"
    assert read_symbol_map(tmp_path / "store" / "symbols.csv") == {"alice": "AAA"}


def test_duplicate_across_files(tmp_path):
    (tmp_path / "c").mkdir()
    write_tweets([make_tweet("1")], tmp_path / "a.jsonl")
    write_tweets([make_tweet("1")], tmp_path / "b.jsonl")
    with pytest.raises(DuplicateTweetId):
        ingest_dirs(tmp_path / "c", tmp_path)


def test_store_dataclass_lookup():
    s = Store({"X": make_series([1, 2])}, [], {"bob": "X"})
    assert s.series_for(make_tweet(screen_name="bob")) is s.series["X"]
    assert s.series_for(make_tweet(screen_name="carol")) is None
