import numpy as np
import pytest

from tweetstudy.eventstudy import N_PERIODS, EventPanel, EventWindow
from tweetstudy.ingest import MINUTE_MS, CandleSeries, TweetRecord

T0 = 1_514_764_800_000  # a minute boundary


def make_series(opens, symbol="XBTC", start=T0, times=None):
    opens = np.asarray(opens, dtype=float)
    if times is None:
        times = start + MINUTE_MS * np.arange(len(opens), dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    return CandleSeries(symbol, times, opens, opens * 1.001, opens * 0.999, opens,
                        np.ones(len(opens)))


def make_tweet(tid="1", created_at=T0, screen_name="alice", text="hello world", **kw):
    return TweetRecord(tweet_id=tid, created_at=created_at, screen_name=screen_name,
                       text=text, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_panel(n, rng, excess_share=0.9):
    return EventPanel(EventWindow(f"{i:04d}", "S", T0, 0, rng.normal(0, 0.004, N_PERIODS),
                                  rng.normal(0, 0.004, N_PERIODS) if rng.random() < excess_share else None)
                      for i in range(n))


def random_tweets(rng, n=400):
    names = ["ann", "bob", "cy"]
    words = ["moon", "pump", "news", "team", "dev"]
    tweets = []
    for i in range(n):
        rt = rng.random() < 0.3
        tweets.append(make_tweet(
            f"{i:04d}", T0 + i, str(rng.choice(names)), "",
            language=str(rng.choice(["en", "de"])),
            followers_count=int(rng.integers(0, 1000)),
            favorites_count=int(rng.integers(0, 5)),
            sentiment=float(rng.normal()),
            hashtags=["btc"] if rng.random() < 0.4 else None,
            mentions_screen_names=["bob"] if rng.random() < 0.3 else None,
            media_type="photo" if rng.random() < 0.3 else None,
            retweet_text="x" if rt else None,
            retweet_screen_name=str(rng.choice(names)) if rt else None,
            tokens=sorted({str(w) for w in rng.choice(words, size=int(rng.integers(0, 4)))}),
        ))
    return tweets


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
