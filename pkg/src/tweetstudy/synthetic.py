"""Synthetic corpus with a known planted signal.

Each symbol gets a minute-bar random walk (log-normal increments, sd 0.004 by
default) and one tweeting account. Tweets are spread so that their 15-minute
windows never overlap within a symbol. A share of the non-retweet tweets
contains the planted word, and for those the per-minute log returns after the
anchor bar get a fixed drift profile added:

    r1 +0.0005, r2 +0.003, r3..r7 +0.0006 each

so the mean cumulative return rises by 0.6% between t1 and t7 and is lowest
at t1. ``drift_scale`` rescales the whole profile (1/6 gives +0.1%).

Outputs are written in the ingest input formats:

    root/candles/<SYMBOL>.csv
    root/tweets/tweets.jsonl
    root/tweets/symbols.csv
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import MINUTE_MS, CandleSeries, TweetRecord, write_candles, write_symbol_map, write_tweets

START_MS = 1_514_764_800_000  # 2018-01-01T00:00Z
DRIFT_PROFILE = np.array([0.0005, 0.003] + [0.0006] * 5 + [0.0] * 8)
PLANTED_WORD = "listing"

# neutral filler plus a few words the bundled lexicon scores
_FILLER = ("coin", "market", "update", "team", "wallet", "exchange", "price", "trading",
           "community", "network", "token", "project", "release", "chart", "volume",
           "partner", "roadmap", "node", "block", "launch", "week", "today", "news",
           "support", "mainnet", "develop", "app", "users", "global", "event")
_TONE = ("great", "good", "strong", "bad", "weak", "amazing", "not", "very", "risk", "happy")
_TAGS = ("crypto", "blockchain", "altcoin", "bitcoin")


@dataclass
class SyntheticCorpus:
    root: Path
    symbols: dict[str, str]          # screen_name -> symbol
    planted_ids: list[str]
    drift: np.ndarray                # the profile actually injected
    n_candles: int
    n_tweets: int


def _text(rng: np.random.Generator, planted: bool, word: str) -> str:
    n = int(rng.integers(6, 13))
    words = list(rng.choice(_FILLER, size=n))
    if rng.random() < 0.5:
        words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(_TONE)))
    if planted:
        words.insert(int(rng.integers(0, len(words) + 1)), word)
    text = " ".join(words)
    if rng.random() < 0.3:
        text += ". " + " ".join(rng.choice(_FILLER, size=3)) + "!"
    if rng.random() < 0.2:
        text += " https://example.org/p/" + str(int(rng.integers(1000, 9999)))
    return text


def generate(root: str | Path, seed: int = 0, drift_scale: float = 1.0, n_symbols: int = 20,
             n_bars: int = 10_040, n_tweets: int = 5_000, noise_sd: float = 0.004,
             planted_share: float = 0.3, retweet_share: float = 0.1, gaps_per_symbol: int = 2,
             planted_word: str = PLANTED_WORD) -> SyntheticCorpus:
    """Write a corpus under ``root``. Same ``seed`` gives the same tweets and noise
    whatever the ``drift_scale``, so runs differ only by the injected signal."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    drift = DRIFT_PROFILE * drift_scale
    per_symbol = n_tweets // n_symbols
    if per_symbol * n_symbols != n_tweets:
        raise ValueError("n_tweets must be a multiple of n_symbols")
    spacing = (n_bars - 80) // per_symbol
    if spacing < 2 * 16 + 1:
        raise ValueError("too many tweets for the number of bars")
    jitter = spacing // 4

    (root / "candles").mkdir(parents=True, exist_ok=True)
    (root / "tweets").mkdir(parents=True, exist_ok=True)
    symbols: dict[str, str] = {}
    tweets: list[TweetRecord] = []
    planted_ids: list[str] = []
    n_candles = 0
    times = START_MS + MINUTE_MS * np.arange(n_bars, dtype=np.int64)

    for s in range(n_symbols):
        sym, name = f"C{s:02d}BTC", f"acct{s:02d}"
        symbols[name] = sym
        # draw everything up front so the stream does not depend on drift_scale
        eps = rng.normal(0.0, noise_sd, n_bars)
        slots = 45 + spacing * np.arange(per_symbol) + rng.integers(-jitter, jitter + 1, per_symbol)
        offsets = rng.integers(1, MINUTE_MS + 1, per_symbol)
        is_rt = rng.random(per_symbol) < retweet_share
        is_planted = (~is_rt) & (rng.random(per_symbol) < planted_share)
        followers0 = int(rng.integers(1_000, 500_000))
        friends = int(rng.integers(10, 3_000))
        statuses0 = int(rng.integers(100, 20_000))

        inc = eps.copy()
        inc[0] = 0.0
        for b in slots[is_planted]:
            inc[b + 1:b + 16] += drift
        log_open = np.log(0.001 * (1 + s)) + np.cumsum(inc)
        opens = np.exp(log_open)
        closes = np.append(opens[1:], opens[-1] * np.exp(rng.normal(0, noise_sd)))
        wick = np.exp(np.abs(rng.normal(0, noise_sd / 4, (2, n_bars))))
        highs = np.maximum(opens, closes) * wick[0]
        lows = np.minimum(opens, closes) / wick[1]
        vol = rng.gamma(2.0, 50.0, n_bars)

        keep = np.ones(n_bars, dtype=bool)
        for _ in range(gaps_per_symbol):
            g0 = int(rng.integers(100, n_bars - 100))
            keep[g0:g0 + int(rng.integers(3, 20))] = False
        series = CandleSeries(sym, times[keep], opens[keep], highs[keep], lows[keep],
                              closes[keep], vol[keep])
        write_candles(series, root / "candles" / f"{sym}.csv")
        n_candles += len(series)

        for j in range(per_symbol):
            b = int(slots[j])
            tid = f"{s:02d}{j:05d}"
            created = int(times[b]) - MINUTE_MS + int(offsets[j])
            followers = followers0 + int(j * rng.integers(0, 40))
            rec = TweetRecord(
                tweet_id=tid, created_at=created, screen_name=name,
                text=_text(rng, bool(is_planted[j]), planted_word),
                language="en" if rng.random() < 0.9 else "de",
                followers_count=followers, friends_count=friends,
                statuses_count=statuses0 + 3 * j,
                favorites_count=int(rng.integers(0, 400)),
                hashtags=[str(rng.choice(_TAGS))] if rng.random() < 0.4 else None,
                mentions_screen_names=[f"acct{int(rng.integers(0, n_symbols)):02d}"]
                if rng.random() < 0.2 else None,
                media_type=("photo" if rng.random() < 0.7 else "video") if rng.random() < 0.15 else None,
            )
            if is_rt[j]:
                src = f"acct{int(rng.integers(0, n_symbols)):02d}"
                rec.retweet_text = _text(rng, False, planted_word)
                rec.retweet_screen_name = src
                rec.retweet_followers_count = int(rng.integers(1_000, 500_000))
                rec.retweet_friends_count = int(rng.integers(10, 3_000))
                rec.retweet_lag_ms = int(rng.integers(1_000, 3_600_000))
                rec.text = "RT @" + src + ": " + rec.retweet_text
            elif not is_planted[j] and rng.random() < 0.05:
                src = f"acct{int(rng.integers(0, n_symbols)):02d}"
                rec.quoted_text = _text(rng, False, planted_word)
                rec.quoted_screen_name = src
                rec.quoted_followers_count = int(rng.integers(1_000, 500_000))
                rec.quoted_friends_count = int(rng.integers(10, 3_000))
                rec.quoted_lag_ms = int(rng.integers(1_000, 3_600_000))
            if is_planted[j]:
                planted_ids.append(tid)
            tweets.append(rec)

    tweets.sort(key=lambda t: (t.created_at, t.tweet_id))
    write_tweets(tweets, root / "tweets" / "tweets.jsonl")
    write_symbol_map(symbols, root / "tweets" / "symbols.csv")
    return SyntheticCorpus(root, symbols, sorted(planted_ids), drift, n_candles, len(tweets))
