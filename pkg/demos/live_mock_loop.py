"""Drive the polling trader against scripted timelines and prices on a mock
clock, then print every order and the rate-limiter budget it used.

    python3 demos/live_mock_loop.py
"""
import argparse

from tweetstudy.ingest import MINUTE_MS, TweetRecord
from tweetstudy.miner import Predicate, condition_id
from tweetstudy.strategy import TradePlan
from tweetstudy.trader import (
    LiveTrader, MockClock, MockExchange, MockTimelineClient, TraderConfig, round_trip_pnl,
)

START_MS = 1_514_764_800_000


def build(n_accounts, fail_every):
    word = (Predicate("tweet_word", "contains-word", "listing"),)
    plan = TradePlan(condition_id(word), word, 120, buy_offset=2, sell_offset=8,
                     expected_spread=0.006, sd_at_sell=0.01)
    names = [f"acct{i:02d}" for i in range(n_accounts)]
    timelines, prices, failures = {}, {}, {}
    for i, name in enumerate(names):
        sym = f"C{i:02d}BTC"
        t = START_MS + (3 + 7 * i) * MINUTE_MS + 12_345
        text = "exchange listing confirmed" if i % 2 == 0 else "weekly dev update"
        timelines[name] = [TweetRecord(tweet_id=f"{i}01", created_at=t, screen_name=name, text=text),
                           TweetRecord(tweet_id=f"{i}02", created_at=t - 3 * 3600_000,
                                       screen_name=name, text="old listing news")]
        # price steps up 0.5% a few minutes after the tweet
        prices[sym] = [(START_MS, 0.001 * (1 + i / 10)),
                       (t + 4 * MINUTE_MS, 0.001 * (1 + i / 10) * 1.005)]
        if fail_every and i % fail_every == 0:
            failures[name] = 2
    return plan, {n: f"C{i:02d}BTC" for i, n in enumerate(names)}, timelines, prices, failures


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--accounts", type=int, default=6)
    ap.add_argument("--minutes", type=int, default=60)
    ap.add_argument("--fail-every", type=int, default=3,
                    help="every k-th timeline fails twice before answering (0 = never)")
    args = ap.parse_args()

    plan, symbols, timelines, prices, failures = build(args.accounts, args.fail_every)
    clock = MockClock(START_MS / 1000)
    tl = MockTimelineClient(timelines, clock, failures)
    ex = MockExchange(prices, clock)
    trader = LiveTrader(tl, ex, [plan], symbols, clock, TraderConfig(backoff_s=0.5))
    trader.run(until_s=START_MS / 1000 + args.minutes * 60)

    for rec in trader.log.records:
        if rec.rejected:
            print(f"{rec.tweet_id} {rec.symbol}: skipped ({rec.rejected})")
            continue
        buy, sell = rec.fills
        print(f"{rec.tweet_id} {rec.symbol}: buy {buy.quantity:.2f} @ {buy.price:.6f} "
              f"(+{(buy.timestamp - START_MS) / 1000:.0f}s), sell @ {sell.price:.6f} "
              f"(+{(sell.timestamp - START_MS) / 1000:.0f}s), pnl {round_trip_pnl(buy, sell):+.6f} BTC")
    print(f"wallet {trader.wallet.btc_balance:.6f} BTC; {len(trader.requests)} timeline requests "
          f"in {args.minutes} min (budget {trader.limiter.limit} per {trader.limiter.window:.0f}s)")


if __name__ == "__main__":
    main()
