"""Trade execution: historical replay and a rate-limited polling loop.

Both paths share the same pieces: a datasheet lookup that rejects retweets and
quotes and otherwise takes the first (highest-spread) matching plan, a market
buy sized as ``btc_balance * spend_rate / ask``, and a market sell after the
planned holding period. Fees are charged in BTC on both legs.
"""
from __future__ import annotations

import csv
import heapq
import itertools
import json
import logging
import math
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .eventstudy import anchor_time
from .ingest import MINUTE_MS, CandleSeries, Store, TweetRecord
from .miner import BinScheme
from .strategy import TradePlan
from .textlab import SentimentLexicon, featurize_tweets, load_lexicon, load_stoplist

logger = logging.getLogger(__name__)

TAKER_FEE = 0.001
TAKER_FEE_DISCOUNTED = 0.00075
RATE_LIMIT = 900
RATE_WINDOW_S = 900.0
FRESHNESS_MS = 60_000


class InsufficientBalance(Exception):
    pass


class MissingBar(Exception):
    pass


class ClientUnavailable(Exception):
    pass


class RateBudgetExhausted(Exception):
    pass


@dataclass(frozen=True)
class FeeSchedule:
    taker_rate: float = TAKER_FEE

    def __post_init__(self):
        if not 0 <= self.taker_rate < 1:
            raise ValueError("taker_rate must be in [0, 1)")


@dataclass(frozen=True)
class Fill:
    symbol: str
    side: str
    quantity: float
    price: float
    fee_paid: float
    timestamp: int

    @property
    def notional(self) -> float:
        return self.quantity * self.price


def make_fill(symbol: str, side: str, quantity: float, price: float, fees: FeeSchedule,
              timestamp: int) -> Fill:
    if side not in ("buy", "sell"):
        raise ValueError(f"side must be buy or sell, not {side!r}")
    if not (quantity > 0 and price > 0):
        raise ValueError("quantity and price must be > 0")
    return Fill(symbol, side, quantity, price, price * quantity * fees.taker_rate, timestamp)


@dataclass
class WalletState:
    btc_balance: float
    holdings: dict[str, float] = field(default_factory=dict)

    def apply(self, fill: Fill) -> None:
        """Book a fill. Raises before mutating if it would go negative."""
        if fill.side == "buy":
            cost = fill.notional + fill.fee_paid
            if cost > self.btc_balance:
                raise InsufficientBalance(f"need {cost} BTC, have {self.btc_balance}")
            self.btc_balance -= cost
            self.holdings[fill.symbol] = self.holdings.get(fill.symbol, 0.0) + fill.quantity
        else:
            held = self.holdings.get(fill.symbol, 0.0)
            if fill.quantity > held * (1 + 1e-12):
                raise InsufficientBalance(f"cannot sell {fill.quantity} {fill.symbol}, hold {held}")
            self.btc_balance += fill.notional - fill.fee_paid
            left = held - fill.quantity
            if left <= held * 1e-12:
                self.holdings.pop(fill.symbol, None)
            else:
                self.holdings[fill.symbol] = left


def round_trip_pnl(buy: Fill, sell: Fill) -> float:
    return sell.notional - buy.notional - buy.fee_paid - sell.fee_paid


def sleep_duration(timeline_count: int, window_s: float = RATE_WINDOW_S,
                   limit: int = RATE_LIMIT) -> float:
    """Pause between polling cycles that keeps N timelines within the budget."""
    if timeline_count < 1:
        raise ValueError("timeline_count must be >= 1")
    return window_s / limit * timeline_count


def freshness_gate(tweet: TweetRecord, now_ms: int, max_age_ms: int = FRESHNESS_MS) -> bool:
    age = now_ms - tweet.created_at
    if age < 0:
        logger.warning("tweet %s is %d ms in the future; clock skew", tweet.tweet_id, -age)
    return age < max_age_ms


def match_condition(tweet: TweetRecord, datasheet: Sequence[TradePlan],
                    bins: Mapping[str, BinScheme]) -> TradePlan | None:
    if tweet.is_retweet or tweet.is_quote:
        return None
    for plan in datasheet:
        if all(p.holds(tweet, bins) for p in plan.predicates):
            return plan
    return None


class PriceSource(Protocol):
    def price_at(self, symbol: str, time_ms: int) -> float | None: ...


class CandleFeed:
    """Executable price = open of the bar starting at the requested minute."""

    def __init__(self, series: Mapping[str, CandleSeries]):
        self.series = series

    def price_at(self, symbol: str, time_ms: int) -> float | None:
        s = self.series.get(symbol)
        return None if s is None else s.open_at(time_ms)


def entry_exit_times(plan: TradePlan, created_at: int) -> tuple[int, int]:
    a = anchor_time(created_at)
    return a + (plan.buy_offset - 1) * MINUTE_MS, a + plan.sell_offset * MINUTE_MS


def buy_leg(wallet: WalletState, symbol: str, price: float, spend_rate: float,
            fees: FeeSchedule, timestamp: int) -> Fill:
    if not 0 < spend_rate <= 1:
        raise ValueError("spend_rate must be in (0, 1]")
    qty = wallet.btc_balance * spend_rate / price
    if not qty > 0:
        raise InsufficientBalance("empty wallet")
    fill = make_fill(symbol, "buy", qty, price, fees, timestamp)
    wallet.apply(fill)
    return fill


def sell_leg(wallet: WalletState, symbol: str, quantity: float, price: float,
             fees: FeeSchedule, timestamp: int) -> Fill:
    fill = make_fill(symbol, "sell", quantity, price, fees, timestamp)
    wallet.apply(fill)
    return fill


def execute_plan(plan: TradePlan, tweet: TweetRecord, wallet: WalletState, feed: PriceSource,
                 fees: FeeSchedule, spend_rate: float, symbol: str) -> tuple[list[Fill], WalletState]:
    """Buy and then sell one position at the plan's offsets from the tweet's anchor bar."""
    if not 0 < spend_rate <= 1:
        raise ValueError("spend_rate must be in (0, 1]")
    t_buy, t_sell = entry_exit_times(plan, tweet.created_at)
    p_buy, p_sell = feed.price_at(symbol, t_buy), feed.price_at(symbol, t_sell)
    if p_buy is None or p_sell is None:
        raise MissingBar(f"{symbol}: no bar at {t_buy if p_buy is None else t_sell}")
    b = buy_leg(wallet, symbol, p_buy, spend_rate, fees, t_buy)
    s = sell_leg(wallet, symbol, b.quantity, p_sell, fees, t_sell)
    return [b, s], wallet


# ------------------------------------------------------------- trade log

@dataclass
class TradeRecord:
    tweet_id: str
    condition_id: str
    symbol: str
    fills: list[Fill] = field(default_factory=list)
    pnl: float | None = None
    rejected: str | None = None


@dataclass
class TradeLog:
    records: list[TradeRecord] = field(default_factory=list)

    @property
    def trades(self) -> list[TradeRecord]:
        return [r for r in self.records if r.pnl is not None]

    def rows(self) -> list[list]:
        out = []
        for r in self.records:
            if r.rejected is not None:
                out.append(["", r.tweet_id, r.condition_id, r.symbol, "skip", "", "", "", "",
                            r.rejected])
                continue
            for f in r.fills:
                pnl = repr(r.pnl) if f.side == "sell" and r.pnl is not None else ""
                out.append([f.timestamp, r.tweet_id, r.condition_id, r.symbol, f.side,
                            repr(f.quantity), repr(f.price), repr(f.fee_paid), pnl, ""])
        return out

    def write(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp_ms", "tweet_id", "condition_id", "symbol", "action",
                        "quantity", "price", "fee_btc", "pnl_btc", "reason"])
            w.writerows(self.rows())


def summarize(log: TradeLog, initial_btc: float, wallet: WalletState) -> dict:
    trades = log.trades
    fees = sum(f.fee_paid for r in trades for f in r.fills)
    net = sum(r.pnl for r in trades)
    per_cond: dict[str, dict] = {}
    for r in trades:
        d = per_cond.setdefault(r.condition_id, {"trades": 0, "pnl_btc": 0.0})
        d["trades"] += 1
        d["pnl_btc"] += r.pnl
    wins = sum(1 for r in trades if r.pnl > 0)
    return {
        "initial_btc": initial_btc,
        "final_btc": wallet.btc_balance,
        "trades": len(trades),
        "net_pnl_btc": net,
        "gross_pnl_btc": net + fees,
        "fees_btc": fees,
        "net_return": net / initial_btc,
        "gross_return": (net + fees) / initial_btc,
        "hit_rate": wins / len(trades) if trades else None,
        "rejections": dict(sorted(Counter(r.rejected for r in log.records if r.rejected).items())),
        "per_condition": {k: per_cond[k] for k in sorted(per_cond)},
    }


@dataclass
class BacktestResult:
    log: TradeLog
    wallet: WalletState
    summary: dict


_SELL, _BUY, _ARRIVAL = 0, 1, 2


def backtest(datasheet: Sequence[TradePlan], store: Store, bins: Mapping[str, BinScheme],
             fees: FeeSchedule = FeeSchedule(), spend_rate: float = 0.5,
             initial_btc: float = 1.0) -> BacktestResult:
    """Replay every tweet in time order through match -> buy -> sell.

    Every historical tweet counts as fresh. At equal timestamps sells settle
    before buys, and buys before new arrivals.
    """
    if not 0 < spend_rate <= 1:
        raise ValueError("spend_rate must be in (0, 1]")
    feed = CandleFeed(store.series)
    wallet = WalletState(initial_btc)
    log = TradeLog()
    open_symbols: set[str] = set()
    seq = itertools.count()
    events: list = []
    for tw in sorted(store.tweets, key=lambda t: (t.created_at, t.tweet_id)):
        heapq.heappush(events, (tw.created_at, _ARRIVAL, next(seq), tw))

    while events:
        t, kind, _, payload = heapq.heappop(events)
        if kind == _ARRIVAL:
            tw = payload
            plan = match_condition(tw, datasheet, bins)
            if plan is None:
                continue
            sym = store.symbols.get(tw.screen_name, "")
            rec = TradeRecord(tw.tweet_id, plan.condition_id, sym)
            log.records.append(rec)
            if not sym or sym not in store.series:
                rec.rejected = "no_symbol"
                continue
            if sym in open_symbols:
                rec.rejected = "position_open"
                continue
            t_buy, t_sell = entry_exit_times(plan, tw.created_at)
            if feed.price_at(sym, t_buy) is None or feed.price_at(sym, t_sell) is None:
                rec.rejected = "missing_bar"
                logger.info("skip %s: missing bar in %s window", tw.tweet_id, sym)
                continue
            open_symbols.add(sym)
            heapq.heappush(events, (t_buy, _BUY, next(seq), (rec, t_sell)))
        elif kind == _BUY:
            rec, t_sell = payload
            try:
                fill = buy_leg(wallet, rec.symbol, feed.price_at(rec.symbol, t), spend_rate, fees, t)
            except InsufficientBalance:
                rec.rejected = "insufficient_balance"
                open_symbols.discard(rec.symbol)
                continue
            rec.fills.append(fill)
            heapq.heappush(events, (t_sell, _SELL, next(seq), rec))
        else:
            rec = payload
            buy = rec.fills[0]
            fill = sell_leg(wallet, rec.symbol, buy.quantity, feed.price_at(rec.symbol, t), fees, t)
            rec.fills.append(fill)
            rec.pnl = round_trip_pnl(buy, fill)
            open_symbols.discard(rec.symbol)

    return BacktestResult(log, wallet, summarize(log, initial_btc, wallet))


# ------------------------------------------------------------ live loop

class Clock(Protocol):
    def now(self) -> float: ...
    def sleep(self, seconds: float) -> None: ...


class SystemClock:
    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class MockClock:
    def __init__(self, start: float = 0.0):
        self.t = float(start)

    def now(self) -> float:
        return self.t

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            # always move forward, even when seconds is below the clock's resolution
            self.t = max(self.t + seconds, math.nextafter(self.t, math.inf))


class RateLimiter:
    """Sliding-log limiter: at most ``limit`` requests in any ``window``-second span."""

    def __init__(self, clock: Clock, limit: int = RATE_LIMIT, window: float = RATE_WINDOW_S):
        self.clock = clock
        self.limit = limit
        self.window = window
        self._log: deque[float] = deque()

    def _purge(self, now: float) -> None:
        # written as x + window <= now so callers checking the same span agree bit for bit
        while self._log and self._log[0] + self.window <= now:
            self._log.popleft()

    def wait_time(self) -> float:
        now = self.clock.now()
        self._purge(now)
        if len(self._log) < self.limit:
            return 0.0
        return self._log[0] + self.window - now

    def try_acquire(self) -> bool:
        if self.wait_time() > 0:
            return False
        self._log.append(self.clock.now())
        return True

    def acquire(self, block: bool = True, sleep: Callable[[float], None] | None = None) -> None:
        """Record one request, waiting for budget if ``block``; otherwise raise
        :class:`RateBudgetExhausted`."""
        sleep = sleep or self.clock.sleep
        while not self.try_acquire():
            if not block:
                raise RateBudgetExhausted(f"retry in {self.wait_time():.3f}s")
            sleep(self.wait_time())

    def sleep_per_cycle(self, timeline_count: int) -> float:
        return sleep_duration(timeline_count, self.window, self.limit)


class TimelineClient(Protocol):
    def latest_message(self, screen_name: str) -> TweetRecord | None: ...


class ExchangeClient(Protocol):
    def best_ask(self, symbol: str) -> float: ...
    def market_order(self, symbol: str, side: str, quantity: float) -> Fill: ...


@dataclass
class TraderConfig:
    spend_rate: float = 0.5
    taker_rate: float = TAKER_FEE
    initial_btc: float = 1.0
    max_retries: int = 3
    backoff_s: float = 1.0
    # enter as soon as the tweet is seen rather than waiting for the planned minute
    immediate_entry: bool = False


@dataclass
class ScheduledOrder:
    at_s: float
    side: str
    record: TradeRecord
    sell_at_s: float | None = None


class LiveTrader:
    """Single-threaded poll -> gate -> match -> schedule loop.

    Timed buys and sells are held in a heap and run from inside the loop's
    own waits, so the wallet is only ever touched from one place.
    """

    def __init__(self, timelines: TimelineClient, exchange: ExchangeClient,
                 datasheet: Sequence[TradePlan], symbols: Mapping[str, str],
                 clock: Clock | None = None, config: TraderConfig | None = None,
                 bins: Mapping[str, BinScheme] | None = None,
                 lexicon: SentimentLexicon | None = None, stoplist: Iterable[str] | None = None,
                 limiter: RateLimiter | None = None):
        self.timelines = timelines
        self.exchange = exchange
        self.datasheet = list(datasheet)
        self.symbols = dict(symbols)
        self.names = sorted(self.symbols)
        if not self.names:
            raise ValueError("need at least one timeline")
        self.clock = clock or SystemClock()
        self.config = config or TraderConfig()
        self.bins = dict(bins or {})
        self.lexicon = lexicon or load_lexicon()
        self.stoplist = frozenset(stoplist) if stoplist is not None else load_stoplist()
        self.limiter = limiter or RateLimiter(self.clock)
        self.wallet = WalletState(self.config.initial_btc)
        self.log = TradeLog()
        self.requests: list[float] = []
        self.seen: set[str] = set()
        self.open_symbols: set[str] = set()
        self._queue: list = []
        self._seq = itertools.count()
        self._stopped = False

    # -- timing
    def now_ms(self) -> int:
        return int(round(self.clock.now() * 1000))

    def _run_due(self) -> None:
        while self._queue and self._queue[0][0] <= self.clock.now():
            _, _, _, order = heapq.heappop(self._queue)
            self._execute(order)

    def wait(self, seconds: float) -> None:
        """Sleep, waking to run any order that falls due in between."""
        target = self.clock.now() + max(seconds, 0.0)
        self._run_due()
        while self._queue and self._queue[0][0] <= target:
            self.clock.sleep(self._queue[0][0] - self.clock.now())
            self._run_due()
        self.clock.sleep(target - self.clock.now())
        self._run_due()

    def schedule(self, at_s: float, side: str, record: TradeRecord,
                 sell_at_s: float | None = None) -> None:
        heapq.heappush(self._queue, (at_s, 0 if side == "sell" else 1, next(self._seq),
                                     ScheduledOrder(at_s, side, record, sell_at_s)))

    # -- orders
    def _execute(self, order: ScheduledOrder) -> None:
        rec = order.record
        if order.side == "buy":
            ask = self.exchange.best_ask(rec.symbol)
            qty = self.wallet.btc_balance * self.config.spend_rate / ask
            fill = self.exchange.market_order(rec.symbol, "buy", qty)
            try:
                self.wallet.apply(fill)
            except InsufficientBalance:
                rec.rejected = "insufficient_balance"
                self.open_symbols.discard(rec.symbol)
                return
            rec.fills.append(fill)
            self.schedule(max(order.sell_at_s, self.clock.now()), "sell", rec)
        else:
            buy = rec.fills[0]
            fill = self.exchange.market_order(rec.symbol, "sell", buy.quantity)
            self.wallet.apply(fill)
            rec.fills.append(fill)
            rec.pnl = round_trip_pnl(buy, fill)
            self.open_symbols.discard(rec.symbol)

    # -- polling
    def fetch(self, name: str) -> TweetRecord | None:
        delay = self.config.backoff_s
        for attempt in range(self.config.max_retries + 1):
            while True:
                try:
                    self.limiter.acquire(block=False)
                    break
                except RateBudgetExhausted:
                    self.wait(self.limiter.wait_time())
            self.requests.append(self.clock.now())
            try:
                return self.timelines.latest_message(name)
            except ClientUnavailable:
                logger.warning("timeline %s unavailable (attempt %d)", name, attempt + 1)
                if attempt == self.config.max_retries:
                    return None
                self.wait(delay)
                delay *= 2
        return None

    def handle(self, tweet: TweetRecord) -> TradeRecord | None:
        if tweet.tweet_id in self.seen:
            return None
        self.seen.add(tweet.tweet_id)
        if not freshness_gate(tweet, self.now_ms()):
            return None
        if tweet.is_retweet or tweet.is_quote:
            return None
        if tweet.sentiment is None or tweet.tokens is None:
            featurize_tweets([tweet], self.lexicon, self.stoplist)
        plan = match_condition(tweet, self.datasheet, self.bins)
        if plan is None:
            return None
        sym = self.symbols.get(tweet.screen_name, "")
        rec = TradeRecord(tweet.tweet_id, plan.condition_id, sym)
        self.log.records.append(rec)
        if sym in self.open_symbols:
            rec.rejected = "position_open"
            return rec
        self.open_symbols.add(sym)
        created_s = tweet.created_at / 1000
        buy_at = self.clock.now() if self.config.immediate_entry else \
            created_s + (plan.buy_offset - 1) * 60
        self.schedule(max(buy_at, self.clock.now()), "buy", rec,
                      sell_at_s=created_s + plan.sell_offset * 60)
        return rec

    def cycle(self) -> None:
        self.wait(sleep_duration(len(self.names), self.limiter.window, self.limiter.limit))
        for name in self.names:
            if self._stopped:
                return
            tweet = self.fetch(name)
            if tweet is not None:
                self.handle(tweet)
            self._run_due()

    def stop(self) -> None:
        self._stopped = True

    def run(self, max_cycles: int | None = None, until_s: float | None = None,
            drain: bool = True) -> TradeLog:
        """Loop until stopped, ``max_cycles`` cycles, or the clock passes ``until_s``.
        With ``drain`` any still-scheduled orders are run to completion."""
        cycles = 0
        while not self._stopped:
            if max_cycles is not None and cycles >= max_cycles:
                break
            if until_s is not None and self.clock.now() >= until_s:
                break
            self.cycle()
            cycles += 1
        if drain:
            while self._queue:
                self.wait(self._queue[0][0] - self.clock.now())
        return self.log


# ------------------------------------------------------------ mock clients

class MockTimelineClient:
    """Serves the newest scripted tweet already published at the clock's time."""

    def __init__(self, timelines: Mapping[str, Sequence[TweetRecord]], clock: Clock,
                 failures: Mapping[str, int] | None = None):
        self.timelines = {k: sorted(v, key=lambda t: t.created_at) for k, v in timelines.items()}
        self.clock = clock
        self.failures = dict(failures or {})
        self.calls: list[tuple[float, str]] = []

    def latest_message(self, screen_name: str) -> TweetRecord | None:
        self.calls.append((self.clock.now(), screen_name))
        if self.failures.get(screen_name, 0) > 0:
            self.failures[screen_name] -= 1
            raise ClientUnavailable(screen_name)
        now_ms = int(round(self.clock.now() * 1000))
        latest = None
        for t in self.timelines.get(screen_name, ()):
            if t.created_at <= now_ms:
                latest = t
            else:
                break
        return latest


class MockExchange:
    """Step-function prices per symbol; fills at the current price with the taker fee."""

    def __init__(self, prices: Mapping[str, Sequence[tuple[int, float]]], clock: Clock,
                 fees: FeeSchedule = FeeSchedule()):
        self.prices = {k: sorted(v) for k, v in prices.items()}
        self.clock = clock
        self.fees = fees
        self.orders: list[Fill] = []

    def best_ask(self, symbol: str) -> float:
        now_ms = int(round(self.clock.now() * 1000))
        price = None
        for t, p in self.prices.get(symbol, ()):
            if t <= now_ms:
                price = p
            else:
                break
        if price is None:
            raise ClientUnavailable(f"no price for {symbol}")
        return price

    def market_order(self, symbol: str, side: str, quantity: float) -> Fill:
        fill = make_fill(symbol, side, quantity, self.best_ask(symbol), self.fees,
                         int(round(self.clock.now() * 1000)))
        self.orders.append(fill)
        return fill


def load_scenario(path: str | Path) -> dict:
    """Mock scenario JSON: ``start_ms``, ``symbols`` {screen_name: symbol},
    ``timelines`` {screen_name: [tweet objects]}, ``prices`` {symbol: [[t_ms, price], ...]},
    optional ``cycles``, ``failures``, ``initial_btc``, ``spend_rate``, ``fee``."""
    from .ingest import _tweet_from_obj

    raw = json.loads(Path(path).read_text())
    timelines = {name: [_tweet_from_obj(o, i + 1) for i, o in enumerate(items)]
                 for name, items in raw.get("timelines", {}).items()}
    return {**raw, "timelines": timelines,
            "prices": {k: [(int(t), float(p)) for t, p in v] for k, v in raw["prices"].items()}}


def run_scenario(scenario: Mapping, datasheet: Sequence[TradePlan],
                 bins: Mapping[str, BinScheme] | None = None) -> LiveTrader:
    clock = MockClock(scenario.get("start_ms", 0) / 1000)
    fee = FeeSchedule(scenario.get("fee", TAKER_FEE))
    cfg = TraderConfig(spend_rate=scenario.get("spend_rate", 0.5), taker_rate=fee.taker_rate,
                       initial_btc=scenario.get("initial_btc", 1.0))
    trader = LiveTrader(MockTimelineClient(scenario["timelines"], clock, scenario.get("failures")),
                        MockExchange(scenario["prices"], clock, fee), datasheet,
                        scenario["symbols"], clock, cfg, bins)
    trader.run(max_cycles=scenario.get("cycles", 10))
    return trader

