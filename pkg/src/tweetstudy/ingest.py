"""Candle and tweet-timeline ingestion.

Candle files are headed CSV (``open_time_ms,open,high,low,close,volume``);
tweet files are JSON lines keyed by the timeline variable names. Both parse
into the canonical in-memory model and serialize back to a canonical form.

A *store* is a directory holding ``candles/<SYMBOL>.csv``, ``tweets.jsonl``
and ``symbols.csv`` (screen_name -> exchange symbol).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MINUTE_MS = 60_000
CANDLE_HEADER = ("open_time_ms", "open", "high", "low", "close", "volume")


class IngestError(ValueError):
    """Base class for parse failures; ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MalformedRow(IngestError):
    pass


class NonMonotonicTimestamp(IngestError):
    pass


class NonPositivePrice(IngestError):
    pass


class DuplicateTweetId(IngestError):
    pass


@dataclass(frozen=True)
class Candle:
    open_time: int
    open: float
    high: float
    low: float
    close: float
    volume: float


class CandleSeries:
    """Time-ordered 1-minute bars for one symbol, held as parallel arrays."""

    def __init__(self, symbol: str, open_time, open, high, low, close, volume):
        self.symbol = symbol
        self.open_time = np.asarray(open_time, dtype=np.int64)
        self.open = np.asarray(open, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.low = np.asarray(low, dtype=float)
        self.close = np.asarray(close, dtype=float)
        self.volume = np.asarray(volume, dtype=float)
        n = len(self.open_time)
        for arr in (self.open, self.high, self.low, self.close, self.volume):
            if len(arr) != n:
                raise ValueError("column lengths differ")
        if n > 1 and not np.all(np.diff(self.open_time) > 0):
            raise NonMonotonicTimestamp("open_time must be strictly increasing")

    @classmethod
    def from_candles(cls, symbol: str, bars: Sequence[Candle]) -> "CandleSeries":
        cols = list(zip(*[(b.open_time, b.open, b.high, b.low, b.close, b.volume)
                          for b in bars])) or [()] * 6
        return cls(symbol, *cols)

    def __len__(self) -> int:
        return len(self.open_time)

    def __getitem__(self, i: int) -> Candle:
        return Candle(int(self.open_time[i]), float(self.open[i]), float(self.high[i]),
                      float(self.low[i]), float(self.close[i]), float(self.volume[i]))

    @property
    def bars(self) -> list[Candle]:
        return [self[i] for i in range(len(self))]

    def index_of(self, open_time: int) -> int | None:
        """Position of the bar opening at ``open_time``, or None if absent."""
        i = int(np.searchsorted(self.open_time, open_time))
        if i < len(self.open_time) and self.open_time[i] == open_time:
            return i
        return None

    def open_at(self, open_time: int) -> float | None:
        i = self.index_of(open_time)
        return None if i is None else float(self.open[i])


def _parse_float(text: str, line: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(f"{name}={text!r} is not a number", line) from None
    if not math.isfinite(value):
        raise MalformedRow(f"{name}={text!r} is not finite", line)
    return value


def parse_candles(path: str | os.PathLike, symbol: str) -> CandleSeries:
    """Read a kline CSV file into a validated :class:`CandleSeries`.

    Rows must already be in time order; out-of-order or duplicate timestamps
    raise rather than being sorted.
    """
    times, opens, highs, lows, closes, vols = [], [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CANDLE_HEADER:
            raise MalformedRow(f"expected header {','.join(CANDLE_HEADER)}", 1)
        prev = None
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise MalformedRow(f"expected 6 fields, got {len(row)}", line)
            try:
                t = int(row[0])
            except ValueError:
                raise MalformedRow(f"open_time_ms={row[0]!r} is not an integer", line) from None
            if t % MINUTE_MS:
                raise MalformedRow("open_time_ms is not on a minute boundary", line)
            o, h, lo, c, v = (_parse_float(x, line, n) for x, n in zip(row[1:], CANDLE_HEADER[1:]))
            if min(o, h, lo, c) <= 0:
                raise NonPositivePrice("prices must be > 0", line)
            if v < 0:
                raise MalformedRow("volume must be >= 0", line)
            if lo > min(o, c) or h < max(o, c):
                raise MalformedRow("high/low do not bracket open/close", line)
            if prev is not None and t <= prev:
                raise NonMonotonicTimestamp(f"open_time {t} does not follow {prev}", line)
            prev = t
            times.append(t)
            opens.append(o)
            highs.append(h)
            lows.append(lo)
            closes.append(c)
            vols.append(v)
    return CandleSeries(symbol, times, opens, highs, lows, closes, vols)


def write_candles(series: CandleSeries, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CANDLE_HEADER)
        for i in range(len(series)):
            w.writerow([int(series.open_time[i]), repr(float(series.open[i])),
                        repr(float(series.high[i])), repr(float(series.low[i])),
                        repr(float(series.close[i])), repr(float(series.volume[i]))])


@dataclass
class TweetRecord:
    tweet_id: str
    created_at: int
    screen_name: str
    text: str
    language: str | None = None
    followers_count: int | None = None
    friends_count: int | None = None
    statuses_count: int | None = None
    favorites_count: int | None = None
    hashtags: list[str] | None = None
    mentions_screen_names: list[str] | None = None
    media_type: str | None = None
    retweet_text: str | None = None
    retweet_screen_name: str | None = None
    retweet_followers_count: int | None = None
    retweet_friends_count: int | None = None
    retweet_lag_ms: int | None = None
    quoted_text: str | None = None
    quoted_screen_name: str | None = None
    quoted_followers_count: int | None = None
    quoted_friends_count: int | None = None
    quoted_lag_ms: int | None = None
    sentiment: float | None = None
    tokens: list[str] | None = None

    @property
    def is_retweet(self) -> bool:
        return self.retweet_text is not None

    @property
    def is_quote(self) -> bool:
        return self.quoted_text is not None

    def to_dict(self) -> dict:
        return asdict(self)


TWEET_FIELDS = tuple(f.name for f in fields(TweetRecord))
REQUIRED_TWEET_FIELDS = ("tweet_id", "created_at", "screen_name", "text")
INT_FIELDS = ("followers_count", "friends_count", "statuses_count", "favorites_count",
              "retweet_followers_count", "retweet_friends_count", "retweet_lag_ms",
              "quoted_followers_count", "quoted_friends_count", "quoted_lag_ms")
LIST_FIELDS = ("hashtags", "mentions_screen_names", "tokens")
MEDIA_TYPES = ("photo", "video")


def _tweet_from_obj(obj: dict, line: int) -> TweetRecord:
    if not isinstance(obj, dict):
        raise MalformedRow("record is not an object", line)
    for key in REQUIRED_TWEET_FIELDS:
        if obj.get(key) is None:
            raise MalformedRow(f"missing {key}", line)
    unknown = set(obj) - set(TWEET_FIELDS) - {"is_retweet", "is_quote"}
    if unknown:
        raise MalformedRow(f"unknown keys {sorted(unknown)}", line)
    kw = {k: obj.get(k) for k in TWEET_FIELDS}
    try:
        kw["tweet_id"] = str(kw["tweet_id"])
        kw["created_at"] = int(kw["created_at"])
        for k in INT_FIELDS:
            if kw[k] is not None:
                kw[k] = int(kw[k])
        if kw["sentiment"] is not None:
            kw["sentiment"] = float(kw["sentiment"])
    except (TypeError, ValueError) as exc:
        raise MalformedRow(str(exc), line) from None
    for k in INT_FIELDS:
        if kw[k] is not None and kw[k] < 0:
            raise MalformedRow(f"{k} must be >= 0", line)
    for k in LIST_FIELDS:
        v = kw[k]
        if v is not None:
            if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
                raise MalformedRow(f"{k} must be a list of strings", line)
            if k != "tokens" and not v:
                kw[k] = None  # an empty list and a null both mean "absent"
    if kw["media_type"] is not None and kw["media_type"] not in MEDIA_TYPES:
        raise MalformedRow(f"media_type must be one of {MEDIA_TYPES}", line)
    for k in ("text", "screen_name", "language", "retweet_text", "quoted_text"):
        if kw[k] is not None and not isinstance(kw[k], str):
            raise MalformedRow(f"{k} must be a string", line)
    return TweetRecord(**kw)


def parse_tweets(path: str | os.PathLike) -> list[TweetRecord]:
    """Read a JSON-lines tweet file. Absent optional keys become None."""
    out: list[TweetRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRow(f"invalid JSON ({exc.msg})", line) from None
            rec = _tweet_from_obj(obj, line)
            if rec.tweet_id in seen:
                raise DuplicateTweetId(f"tweet_id {rec.tweet_id} repeated", line)
            seen.add(rec.tweet_id)
            out.append(rec)
    return out


def write_tweets(tweets: Iterable[TweetRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tweets:
            fh.write(json.dumps(t.to_dict(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


@dataclass
class GapReport:
    symbol: str
    gaps: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def missing_bars(self) -> int:
        return sum(g[2] for g in self.gaps)


def scan_gaps(series: CandleSeries) -> GapReport:
    """Missing minutes between the first and last bar.

    Each gap is ``(gap_start_ms, gap_end_ms, missing_bar_count)`` where start and
    end are the open times of the first and last missing bar.
    """
    t = series.open_time
    report = GapReport(series.symbol)
    if len(t) < 2:
        return report
    steps = np.diff(t) // MINUTE_MS
    for i in np.flatnonzero(steps > 1):
        missing = int(steps[i] - 1)
        start = int(t[i]) + MINUTE_MS
        report.gaps.append((start, start + (missing - 1) * MINUTE_MS, missing))
    return report


# ---------------------------------------------------------------- store layout

def read_symbol_map(path: str | os.PathLike) -> dict[str, str]:
    """``screen_name,symbol`` CSV with a header row."""
    out: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"screen_name", "symbol"}:
            raise MalformedRow("expected header screen_name,symbol", 1)
        for line, row in enumerate(reader, start=2):
            if not row["screen_name"] or not row["symbol"]:
                raise MalformedRow("empty field", line)
            out[row["screen_name"]] = row["symbol"]
    return out


def write_symbol_map(mapping: dict[str, str], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["screen_name", "symbol"])
        for name in sorted(mapping):
            w.writerow([name, mapping[name]])


@dataclass
class Store:
    series: dict[str, CandleSeries]
    tweets: list[TweetRecord]
    symbols: dict[str, str]
    root: Path | None = None

    def series_for(self, tweet: TweetRecord) -> CandleSeries | None:
        sym = self.symbols.get(tweet.screen_name)
        return None if sym is None else self.series.get(sym)


def ingest_dirs(candle_dir: str | os.PathLike, tweet_dir: str | os.PathLike,
                symbols_path: str | os.PathLike | None = None) -> Store:
    """Parse every ``*.csv`` candle file (symbol = file stem) and every
    ``*.jsonl`` tweet file. Tweet files are merged; ids must be unique across them.
    """
    candle_dir, tweet_dir = Path(candle_dir), Path(tweet_dir)
    series = {p.stem: parse_candles(p, p.stem) for p in sorted(candle_dir.glob("*.csv"))}
    tweets: list[TweetRecord] = []
    seen: set[str] = set()
    for p in sorted(tweet_dir.glob("*.jsonl")):
        for rec in parse_tweets(p):
            if rec.tweet_id in seen:
                raise DuplicateTweetId(f"tweet_id {rec.tweet_id} repeated in {p.name}")
            seen.add(rec.tweet_id)
            tweets.append(rec)
    tweets.sort(key=lambda t: (t.created_at, t.tweet_id))
    if symbols_path is None and (tweet_dir / "symbols.csv").exists():
        symbols_path = tweet_dir / "symbols.csv"
    symbols = read_symbol_map(symbols_path) if symbols_path is not None else {}
    for rep in map(scan_gaps, series.values()):
        if rep.gaps:
            logger.info("%s: %d gaps, %d missing bars", rep.symbol, len(rep.gaps), rep.missing_bars)
    return Store(series, tweets, symbols)


def save_store(store: Store, root: str | os.PathLike) -> Path:
    root = Path(root)
    (root / "candles").mkdir(parents=True, exist_ok=True)
    for sym in sorted(store.series):
        write_candles(store.series[sym], root / "candles" / f"{sym}.csv")
    write_tweets(store.tweets, root / "tweets.jsonl")
    write_symbol_map(store.symbols, root / "symbols.csv")
    store.root = root
    return root


def load_store(root: str | os.PathLike) -> Store:
    root = Path(root)
    series = {p.stem: parse_candles(p, p.stem) for p in sorted((root / "candles").glob("*.csv"))}
    tweets = parse_tweets(root / "tweets.jsonl")
    symbols = read_symbol_map(root / "symbols.csv") if (root / "symbols.csv").exists() else {}
    return Store(series, tweets, symbols, root)

