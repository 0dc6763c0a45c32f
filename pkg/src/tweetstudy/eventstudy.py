"""Tweet-to-price alignment, 1-minute log returns and SMA excess returns.

Conventions
-----------
The anchor bar of a tweet is the first bar opening at or after its creation
time, so the alignment offset lies in ``[0, 60000)`` ms. Period ``k`` (1..15)
is the forward return ``ln(open[b+k] / open[b+k-1])``. The excess return at
period ``k`` subtracts the mean of the 30 one-minute returns immediately
preceding it; the baseline window rolls forward with ``k``.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import MINUTE_MS, CandleSeries, TweetRecord

logger = logging.getLogger(__name__)

N_PERIODS = 15
SMA_WINDOW = 30


class IncompleteWindow(Exception):
    """The 15-minute window after a tweet is not fully covered by bars."""


class InsufficientHistory(Exception):
    """Fewer than ``SMA_WINDOW`` consecutive returns precede the window."""


class InsufficientOverlap(Exception):
    pass


@dataclass
class ReturnSeries:
    symbol: str
    # open_time of the later bar of each consecutive pair
    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def log_returns(series: CandleSeries) -> ReturnSeries:
    """Log returns of consecutive-minute opens; a gap breaks the chain."""
    t, o = series.open_time, series.open
    if len(t) < 2:
        return ReturnSeries(series.symbol, np.empty(0, np.int64), np.empty(0))
    ok = np.diff(t) == MINUTE_MS
    r = np.log(o[1:] / o[:-1])
    return ReturnSeries(series.symbol, t[1:][ok], r[ok])


@dataclass
class EventWindow:
    tweet_id: str
    symbol: str
    anchor_bar_time: int
    offset_ms: int
    returns: np.ndarray
    excess: np.ndarray | None = None
    # open at anchor and at anchor + 15 min, kept for the telescoping check
    anchor_open: float = float("nan")
    exit_open: float = float("nan")

    @property
    def cumret(self) -> np.ndarray:
        return np.cumsum(self.returns)

    @property
    def cum_excess(self) -> np.ndarray | None:
        return None if self.excess is None else np.cumsum(self.excess)


def anchor_time(created_at: int) -> int:
    """Open time of the first minute bar at or after ``created_at``."""
    return -(-created_at // MINUTE_MS) * MINUTE_MS


def _contiguous(series: CandleSeries, i: int, j: int) -> bool:
    """True when bars ``i..j`` (inclusive) exist and are consecutive minutes."""
    if i < 0 or j >= len(series):
        return False
    return int(series.open_time[j] - series.open_time[i]) == (j - i) * MINUTE_MS


def align_event(created_at: int, series: CandleSeries, tweet_id: str = "") -> EventWindow:
    """Join a tweet to the 15 returns following its anchor bar.

    Raises :class:`IncompleteWindow` when any of bars ``b..b+15`` is missing,
    including tweets before the first bar or within 15 minutes of the last.
    """
    a = anchor_time(created_at)
    i = series.index_of(a)
    if i is None or not _contiguous(series, i, i + N_PERIODS):
        raise IncompleteWindow(f"bars {a}..{a + N_PERIODS * MINUTE_MS} not all present")
    opens = series.open[i:i + N_PERIODS + 1]
    r = np.log(opens[1:] / opens[:-1])
    return EventWindow(tweet_id, series.symbol, a, a - created_at, r,
                       anchor_open=float(opens[0]), exit_open=float(opens[-1]))


def sma_excess(returns: Sequence[float], prior: Sequence[float],
               n: int = SMA_WINDOW) -> np.ndarray:
    """Excess returns over a rolling ``n``-return simple moving average.

    ``prior`` holds the returns before period 1 in time order (the last one
    is the return ending at the anchor bar); only its last ``n`` are used.
    """
    prior = np.asarray(prior, dtype=float)
    if len(prior) < n:
        raise InsufficientHistory(f"need {n} prior returns, got {len(prior)}")
    r = np.asarray(returns, dtype=float)
    full = np.concatenate([prior[len(prior) - n:], r])
    windows = np.lib.stride_tricks.sliding_window_view(full, n)[:len(r)]
    # mean taken as offset from each window's first value: exact for flat windows
    ref = windows[:, 0]
    return r - (ref + (windows - ref[:, None]).mean(axis=1))


def prior_returns(series: CandleSeries, anchor: int, n: int = SMA_WINDOW) -> np.ndarray:
    """The ``n`` returns ending at the anchor bar; needs bars ``b-n..b`` contiguous."""
    i = series.index_of(anchor)
    if i is None or not _contiguous(series, i - n, i):
        raise InsufficientHistory(f"bars before {anchor} incomplete")
    opens = series.open[i - n:i + 1]
    return np.log(opens[1:] / opens[:-1])


@dataclass
class DropReport:
    counts: Counter = field(default_factory=Counter)
    windows: int = 0
    with_excess: int = 0

    def as_dict(self) -> dict:
        return {"windows": self.windows, "with_excess": self.with_excess,
                **{k: self.counts[k] for k in sorted(self.counts)}}


class EventPanel:
    """Event windows ordered by (symbol, tweet_id) with per-period column views."""

    def __init__(self, windows: Iterable[EventWindow]):
        self.windows = sorted(windows, key=lambda w: (w.symbol, w.tweet_id))
        ids = [w.tweet_id for w in self.windows]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate tweet_id in panel")
        n = len(self.windows)
        self.returns = np.array([w.returns for w in self.windows]).reshape(n, N_PERIODS)
        self.excess = np.full((n, N_PERIODS), np.nan)
        for row, w in enumerate(self.windows):
            if w.excess is not None:
                self.excess[row] = w.excess
        self.cumret = np.cumsum(self.returns, axis=1)
        self._index = {tid: row for row, tid in enumerate(ids)}

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def tweet_ids(self) -> list[str]:
        return [w.tweet_id for w in self.windows]

    @property
    def has_excess(self) -> np.ndarray:
        return ~np.isnan(self.excess).any(axis=1)

    def row(self, tweet_id: str) -> int | None:
        return self._index.get(tweet_id)

    def subset(self, tweet_ids: Iterable[str]) -> "EventPanel":
        keep = set(tweet_ids)
        return EventPanel(w for w in self.windows if w.tweet_id in keep)

    def column(self, period: int) -> np.ndarray:
        """Returns at period ``period`` (1-based) across all windows."""
        return self.returns[:, period - 1]


def build_panel(tweets: Iterable[TweetRecord], series: Mapping[str, CandleSeries],
                symbols: Mapping[str, str]) -> tuple[EventPanel, DropReport]:
    """Align every tweet to its symbol's bars.

    Windows without 30 minutes of pre-history keep raw returns but carry no
    excess returns; they are counted under ``insufficient_history``.
    """
    report = DropReport()
    windows = []
    for tw in tweets:
        sym = symbols.get(tw.screen_name)
        s = series.get(sym) if sym is not None else None
        if s is None:
            report.counts["no_symbol"] += 1
            continue
        try:
            w = align_event(tw.created_at, s, tw.tweet_id)
        except IncompleteWindow:
            report.counts["incomplete_window"] += 1
            continue
        try:
            w.excess = sma_excess(w.returns, prior_returns(s, w.anchor_bar_time))
            report.with_excess += 1
        except InsufficientHistory:
            report.counts["insufficient_history"] += 1
        windows.append(w)
    report.windows = len(windows)
    return EventPanel(windows), report


# ------------------------------------------------------------- diagnostics

@dataclass
class CorrelationReport:
    vs_btc: dict[str, float | None]
    vs_market: dict[str, float | None]

    @staticmethod
    def _mean(d):
        vals = [v for v in d.values() if v is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_vs_btc(self) -> float | None:
        return self._mean(self.vs_btc)

    @property
    def mean_vs_market(self) -> float | None:
        return self._mean(self.vs_market)


def _pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    dx, dy = x - x.mean(), y - y.mean()
    den = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    return None if den == 0 else float((dx * dy).sum() / den)


def _corr_on_common(a: ReturnSeries, b: ReturnSeries, min_overlap: int) -> float | None:
    common, ia, ib = np.intersect1d(a.times, b.times, return_indices=True)
    if len(common) < min_overlap:
        raise InsufficientOverlap(f"{a.symbol} vs {b.symbol}: {len(common)} common minutes")
    return _pearson(a.values[ia], b.values[ib])


def market_model_diagnostics(alt_series: Mapping[str, CandleSeries],
                             btc_usd: CandleSeries | None = None,
                             min_overlap: int = 3) -> CorrelationReport:
    """Correlation of each altcoin's minute returns with BTC-USD and with the
    equal-weighted average of all altcoin returns.

    Explains why CAPM-style market models were not used for excess returns;
    nothing downstream consumes it.
    """
    rets = {s: log_returns(alt_series[s]) for s in sorted(alt_series)}
    all_t = np.unique(np.concatenate([r.times for r in rets.values()])) if rets else np.empty(0, np.int64)
    acc = np.zeros(len(all_t))
    cnt = np.zeros(len(all_t))
    for r in rets.values():
        idx = np.searchsorted(all_t, r.times)
        acc[idx] += r.values
        cnt[idx] += 1
    market = ReturnSeries("MARKET", all_t, acc / np.maximum(cnt, 1))
    btc = log_returns(btc_usd) if btc_usd is not None else None
    vs_btc: dict[str, float | None] = {}
    vs_mkt: dict[str, float | None] = {}
    for s, r in rets.items():
        vs_mkt[s] = _corr_on_common(r, market, min_overlap)
        if btc is not None:
            vs_btc[s] = _corr_on_common(r, btc, min_overlap)
    return CorrelationReport(vs_btc, vs_mkt)


# ------------------------------------------------------------- panel file

def _fmt(x: float | None) -> str:
    return "" if x is None or x != x else repr(float(x))


def panel_header() -> list[str]:
    return (["tweet_id", "symbol", "anchor_bar_time", "offset_ms"]
            + [f"r{k}" for k in range(1, N_PERIODS + 1)]
            + [f"er{k}" for k in range(1, N_PERIODS + 1)]
            + [f"c{k}" for k in range(1, N_PERIODS + 1)])


def dumps_panel(panel: EventPanel) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(panel_header())
    for row, win in enumerate(panel.windows):
        ex = panel.excess[row]
        w.writerow([win.tweet_id, win.symbol, win.anchor_bar_time, win.offset_ms]
                   + [_fmt(x) for x in panel.returns[row]]
                   + [_fmt(x) for x in ex]
                   + [_fmt(x) for x in panel.cumret[row]])
    return buf.getvalue()


def write_panel(panel: EventPanel, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(dumps_panel(panel))


def read_panel(path) -> EventPanel:
    windows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != panel_header():
            raise ValueError(f"{path}: not a panel file")
        for row in reader:
            r = np.array([float(x) for x in row[4:4 + N_PERIODS]])
            er_raw = row[4 + N_PERIODS:4 + 2 * N_PERIODS]
            er = None if any(x == "" for x in er_raw) else np.array([float(x) for x in er_raw])
            windows.append(EventWindow(row[0], row[1], int(row[2]), int(row[3]), r, er))
    return EventPanel(windows)
