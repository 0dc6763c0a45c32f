"""Conditional cluster mining over tweet variables.

Numeric variables are cut into five equal-width bins over their global range,
text variables become category / membership predicates, and conjunctions of
predicates are enumerated breadth-first with support-based pruning. Every
condition reaching ``min_support`` windows gets per-period summary statistics
of its returns, excess returns and cumulative returns.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .eventstudy import N_PERIODS, EventPanel
from .ingest import TweetRecord
from .textlab import tokenize

N_BINS = 5

NUMERIC_VARIABLES = (
    "sentiment", "followers_count", "friends_count", "statuses_count", "favorites_count",
    "retweet_followers_count", "retweet_friends_count",
    "quoted_followers_count", "quoted_friends_count",
)
CATEGORY_VARIABLES = (
    "screen_name", "language", "retweet_text", "retweet_screen_name",
    "quoted_text", "quoted_screen_name",
)
MEMBERSHIP_VARIABLES = {
    "tweet_word": "contains-word",
    "hashtags": "contains-hashtag",
    "mentions_screen_names": "contains-mention",
}
KINDS = ("equals-category", "in-numeric-bin", "contains-word",
         "contains-hashtag", "contains-mention", "has-media")
VARIABLES = frozenset(NUMERIC_VARIABLES + CATEGORY_VARIABLES
                      + tuple(MEMBERSHIP_VARIABLES) + ("media_type",))

PRESENCE_VARIABLES = (
    "language", "followers_count", "friends_count", "statuses_count", "favorites_count",
    "hashtags", "mentions_screen_names", "media_type",
    "retweet_text", "retweet_screen_name", "retweet_followers_count",
    "retweet_friends_count", "retweet_lag_ms",
    "quoted_text", "quoted_screen_name", "quoted_followers_count",
    "quoted_friends_count", "quoted_lag_ms",
)
VALUE_VARIABLES = (
    "created_at", "sentiment", "followers_count", "friends_count", "statuses_count",
    "favorites_count", "retweet_followers_count", "retweet_friends_count", "retweet_lag_ms",
    "quoted_followers_count", "quoted_friends_count", "quoted_lag_ms",
)


class EmptySample(ValueError):
    pass


# ----------------------------------------------------------------- binning

@dataclass(frozen=True)
class BinScheme:
    variable: str
    min: float
    max: float
    k: int = N_BINS

    @property
    def degenerate(self) -> bool:
        return not self.max > self.min

    @property
    def edges(self) -> tuple[float, ...]:
        """Interior cut points; empty for a degenerate range."""
        if self.degenerate:
            return ()
        width = self.max - self.min
        return tuple(self.min + j * width / self.k for j in range(1, self.k))

    def assign(self, value: float) -> int:
        """Bin index 1..k. The maximum falls in bin k; values outside the
        fitted range are clamped to the end bins."""
        if self.degenerate:
            return 1
        b = math.floor(self.k * (value - self.min) / (self.max - self.min)) + 1
        return min(max(b, 1), self.k)

    def to_dict(self) -> dict:
        return {"variable": self.variable, "min": self.min, "max": self.max, "k": self.k}


def bin_numeric(values: Sequence[float], k: int = N_BINS,
                variable: str = "") -> tuple[BinScheme, np.ndarray]:
    v = np.asarray(values, dtype=float)
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError("need at least one finite value and no non-finite ones")
    scheme = BinScheme(variable, float(v.min()), float(v.max()), k)
    return scheme, np.array([scheme.assign(x) for x in v], dtype=int)


def _get(record: Any, var: str):
    if isinstance(record, Mapping):
        return record.get(var)
    return getattr(record, var, None)


def fit_bin_schemes(tweets: Iterable[TweetRecord],
                    variables: Sequence[str] = NUMERIC_VARIABLES) -> dict[str, BinScheme]:
    """Global min/max schemes for every numeric variable with observed values."""
    tweets = list(tweets)
    out = {}
    for var in variables:
        vals = [float(x) for x in (_get(t, var) for t in tweets) if x is not None]
        if vals:
            out[var] = BinScheme(var, min(vals), max(vals))
    return out


# ------------------------------------------------------- correlation screens

@dataclass
class CorrelationMatrix:
    variables: tuple[str, ...]
    values: np.ndarray  # NaN where undefined
    flagged: list[tuple[str, str, float]] = field(default_factory=list)

    def get(self, a: str, b: str) -> float | None:
        v = self.values[self.variables.index(a), self.variables.index(b)]
        return None if np.isnan(v) else float(v)


def _present(x) -> bool:
    return x is not None and x != []


def _pearson_or_nan(x: np.ndarray, y: np.ndarray) -> float:
    if len(x) < 2:
        return math.nan
    dx, dy = x - x.mean(), y - y.mean()
    den = math.sqrt(float((dx * dx).sum()) * float((dy * dy).sum()))
    return math.nan if den == 0 else float((dx * dy).sum()) / den


def presence_correlation(tweets: Sequence[Any],
                         variables: Sequence[str] = PRESENCE_VARIABLES,
                         tol: float = 1e-12) -> CorrelationMatrix:
    """Correlation of "value is present" indicators; perfectly co-present
    pairs are flagged as candidates for dropping one of the two."""
    ind = np.array([[_present(_get(t, v)) for v in variables] for t in tweets],
                   dtype=float).reshape(len(tweets), len(variables))
    m = len(variables)
    vals = np.full((m, m), np.nan)
    flagged = []
    for i in range(m):
        for j in range(i, m):
            c = _pearson_or_nan(ind[:, i], ind[:, j])
            vals[i, j] = vals[j, i] = c
            if i != j and not math.isnan(c) and c >= 1 - tol:
                flagged.append((variables[i], variables[j], c))
    return CorrelationMatrix(tuple(variables), vals, flagged)


def value_correlation(tweets: Sequence[Any], variables: Sequence[str] = VALUE_VARIABLES,
                      threshold: float = 0.9) -> CorrelationMatrix:
    """Pearson correlation of raw values with pairwise deletion of nulls;
    pairs with ``|r| > threshold`` are flagged."""
    cols = [np.array([math.nan if _get(t, v) is None else float(_get(t, v)) for t in tweets])
            for v in variables]
    m = len(variables)
    vals = np.full((m, m), np.nan)
    flagged = []
    for i in range(m):
        for j in range(i, m):
            ok = ~(np.isnan(cols[i]) | np.isnan(cols[j]))
            c = _pearson_or_nan(cols[i][ok], cols[j][ok])
            vals[i, j] = vals[j, i] = c
            if i != j and not math.isnan(c) and abs(c) > threshold:
                flagged.append((variables[i], variables[j], c))
    return CorrelationMatrix(tuple(variables), vals, flagged)


# -------------------------------------------------------------- predicates

@dataclass(frozen=True)
class Predicate:
    variable: str
    kind: str
    value: Any

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown variable {self.variable!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        if self.kind == "in-numeric-bin" and not (isinstance(self.value, int)
                                                  and 1 <= self.value <= N_BINS):
            raise ValueError("bin index must be an int in 1..5")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.variable, self.kind, str(self.value))

    @property
    def is_retweet_or_quote(self) -> bool:
        return self.variable.startswith(("retweet_", "quoted_"))

    def to_list(self) -> list:
        return [self.variable, self.kind, self.value]

    def holds(self, tweet: TweetRecord, bins: Mapping[str, BinScheme]) -> bool:
        if self.kind == "contains-word":
            tokens = tweet.tokens if tweet.tokens is not None else tokenize(tweet.text)
            return self.value in tokens
        raw = _get(tweet, self.variable)
        if raw is None:
            return False
        if self.kind == "in-numeric-bin":
            scheme = bins.get(self.variable)
            return scheme is not None and scheme.assign(float(raw)) == self.value
        if self.kind in ("contains-hashtag", "contains-mention"):
            return self.value in raw
        return raw == self.value


Condition = tuple  # of Predicate, sorted by Predicate.key


def canonical(condition: Sequence[Predicate]) -> Condition:
    return tuple(sorted(condition, key=lambda p: p.key))


def condition_repr(condition: Sequence[Predicate]) -> str:
    return json.dumps([p.to_list() for p in canonical(condition)], ensure_ascii=False)


def condition_id(condition: Sequence[Predicate]) -> str:
    return "c" + hashlib.sha1(condition_repr(condition).encode("utf-8")).hexdigest()[:12]


def parse_condition(text: str) -> Condition:
    return canonical(Predicate(v, k, x) for v, k, x in json.loads(text))


def compatible(condition: Sequence[Predicate], p: Predicate) -> bool:
    """At most one predicate per (variable, kind), except distinct words."""
    for q in condition:
        if (q.variable, q.kind) == (p.variable, p.kind):
            if p.kind != "contains-word" or q.value == p.value:
                return False
    return True


def tweet_predicates(tweet: TweetRecord, vocabulary: Iterable[str] | None,
                     bins: Mapping[str, BinScheme]) -> set[Predicate]:
    """Every predicate this tweet satisfies. Words are restricted to ``vocabulary``
    (None admits all of the tweet's tokens)."""
    out: set[Predicate] = set()
    for var in NUMERIC_VARIABLES:
        raw = _get(tweet, var)
        if raw is not None and var in bins:
            out.add(Predicate(var, "in-numeric-bin", bins[var].assign(float(raw))))
    for var in CATEGORY_VARIABLES:
        raw = _get(tweet, var)
        if raw is not None:
            out.add(Predicate(var, "equals-category", raw))
    if tweet.media_type is not None:
        out.add(Predicate("media_type", "has-media", tweet.media_type))
    for var, kind in (("hashtags", "contains-hashtag"), ("mentions_screen_names", "contains-mention")):
        for x in _get(tweet, var) or ():
            out.add(Predicate(var, kind, x))
    tokens = tweet.tokens if tweet.tokens is not None else tokenize(tweet.text)
    vocab = None if vocabulary is None else (vocabulary if isinstance(vocabulary, (set, frozenset, dict))
                                             else set(vocabulary))
    for w in set(tokens):
        if vocab is None or w in vocab:
            out.add(Predicate("tweet_word", "contains-word", w))
    return out


# ------------------------------------------------------------ statistics

STAT_NAMES = ("min", "max", "q1", "q3", "mean", "median", "sd")


def summary_stats(samples: Sequence[float]) -> dict[str, float | None]:
    """Seven-number summary; quartiles use linear interpolation between order
    statistics (inclusive method), sd the n-1 denominator (None for n = 1)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySample("no samples")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    return {"min": float(x.min()), "max": float(x.max()), "q1": float(q1), "q3": float(q3),
            "mean": float(x.mean()), "median": float(med),
            "sd": float(x.std(ddof=1)) if x.size > 1 else None}


@dataclass
class PeriodStats:
    """Per-period summary arrays, each of length 15 (NaN where undefined)."""
    min: np.ndarray
    max: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    mean: np.ndarray
    median: np.ndarray
    sd: np.ndarray

    @classmethod
    def of(cls, block: np.ndarray) -> "PeriodStats":
        if block.shape[0] == 0:
            raise EmptySample("no rows")
        q1, med, q3 = np.quantile(block, [0.25, 0.5, 0.75], axis=0)
        sd = block.std(axis=0, ddof=1) if block.shape[0] > 1 else np.full(block.shape[1], np.nan)
        return cls(block.min(axis=0), block.max(axis=0), q1, q3,
                   block.mean(axis=0), med, sd)

    def get(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass
class ConditionStats:
    condition: Condition
    n: int
    returns: PeriodStats
    cum_mean: np.ndarray
    cum_sd: np.ndarray
    n_excess: int = 0
    excess: PeriodStats | None = None
    cum_excess_mean: np.ndarray | None = None

    @property
    def condition_id(self) -> str:
        return condition_id(self.condition)


def condition_stats(condition: Sequence[Predicate], panel: EventPanel,
                    rows: np.ndarray) -> ConditionStats:
    """Statistics over the panel windows selected by boolean mask ``rows``."""
    r = panel.returns[rows]
    c = panel.cumret[rows]
    n = r.shape[0]
    cum_sd = c.std(axis=0, ddof=1) if n > 1 else np.full(N_PERIODS, np.nan)
    ex = panel.excess[rows]
    ex = ex[~np.isnan(ex).any(axis=1)]
    st = ConditionStats(canonical(condition), n, PeriodStats.of(r), c.mean(axis=0), cum_sd,
                        n_excess=ex.shape[0])
    if ex.shape[0]:
        st.excess = PeriodStats.of(ex)
        st.cum_excess_mean = np.cumsum(ex, axis=1).mean(axis=0)
    return st


def predicate_masks(panel: EventPanel, tweets: Iterable[TweetRecord],
                    vocabulary: Iterable[str] | None,
                    bins: Mapping[str, BinScheme]) -> dict[Predicate, np.ndarray]:
    """Boolean row mask over the panel for every predicate seen in it."""
    by_id = {t.tweet_id: t for t in tweets}
    vocab = None if vocabulary is None else set(vocabulary)
    masks: dict[Predicate, np.ndarray] = {}
    for row, tid in enumerate(panel.tweet_ids):
        tw = by_id.get(tid)
        if tw is None:
            continue
        for p in tweet_predicates(tw, vocab, bins):
            m = masks.get(p)
            if m is None:
                m = masks[p] = np.zeros(len(panel), dtype=bool)
            m[row] = True
    return masks


def enumerate_conditions(panel: EventPanel, tweets: Iterable[TweetRecord],
                         max_arity: int = 2, min_support: int = 50,
                         vocabulary: Iterable[str] | None = None,
                         bins: Mapping[str, BinScheme] | None = None) -> list[ConditionStats]:
    """All predicate conjunctions of size 1..max_arity with support >= min_support.

    Breadth-first: a candidate of size k+1 is only formed from a frequent
    k-condition, and is dropped unless all its k-subsets are frequent.
    Output is sorted by canonical condition form.
    """
    if max_arity < 1:
        raise ValueError("max_arity must be >= 1")
    tweets = list(tweets)
    if bins is None:
        bins = fit_bin_schemes(tweets)
    masks = predicate_masks(panel, tweets, vocabulary, bins)
    singles = sorted((p for p, m in masks.items() if m.sum() >= min_support), key=lambda p: p.key)
    rank = {p: i for i, p in enumerate(singles)}

    frontier: dict[Condition, np.ndarray] = {(p,): masks[p] for p in singles}
    found = dict(frontier)
    for _ in range(max_arity - 1):
        nxt: dict[Condition, np.ndarray] = {}
        for cond, cmask in frontier.items():
            for p in singles[rank[cond[-1]] + 1:]:
                if not compatible(cond, p):
                    continue
                cand = cond + (p,)
                if any(sub not in frontier for sub in combinations(cand, len(cond))):
                    continue
                m = cmask & masks[p]
                if m.sum() >= min_support:
                    nxt[cand] = m
        if not nxt:
            break
        found.update(nxt)
        frontier = nxt

    out = [condition_stats(cond, panel, m) for cond, m in found.items()]
    out.sort(key=lambda s: condition_repr(s.condition))
    return out


# ------------------------------------------------------------ stats files

def _f(x) -> str:
    return "" if x is None or x != x else repr(float(x))


def _g(s: str) -> float:
    return math.nan if s == "" else float(s)


STATS_HEADER = (["condition_id", "period", "n", "n_excess"]
                + [f"ret_{s}" for s in STAT_NAMES] + [f"ex_{s}" for s in STAT_NAMES]
                + ["cum_mean", "cum_sd", "cum_excess_mean"])


def write_stats(stats: Sequence[ConditionStats], out_dir: str | Path) -> None:
    """``conditions.csv`` (id, predicates, n) and ``stats.csv`` (one row per
    condition and period)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "conditions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition_id", "predicates", "n", "n_excess"])
        for s in stats:
            w.writerow([s.condition_id, condition_repr(s.condition), s.n, s.n_excess])
    with open(out_dir / "stats.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for s in stats:
            for k in range(N_PERIODS):
                ex = [_f(s.excess.get(n)[k]) if s.excess else "" for n in STAT_NAMES]
                cem = _f(s.cum_excess_mean[k]) if s.cum_excess_mean is not None else ""
                w.writerow([s.condition_id, k + 1, s.n, s.n_excess]
                           + [_f(s.returns.get(n)[k]) for n in STAT_NAMES] + ex
                           + [_f(s.cum_mean[k]), _f(s.cum_sd[k]), cem])


def read_stats(out_dir: str | Path) -> list[ConditionStats]:
    out_dir = Path(out_dir)
    conds: dict[str, tuple[Condition, int, int]] = {}
    with open(out_dir / "conditions.csv", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            conds[row["condition_id"]] = (parse_condition(row["predicates"]),
                                          int(row["n"]), int(row["n_excess"]))
    rows: dict[str, list[dict]] = {cid: [] for cid in conds}
    with open(out_dir / "stats.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            rows[row["condition_id"]].append(row)
    out = []
    for cid, (cond, n, n_ex) in conds.items():
        rs = sorted(rows[cid], key=lambda r: int(r["period"]))
        if len(rs) != N_PERIODS:
            raise ValueError(f"{cid}: expected {N_PERIODS} period rows, got {len(rs)}")
        col = lambda name: np.array([_g(r[name]) for r in rs])  # noqa: E731
        st = ConditionStats(cond, n, PeriodStats(*(col(f"ret_{s}") for s in STAT_NAMES)),
                            col("cum_mean"), col("cum_sd"), n_excess=n_ex)
        if n_ex:
            st.excess = PeriodStats(*(col(f"ex_{s}") for s in STAT_NAMES))
            st.cum_excess_mean = col("cum_excess_mean")
        out.append(st)
    return out
