"""Beneficial-condition selection and the trade datasheet.

A mined condition becomes a trade plan when its mean cumulative return curve
has a min-max spread of at least 0.5%, its minimum in the first three periods,
its maximum at least five periods after the minimum, positive mean cumulative
excess return, and no retweet/quote predicate.

Execution convention: entry at the open of bar ``anchor + buy_offset - 1``,
exit at the open of bar ``anchor + sell_offset`` (minutes after the anchor).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .miner import Condition, ConditionStats, condition_id, condition_repr, parse_condition

MIN_SPREAD = 0.005
MAX_BUY_OFFSET = 3
MIN_HOLD = 5

DATASHEET_HEADER = ("condition_id", "predicates", "n", "buy_offset", "sell_offset",
                    "expected_spread", "sd_at_sell")


@dataclass(frozen=True)
class TradePlan:
    condition_id: str
    predicates: Condition
    n: int
    buy_offset: int
    sell_offset: int
    expected_spread: float
    sd_at_sell: float

    def __post_init__(self):
        if not 1 <= self.buy_offset <= self.sell_offset <= 15:
            raise ValueError("offsets must satisfy 1 <= buy <= sell <= 15")


def _passes(st: ConditionStats, min_spread: float, er_mode: str) -> TradePlan | None:
    if any(p.is_retweet_or_quote for p in st.condition):
        return None
    c = np.asarray(st.cum_mean, dtype=float)
    if not np.all(np.isfinite(c)):
        return None
    lo, hi = int(np.argmin(c)), int(np.argmax(c))  # first occurrence on ties
    spread = float(c[hi] - c[lo])
    if spread < min_spread:
        return None
    if lo + 1 > MAX_BUY_OFFSET or hi - lo < MIN_HOLD:
        return None
    cer = st.cum_excess_mean
    if cer is None:
        return None
    cer = np.asarray(cer, dtype=float)
    if er_mode == "all":
        if not np.all(cer > 0):
            return None
    elif er_mode == "at-sell":
        if not cer[hi] > 0:
            return None
    else:
        raise ValueError(f"er_mode must be 'all' or 'at-sell', not {er_mode!r}")
    return TradePlan(condition_id(st.condition), st.condition, st.n, lo + 1, hi + 1,
                     spread, float(st.cum_sd[hi]))


def select_beneficial(stats: Iterable[ConditionStats], min_spread: float = MIN_SPREAD,
                      er_mode: str = "all") -> list[TradePlan]:
    """Trade plans for every passing condition, highest spread first
    (ties by condition id)."""
    plans = [p for p in (_passes(s, min_spread, er_mode) for s in stats) if p is not None]
    plans.sort(key=lambda p: (-p.expected_spread, p.condition_id))
    return plans


def _f(x: float) -> str:
    return "" if x != x else repr(float(x))


def emit_datasheet(plans: Sequence[TradePlan], path: str | Path) -> None:
    ids = [p.condition_id for p in plans]
    if len(set(ids)) != len(ids):
        raise ValueError("condition ids must be unique")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASHEET_HEADER)
        for p in plans:
            w.writerow([p.condition_id, condition_repr(p.predicates), p.n, p.buy_offset,
                        p.sell_offset, _f(p.expected_spread), _f(p.sd_at_sell)])


def read_datasheet(path: str | Path) -> list[TradePlan]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DATASHEET_HEADER:
            raise ValueError(f"{path}: not a datasheet")
        for row in reader:
            out.append(TradePlan(row[0], parse_condition(row[1]), int(row[2]), int(row[3]),
                                 int(row[4]), float(row[5]),
                                 math.nan if row[6] == "" else float(row[6])))
    return out
