"""Plain-text and plot-ready renderings of pipeline outputs."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .eventstudy import N_PERIODS, DropReport, EventPanel
from .miner import BinScheme, ConditionStats, condition_repr
from .stats import PeriodMatrix, format_matrix

logger = logging.getLogger(__name__)


class EmptyGroup(ValueError):
    pass


@dataclass
class CurveSeries:
    label: str
    values: np.ndarray  # mean cumulative value at periods 1..15
    sd: np.ndarray | None = None
    n: int = 0

    def __post_init__(self):
        if len(self.values) != N_PERIODS:
            raise ValueError("a curve has exactly 15 points")

    @property
    def points(self) -> list[tuple[int, float]]:
        return [(k + 1, float(v)) for k, v in enumerate(self.values)]


def _curves_for(label: str, panel: EventPanel, rows: np.ndarray) -> list[CurveSeries]:
    if not rows.any():
        raise EmptyGroup(label)
    c = panel.cumret[rows]
    sd = c.std(axis=0, ddof=1) if len(c) > 1 else None
    out = [CurveSeries(f"{label}:return", c.mean(axis=0), sd, len(c))]
    ex = panel.excess[rows]
    ex = ex[~np.isnan(ex).any(axis=1)]
    if len(ex):
        cex = np.cumsum(ex, axis=1)
        out.append(CurveSeries(f"{label}:excess", cex.mean(axis=0),
                               cex.std(axis=0, ddof=1) if len(cex) > 1 else None, len(cex)))
    return out


def cumulative_curves(panel: EventPanel,
                      groups: Mapping[str, Iterable[str]] | None = None) -> list[CurveSeries]:
    """Mean cumulative return and excess-return curves, overall or per group.

    ``groups`` maps a label to the tweet ids in it; empty groups are skipped
    with a log note.
    """
    if groups is None:
        if len(panel) == 0:
            raise EmptyGroup("all")
        return _curves_for("all", panel, np.ones(len(panel), dtype=bool))
    out = []
    for label in groups:
        ids = set(groups[label])
        rows = np.array([tid in ids for tid in panel.tweet_ids], dtype=bool)
        try:
            out.extend(_curves_for(label, panel, rows))
        except EmptyGroup:
            logger.info("group %s has no windows; skipped", label)
    return out


def groups_by_bins(tweets: Iterable, variable: str, scheme: BinScheme) -> dict[str, list[str]]:
    """Tweet ids per bin of a numeric variable, labelled ``variable[lo,hi]``."""
    edges = (scheme.min,) + scheme.edges + (scheme.max,)
    out: dict[str, list[str]] = {}
    for t in tweets:
        v = getattr(t, variable, None)
        if v is None:
            continue
        b = scheme.assign(float(v))
        lo, hi = edges[b - 1], edges[min(b, len(edges) - 1)]
        out.setdefault(f"{variable}[{lo:g},{hi:g}]#{b}", []).append(t.tweet_id)
    return dict(sorted(out.items(), key=lambda kv: int(kv[0].rsplit("#", 1)[1])))


def _write_curves(curves: Sequence[CurveSeries], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "n", "period", "value", "sd"])
        for c in curves:
            for k in range(N_PERIODS):
                sd = "" if c.sd is None else repr(float(c.sd[k]))
                w.writerow([c.label, c.n, k + 1, repr(float(c.values[k])), sd])


def _curves_text(curves: Sequence[CurveSeries]) -> str:
    lines = ["label\tn\t" + "\t".join(f"t{k}" for k in range(1, N_PERIODS + 1))]
    for c in curves:
        lines.append(f"{c.label}\t{c.n}\t" + "\t".join(f"{v:.6f}" for v in c.values))
    return "\n".join(lines) + "\n"


def render(out_dir: str | Path, panel: EventPanel | None = None,
           matrix: PeriodMatrix | str | None = None,
           stats: Sequence[ConditionStats] | None = None,
           drop_report: DropReport | Mapping | None = None,
           backtest_summary: Mapping | None = None,
           groups: Mapping[str, Iterable[str]] | None = None) -> list[Path]:
    """Write every supplied object to ``out_dir`` and return the paths written.

    ``matrix`` may be a :class:`PeriodMatrix` or already-formatted table text,
    which is copied through unchanged.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def put(name: str, text: str) -> None:
        p = out / name
        p.write_text(text)
        written.append(p)

    summary = []
    if panel is not None:
        summary.append(f"windows\t{len(panel)}")
        if len(panel) == 0:
            put("curves.txt", "no event windows\n")
        else:
            curves = cumulative_curves(panel)
            _write_curves(curves, out / "curves.csv")
            written.append(out / "curves.csv")
            put("curves.txt", _curves_text(curves))
        if groups:
            gc = cumulative_curves(panel, groups)
            _write_curves(gc, out / "group_curves.csv")
            written.append(out / "group_curves.csv")
            put("group_curves.txt", _curves_text(gc))
    if matrix is not None:
        put("ttest_matrix.txt", matrix if isinstance(matrix, str) else format_matrix(matrix))
    if stats is not None:
        summary.append(f"conditions\t{len(stats)}")
        lines = ["condition_id\tn\tmax_cum_mean\targmax\tpredicates"]
        for s in sorted(stats, key=lambda s: -float(np.max(s.cum_mean))):
            lines.append(f"{s.condition_id}\t{s.n}\t{np.max(s.cum_mean):.6f}\t"
                         f"t{int(np.argmax(s.cum_mean)) + 1}\t{condition_repr(s.condition)}")
        put("conditions.txt", "\n".join(lines) + "\n")
    if drop_report is not None:
        d = drop_report.as_dict() if isinstance(drop_report, DropReport) else dict(drop_report)
        put("drops.json", json.dumps(d, indent=2, sort_keys=True) + "\n")
    if backtest_summary is not None:
        put("backtest.json", json.dumps(backtest_summary, indent=2, sort_keys=True) + "\n")
    put("summary.txt", "\n".join(summary) + "\n")
    return written
