"""Paired two-tailed t-tests and the period-by-period p-value matrix.

The Student-t tail probability comes from the regularized incomplete beta
function, evaluated with the modified Lentz continued fraction (absolute
accuracy better than 1e-10 for the degrees of freedom used here).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000

STAR_LEVELS = ((0.0001, "***"), (0.001, "**"), (0.05, "*"))


class LengthMismatch(ValueError):
    pass


class TooFewPairs(ValueError):
    pass


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b) (Numerical Recipes form, Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1.

    ``y`` may carry 1 - x when the caller can form it without cancellation.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if y is None:
        y = 1.0 - x
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log(y))
    front = math.exp(log_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def t_sf2(t: float, df: float) -> float:
    """Two-tailed p-value P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    tt = t * t
    return betainc(df / 2.0, 0.5, df / (df + tt), tt / (df + tt))


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * t_sf2(t, df)
    return 1.0 - tail if t >= 0 else tail


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    mean_difference: float


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Paired two-tailed t-test of ``a`` against ``b``.

    With zero spread in the differences the statistic is undefined; the
    p-value is then 1 when the mean difference is zero and 0 otherwise.
    """
    x, y = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise LengthMismatch(f"{x.shape} vs {y.shape}")
    n = x.size
    if n < 2:
        raise TooFewPairs("need at least 2 pairs")
    d = x - y
    md = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0 or not np.any(d != d[0]):
        md = float(d[0])
        if md == 0.0:
            return TTestResult(math.nan, df, 1.0, 0.0)
        return TTestResult(math.copysign(math.inf, md), df, 0.0, md)
    t = md / (sd / math.sqrt(n))
    return TTestResult(t, df, t_sf2(t, df), md)


def stars(p: float | None) -> str:
    """Significance marks: * p<0.05, ** p<0.001, *** p<0.0001 (half-open)."""
    if p is None or p != p:
        return ""
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return ""


@dataclass
class PeriodMatrix:
    # p[i, j] filled for i > j (row period i+1 vs column period j+1), NaN elsewhere
    p: np.ndarray
    t: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    n: int

    def pvalue(self, i: int, j: int) -> float:
        """p-value between 1-based periods ``i`` and ``j`` (order-free)."""
        if i == j:
            raise ValueError("diagonal is empty")
        hi, lo = max(i, j), min(i, j)
        return float(self.p[hi - 1, lo - 1])

    def star(self, i: int, j: int) -> str:
        return stars(self.pvalue(i, j))


def ttest_matrix(returns: np.ndarray) -> PeriodMatrix:
    """Pairwise paired t-tests between the 15 period columns of ``returns``
    (an ``(n_windows, 15)`` array or an EventPanel)."""
    r = getattr(returns, "returns", returns)
    r = np.asarray(r, dtype=float)
    if r.ndim != 2 or r.shape[0] == 0:
        raise ValueError("need a non-empty (n, periods) array")
    m = r.shape[1]
    p = np.full((m, m), np.nan)
    t = np.full((m, m), np.nan)
    for i in range(m):
        for j in range(i):
            res = paired_ttest(r[:, i], r[:, j]) if r.shape[0] >= 2 else None
            if res is not None:
                p[i, j], t[i, j] = res.p_value, res.t_statistic
    sd = r.std(axis=0, ddof=1) if r.shape[0] > 1 else np.full(m, np.nan)
    return PeriodMatrix(p, t, r.mean(axis=0), sd, r.shape[0])


# ------------------------------------------------------------- matrix files

def _short(x: float, digits: int) -> str:
    """Table number style: no leading zero, e.g. .023 / -.000014."""
    if x != x:
        return ""
    s = f"{x:.{digits}f}"
    if s.startswith("0."):
        return s[1:]
    if s.startswith("-0."):
        return "-" + s[2:]
    return s


def format_matrix(matrix: PeriodMatrix) -> str:
    """Lower-triangular p-value table with stars, then Mean and SD rows."""
    m = matrix.p.shape[0]
    labels = [f"t{k}" for k in range(1, m + 1)]
    lines = ["\t".join(["ROI"] + labels)]
    for i in range(m):
        cells = [labels[i]]
        for j in range(m):
            if j < i:
                pv = matrix.p[i, j]
                cells.append(_short(pv, 3) + stars(pv))
            elif j == i:
                cells.append("-")
            else:
                cells.append("")
        lines.append("\t".join(cells).rstrip("\t"))
    lines.append("\t".join(["Mean"] + [_short(x, 6) for x in matrix.mean]))
    lines.append("\t".join(["SD"] + [_short(x, 6) for x in matrix.sd]))
    lines.append("")
    lines.append(f"n = {matrix.n}. Significance levels: * <0.05 , ** <0.001 , *** <0.0001 ;"
                 " p-values from paired two-tailed t-tests.")
    return "\n".join(lines) + "\n"


def format_long(matrix: PeriodMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "t", "p", "stars"])
    m = matrix.p.shape[0]
    for i in range(m):
        for j in range(i):
            w.writerow([i + 1, j + 1, repr(float(matrix.t[i, j])), repr(float(matrix.p[i, j])),
                        stars(matrix.p[i, j])])
    return buf.getvalue()


def write_matrix(matrix: PeriodMatrix, path) -> tuple[str, str]:
    """Write the table layout to ``path`` and the long form next to it
    (``<stem>_long.csv``). Returns both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    long_path = path.with_name(path.stem + "_long.csv")
    path.write_text(format_matrix(matrix))
    long_path.write_text(format_long(matrix))
    return str(path), str(long_path)

