"""Statistical comparison harness: paired/one-sample t-tests and summaries.

The Student-t tail probability is computed from the regularized incomplete
beta function, evaluated with the modified Lentz continued fraction (kernel
tolerance 1e-10).  Normality testing is deliberately replaced by an adjusted
skewness diagnostic: with large N, approximate symmetry of the differences
is what justifies the parametric tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .metrics import MetricsReport

_EPS = 1e-10
_TINY = 1e-300
_MAX_ITER = 500


class StatsError(ValueError):
    pass


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise StatsError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: int) -> float:
    if df < 1:
        raise StatsError(f"degrees of freedom must be >= 1, got {df}")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return tail if t < 0 else 1.0 - tail


def two_sided_p(t: float, df: int) -> float:
    if df < 1:
        raise StatsError(f"degrees of freedom must be >= 1, got {df}")
    x = df / (df + t * t)
    return min(max(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0), 1.0)


@dataclass(frozen=True)
class StatTestResult:
    t: float
    df: int
    p: float

    def to_json(self) -> dict:
        return {"t": self.t, "df": self.df, "p": self.p}


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _sample_sd(xs: list[float]) -> float:
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def paired_t(x: list[float], y: list[float]) -> StatTestResult:
    """Paired-samples t-test on d = x - y with two-sided p."""
    if len(x) != len(y):
        raise StatsError(f"paired samples differ in length: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise StatsError("paired t-test needs at least 2 pairs")
    d = [a - b for a, b in zip(x, y)]
    sd = _sample_sd(d)
    if sd == 0.0:
        raise StatsError("paired differences have zero variance (all identical)")
    n = len(d)
    t = _mean(d) / (sd / math.sqrt(n))
    return StatTestResult(t=t, df=n - 1, p=two_sided_p(t, n - 1))


def one_sample_t(x: list[float], mu0: float) -> StatTestResult:
    if len(x) < 2:
        raise StatsError("one-sample t-test needs at least 2 observations")
    sd = _sample_sd(x)
    if sd == 0.0:
        raise StatsError("sample has zero variance")
    n = len(x)
    t = (_mean(x) - mu0) / (sd / math.sqrt(n))
    return StatTestResult(t=t, df=n - 1, p=two_sided_p(t, n - 1))


def symmetry_check(d: list[float]) -> float:
    """Adjusted Fisher-Pearson sample skewness; |skew| > 1 reads as asymmetric."""
    n = len(d)
    if n < 3:
        raise StatsError("skewness needs at least 3 observations")
    m = _mean(d)
    m2 = sum((x - m) ** 2 for x in d) / n
    if m2 == 0.0:
        raise StatsError("sample has zero variance")
    m3 = sum((x - m) ** 3 for x in d) / n
    g1 = m3 / m2**1.5
    return g1 * math.sqrt(n * (n - 1)) / (n - 2)


def is_asymmetric(skewness: float) -> bool:
    return abs(skewness) > 1.0


# -- summary tables -----------------------------------------------------------

METRIC_KEYS = ("n_words", "fres", "cosine")


@dataclass(frozen=True)
class PairMetrics:
    """Per-pair measurements of the plain narrative and its refined explanation."""

    pair_id: str
    baseline: MetricsReport
    refined: MetricsReport


@dataclass(frozen=True)
class SummaryCell:
    method: str
    specificity: int
    metric: str
    mean: float | None


@dataclass(frozen=True)
class SummaryTest:
    specificity: int
    metric: str
    result: StatTestResult | None
    skewness: float | None
    note: str | None = None


@dataclass
class SummaryTable:
    cells: list[SummaryCell] = field(default_factory=list)
    tests: list[SummaryTest] = field(default_factory=list)
    n_pairs: dict[int, int] = field(default_factory=dict)

    def cell(self, method: str, specificity: int, metric: str) -> SummaryCell:
        for c in self.cells:
            if (c.method, c.specificity, c.metric) == (method, specificity, metric):
                return c
        raise KeyError((method, specificity, metric))

    def test(self, specificity: int, metric: str) -> SummaryTest:
        for t in self.tests:
            if (t.specificity, t.metric) == (specificity, metric):
                return t
        raise KeyError((specificity, metric))

    def to_json(self) -> dict:
        return {
            "n_pairs": {str(k): v for k, v in sorted(self.n_pairs.items())},
            "cells": [
                {
                    "method": c.method,
                    "specificity": c.specificity,
                    "metric": c.metric,
                    "mean": c.mean,
                }
                for c in self.cells
            ],
            "tests": [
                {
                    "specificity": t.specificity,
                    "metric": t.metric,
                    "t": t.result.t if t.result else None,
                    "df": t.result.df if t.result else None,
                    "p": t.result.p if t.result else None,
                    "skewness": t.skewness,
                    "note": t.note,
                }
                for t in self.tests
            ],
        }

    def render_text(self) -> str:
        lines = []
        lines.append("Mean metric values per method and specificity level")
        header = f"{'method':<10} {'spec':>4}  {'n_words':>10} {'fres':>10} {'cosine':>10}"
        lines.append(header)
        lines.append("-" * len(header))
        for method in ("baseline", "refined"):
            for spec in sorted(self.n_pairs):
                row = [f"{method:<10}", f"{spec:>4} "]
                for metric in METRIC_KEYS:
                    mean = self.cell(method, spec, metric).mean
                    row.append(f"{mean:>10.4f}" if mean is not None else f"{'-':>10}")
                lines.append(" ".join(row))
        lines.append("")
        lines.append("Statistical tests (two-sided)")
        header = f"{'spec':>4} {'metric':<8} {'test':<12} {'t':>10} {'df':>5} {'p':>12} {'skew':>8}"
        lines.append(header)
        lines.append("-" * len(header))
        for t in self.tests:
            kind = "one-sample-t" if t.metric == "cosine" else "paired-t"
            if t.result is None:
                lines.append(
                    f"{t.specificity:>4} {t.metric:<8} {kind:<12} {'-':>10} {'-':>5} {'-':>12} "
                    f"{'-':>8}  {t.note or ''}".rstrip()
                )
            else:
                skew = f"{t.skewness:>8.3f}" if t.skewness is not None else f"{'-':>8}"
                lines.append(
                    f"{t.specificity:>4} {t.metric:<8} {kind:<12} {t.result.t:>10.3f} "
                    f"{t.result.df:>5} {t.result.p:>12.3e} {skew}"
                )
        return "\n".join(lines) + "\n"


def build_summary(per_level: dict[int, list[PairMetrics]], mu0: float) -> SummaryTable:
    """Means per (method, level, metric) plus the statistical test battery.

    Paired-t compares baseline and refined word counts and FRES; the cosine
    column gets a one-sample t-test against ``mu0`` (no default: the null
    value is an explicit analysis choice).
    """
    if sorted(per_level) != [1, 2, 3]:
        raise StatsError(f"summary needs levels 1..3, got {sorted(per_level)}")
    table = SummaryTable()
    for level in (1, 2, 3):
        rows = per_level[level]
        if not rows:
            raise StatsError(f"no pair metrics for specificity {level}")
        table.n_pairs[level] = len(rows)
        base_words = [float(r.baseline.n_words) for r in rows]
        ref_words = [float(r.refined.n_words) for r in rows]
        base_fres = [r.baseline.fres for r in rows]
        ref_fres = [r.refined.fres for r in rows]
        cosines = [r.refined.cosine for r in rows]
        if any(c is None for c in cosines):
            raise StatsError(f"missing cosine values at specificity {level}")
        table.cells.extend(
            [
                SummaryCell("baseline", level, "n_words", _mean(base_words)),
                SummaryCell("baseline", level, "fres", _mean(base_fres)),
                SummaryCell("baseline", level, "cosine", None),
                SummaryCell("refined", level, "n_words", _mean(ref_words)),
                SummaryCell("refined", level, "fres", _mean(ref_fres)),
                SummaryCell("refined", level, "cosine", _mean(cosines)),
            ]
        )
        for metric, base, ref in (("n_words", base_words, ref_words), ("fres", base_fres, ref_fres)):
            diffs = [b - r for b, r in zip(base, ref)]
            try:
                result = paired_t(base, ref)
                skew = symmetry_check(diffs) if len(diffs) >= 3 else None
                table.tests.append(SummaryTest(level, metric, result, skew))
            except StatsError:
                table.tests.append(SummaryTest(level, metric, None, None, note="no difference"))
        try:
            result = one_sample_t(cosines, mu0)
            table.tests.append(SummaryTest(level, "cosine", result, None))
        except StatsError:
            table.tests.append(SummaryTest(level, "cosine", None, None, note="zero variance"))
    return table
