"""One-way ANOVA, Tukey HSD, Student t-tests and t confidence intervals.

F and t tail probabilities come from the regularized incomplete beta
function; the studentized range distribution for Tukey's test is taken from
scipy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special
from scipy.stats import studentized_range


@dataclass(frozen=True)
class StatResult:
    test: str                       # "anova", "tukey_pair", "t_test"
    statistic: float
    dof: tuple
    p_value: float
    ci95: Optional[tuple[float, float]] = None
    label: str = ""
    degenerate: bool = False        # zero within-group variance

    def line(self) -> str:
        dof = ",".join(_fmt_dof(d) for d in self.dof)
        ci = "" if self.ci95 is None else " ci95=[%.6f,%.6f]" % self.ci95
        flag = " degenerate" if self.degenerate else ""
        return "%s\t%s\t%.6f\t%s\t%.6g%s%s" % (self.test, self.label or "-", self.statistic, dof,
                                              self.p_value, ci, flag)


def _fmt_dof(d) -> str:
    return str(int(d)) if float(d).is_integer() else "%.3f" % d


def f_sf(f: float, d1: float, d2: float) -> float:
    """P(F > f) for the F(d1, d2) distribution."""
    if f <= 0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def t_sf_two_sided(t: float, dof: float) -> float:
    """P(|T| > |t|) for Student's t with ``dof`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return float(special.betainc(dof / 2.0, 0.5, dof / (dof + t * t)))


def t_quantile(q: float, dof: float) -> float:
    return float(special.stdtrit(dof, q))


def _groups(groups) -> list[np.ndarray]:
    gs = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(gs) < 2 or any(len(g) < 2 for g in gs):
        raise ValueError("need at least two groups of at least two values")
    return gs


def one_way_anova(groups: Sequence[Sequence[float]]) -> StatResult:
    gs = _groups(groups)
    k = len(gs)
    n = sum(len(g) for g in gs)
    grand = np.concatenate(gs).mean()
    means = [g.mean() for g in gs]
    ss_between = sum(len(g) * (m - grand) ** 2 for g, m in zip(gs, means))
    if all(m == means[0] for m in means):
        ss_between = 0.0
    ss_within = sum(((g - m) ** 2).sum() for g, m in zip(gs, means))
    d1, d2 = k - 1, n - k
    if ss_within == 0:
        f = 0.0 if ss_between == 0 else math.inf
        return StatResult("anova", f, (d1, d2), 1.0 if f == 0 else 0.0, degenerate=True)
    f = (ss_between / d1) / (ss_within / d2)
    return StatResult("anova", float(f), (d1, d2), f_sf(f, d1, d2))


def tukey_hsd(groups: Sequence[Sequence[float]], labels: Optional[Sequence[str]] = None) -> list[StatResult]:
    """All pairwise comparisons (i < j); statistic is mean_i - mean_j.

    Unequal group sizes use the Tukey-Kramer standard error.
    """
    gs = _groups(groups)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(gs))]
    k = len(gs)
    n = sum(len(g) for g in gs)
    dof = n - k
    means = [g.mean() for g in gs]
    mse = sum(((g - m) ** 2).sum() for g, m in zip(gs, means)) / dof
    qcrit = None
    out = []
    for i, j in itertools.combinations(range(k), 2):
        diff = float(means[i] - means[j])
        se = math.sqrt(mse / 2.0 * (1.0 / len(gs[i]) + 1.0 / len(gs[j])))
        label = "%s-%s" % (labels[i], labels[j])
        if se == 0:
            p = 1.0 if diff == 0 else 0.0
            out.append(StatResult("tukey_pair", diff, (k, dof), p, (diff, diff), label, degenerate=True))
            continue
        q = abs(diff) / se
        p = float(studentized_range.sf(q, k, dof))
        if qcrit is None:
            qcrit = float(studentized_range.ppf(0.95, k, dof))
        out.append(StatResult("tukey_pair", diff, (k, dof), min(max(p, 0.0), 1.0),
                              (diff - qcrit * se, diff + qcrit * se), label))
    return out


def two_sample_t(a: Sequence[float], b: Sequence[float], paired: bool = False, label: str = "") -> StatResult:
    """Student t-test: pooled variance for independent samples, differences when paired."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    if paired:
        if len(a) != len(b):
            raise ValueError("paired samples need equal sizes")
        d = a - b
        dof = len(d) - 1
        diff = float(d.mean())
        se = math.sqrt(d.var(ddof=1) / len(d))
    else:
        dof = len(a) + len(b) - 2
        diff = float(a.mean() - b.mean())
        sp2 = (((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()) / dof
        se = math.sqrt(sp2 * (1.0 / len(a) + 1.0 / len(b)))
    if se == 0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return StatResult("t_test", t, (dof,), 1.0 if diff == 0 else 0.0, (diff, diff), label, degenerate=True)
    t = diff / se
    half = t_quantile(0.975, dof) * se
    return StatResult("t_test", float(t), (dof,), t_sf_two_sided(t, dof), (diff - half, diff + half), label)


def t_interval(values: Sequence[float]) -> tuple[float, Optional[tuple[float, float]]]:
    """Mean and two-sided 95% t interval; the interval is None for fewer than two values."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        raise ValueError("no values")
    m = float(v.mean())
    if len(v) < 2:
        return m, None
    half = t_quantile(0.975, len(v) - 1) * float(v.std(ddof=1)) / math.sqrt(len(v))
    return m, (m - half, m + half)
