"""Comparison statistics for populations of optimization runs.

Welch's t-test (two-sided p from the Student-t distribution through the
regularized incomplete beta function), Cohen's d, Hedges' g, Cliff's delta,
convergence-trace metrics and a batch-vs-batch stability check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np


class StatisticError(ValueError):
    """The statistic is undefined for the given samples (e.g. zero spread)."""


# ---------------------------------------------------------------------------
# Student-t distribution
# ---------------------------------------------------------------------------

_CF_MAX_ITER = 500
_CF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
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
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    p = betainc(0.5 * df, 0.5, df / (df + t * t))
    return min(max(p, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Two-sample statistics
# ---------------------------------------------------------------------------


def _sample(values, name: str, min_size: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size < min_size:
        raise StatisticError(f"{name} needs at least {min_size} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise StatisticError(f"{name} contains non-finite values")
    return arr


def welch_t(a, b) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p-value."""
    a = _sample(a, "a", 2)
    b = _sample(b, "b", 2)
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0.0:
        raise StatisticError("both samples are constant; the t statistic is undefined")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    # shares of se2 keep the squares away from underflow
    ra, rb = va / se2, vb / se2
    df = 1.0 / (ra * ra / (a.size - 1) + rb * rb / (b.size - 1))
    return float(t), t_two_sided_p(float(t), float(df))


def cohens_d(a, b) -> float:
    a = _sample(a, "a", 2)
    b = _sample(b, "b", 2)
    na, nb = a.size, b.size
    pooled = math.sqrt(((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2))
    if pooled == 0.0:
        raise StatisticError("pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / pooled)


def hedges_g(a, b) -> float:
    """Cohen's d times the small-sample correction ``1 - 3 / (4 N - 9)``."""
    n = np.size(a) + np.size(b)
    if n <= 3:
        raise StatisticError("Hedges' g needs more than 3 observations in total")
    return cohens_d(a, b) * (1.0 - 3.0 / (4.0 * n - 9.0))


def cliffs_delta(a, b) -> float:
    """(#{a_i > b_j} - #{a_i < b_j}) / (n_a n_b), counted over every pair."""
    a = _sample(a, "a", 1)
    b = _sample(b, "b", 1)
    dominance = int(np.sign(a[:, None] - b[None, :]).astype(np.int64).sum())
    return dominance / (a.size * b.size)


@dataclass(frozen=True)
class ComparisonReport:
    t_stat: float
    p_value: float
    cohens_d: float
    hedges_g: float
    cliffs_delta: float
    n_a: int
    n_b: int
    label_a: str = "a"
    label_b: str = "b"

    @property
    def hedges_d(self) -> float:
        return self.hedges_g

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hedges_d"] = self.hedges_g
        return out


def compare(a, b, label_a: str = "a", label_b: str = "b") -> ComparisonReport:
    t, p = welch_t(a, b)
    return ComparisonReport(
        t_stat=t,
        p_value=p,
        cohens_d=cohens_d(a, b),
        hedges_g=hedges_g(a, b),
        cliffs_delta=cliffs_delta(a, b),
        n_a=int(np.size(a)),
        n_b=int(np.size(b)),
        label_a=label_a,
        label_b=label_b,
    )


# ---------------------------------------------------------------------------
# Convergence-trace metrics
# ---------------------------------------------------------------------------


def best_so_far(values: Sequence[float]) -> list[float]:
    if len(values) == 0:
        raise ValueError("best_so_far needs at least one value")
    return np.minimum.accumulate(np.asarray(values, dtype=float)).tolist()


def improvement_rate(best: Sequence[float]) -> list[float]:
    if len(best) < 2:
        raise ValueError("improvement_rate needs at least two values")
    return np.diff(np.asarray(best, dtype=float)).tolist()


def cumulative_distribution(n: int) -> list[float]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [(i + 1) / n for i in range(n)]


# ---------------------------------------------------------------------------
# Stability over run counts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityRow:
    variant: str
    mode: str
    run_count: int
    t_stat: float
    p_value: float

    @property
    def stable(self) -> bool:
        return self.p_value > 0.05


@dataclass(frozen=True)
class StabilityTable:
    rows: tuple[StabilityRow, ...]

    def get(self, variant: str, mode: str, run_count: int) -> StabilityRow:
        for row in self.rows:
            if (row.variant, row.mode, row.run_count) == (variant, mode, run_count):
                return row
        raise KeyError((variant, mode, run_count))


def stability_check(
    variant_config,
    objective,
    run_counts: Sequence[int] = (10, 30, 50, 100),
    seed_a: int | None = None,
    seed_b: int | None = None,
    jobs: int = 1,
) -> StabilityTable:
    """Welch-test two independently seeded batches of ``n`` runs, per ``n``.

    Batch A uses seeds ``seed_a + i`` and batch B ``seed_b + i`` for
    ``i < max(run_counts)``; the two ranges must not overlap. Defaults:
    ``seed_a = config.seed`` and ``seed_b = seed_a + max(run_counts)``.
    """
    from .optimizer import ConfigError, OptimizationError, RunFailure, run_batch

    counts = [int(n) for n in run_counts]
    if not counts:
        raise ConfigError("run_counts must not be empty")
    if any(n < 2 for n in counts):
        raise ConfigError(f"every run count must be >= 2, got {counts}")
    if len(set(counts)) != len(counts):
        raise ConfigError(f"duplicate run counts in {counts}")
    top = max(counts)
    seed_a = variant_config.seed if seed_a is None else int(seed_a)
    seed_b = seed_a + top if seed_b is None else int(seed_b)
    if seed_a < seed_b + top and seed_b < seed_a + top:
        raise ConfigError(
            f"batch seed ranges [{seed_a}, {seed_a + top}) and [{seed_b}, {seed_b + top}) overlap"
        )

    # each run depends only on its seed, so smaller batches are prefixes of the largest
    batches = []
    for first in (seed_a, seed_b):
        results = run_batch(variant_config, objective, top, jobs=jobs, first_seed=first)
        failed = [r for r in results if isinstance(r, RunFailure)]
        if failed:
            raise OptimizationError(
                f"{len(failed)} run(s) failed, first: {failed[0].message}", failed[0].iteration
            )
        batches.append([r.best_y for r in results])
    rows = []
    for n in counts:
        t, p = welch_t(batches[0][:n], batches[1][:n])
        rows.append(StabilityRow(variant_config.variant, variant_config.mode, n, t, p))
    return StabilityTable(tuple(rows))
