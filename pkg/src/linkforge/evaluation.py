"""Evaluation metrics for estimator quality and placement impact.

Paired prediction/truth metrics (MAE, Pearson, Spearman) with seeded
percentile-bootstrap confidence intervals, ranking precision, solution
overlap, CCDF curves, and later-window click-volume accounting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BadK, DegenerateVariance, EmptySeries

DEFAULT_RESAMPLES = 1000
DEFAULT_LEVEL = 0.95


@dataclass(frozen=True)
class PairedSeries:
    """Aligned predictions and ground-truth values."""

    predictions: tuple
    truths: tuple

    def __post_init__(self):
        if len(self.predictions) != len(self.truths):
            raise ValueError("predictions and truths must align")

    def __len__(self) -> int:
        return len(self.predictions)

    @classmethod
    def of(cls, predictions: Iterable[float], truths: Iterable[float]) -> "PairedSeries":
        return cls(tuple(float(x) for x in predictions),
                   tuple(float(y) for y in truths))

    def take(self, indices) -> "PairedSeries":
        preds = tuple(self.predictions[i] for i in indices)
        truths = tuple(self.truths[i] for i in indices)
        return PairedSeries(preds, truths)


def mean_absolute_error(series: PairedSeries) -> float:
    if len(series) == 0:
        raise EmptySeries("MAE of an empty series")
    p = np.asarray(series.predictions)
    t = np.asarray(series.truths)
    return float(np.mean(np.abs(p - t)))


def pearson(series: PairedSeries) -> float:
    """Product-moment correlation of predictions and truths."""
    if len(series) < 2:
        raise EmptySeries("correlation needs at least two pairs")
    p = np.asarray(series.predictions)
    t = np.asarray(series.truths)
    dp = p - p.mean()
    dt = t - t.mean()
    denom = np.sqrt(np.sum(dp * dp) * np.sum(dt * dt))
    if denom == 0.0:
        raise DegenerateVariance("zero variance in one of the series")
    return float(np.sum(dp * dt) / denom)


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """Ranks starting at 1; tied values share their mean rank."""
    arr = np.asarray(values, dtype=float)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(series: PairedSeries) -> float:
    """Rank correlation: Pearson over average-ranked data."""
    if len(series) < 2:
        raise EmptySeries("correlation needs at least two pairs")
    ranked = PairedSeries(
        tuple(average_ranks(series.predictions)),
        tuple(average_ranks(series.truths)),
    )
    return pearson(ranked)


@dataclass(frozen=True)
class BootstrapInterval:
    """Percentile bootstrap interval; iterates as (low, high)."""

    low: float
    high: float
    point: float
    resamples: int
    skipped: int

    def __iter__(self):
        return iter((self.low, self.high))


def bootstrap_ci(series: PairedSeries, metric: Callable[[PairedSeries], float],
                 resamples: int = DEFAULT_RESAMPLES, level: float = DEFAULT_LEVEL,
                 seed: int = 0) -> BootstrapInterval:
    """Percentile bootstrap CI of a paired metric, deterministic given seed.

    Pairs are resampled jointly with replacement; resamples on which the
    metric raises (degenerate variance and the like) are skipped and
    counted.  Each resample draws from its own PRNG stream derived from
    the seed, so execution order cannot change the interval.
    """
    if resamples < 100:
        raise ValueError("use at least 100 resamples")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    n = len(series)
    point = metric(series)
    streams = np.random.SeedSequence(seed).spawn(resamples)
    values = []
    skipped = 0
    for stream in streams:
        rng = np.random.default_rng(stream)
        sample = series.take(rng.integers(0, n, size=n))
        try:
            values.append(metric(sample))
        except (EmptySeries, DegenerateVariance):
            skipped += 1
    if not values:
        raise DegenerateVariance("every bootstrap resample was degenerate")
    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(values, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return BootstrapInterval(low=float(low), high=float(high), point=point,
                             resamples=len(values), skipped=skipped)


@dataclass(frozen=True)
class RankedLabels:
    """(score, is_relevant) pairs held sorted by score descending."""

    items: tuple

    @classmethod
    def of(cls, scored_labels: Iterable[tuple]) -> "RankedLabels":
        items = sorted(scored_labels, key=lambda it: -it[0])
        return cls(tuple((float(s), bool(l)) for s, l in items))

    def __len__(self) -> int:
        return len(self.items)


def precision_at_k(ranked: RankedLabels, k: int) -> float:
    """Fraction of relevant items among the top k."""
    if not 1 <= k <= len(ranked):
        raise BadK(f"k={k} outside [1, {len(ranked)}]")
    top = ranked.items[:k]
    return sum(1 for _, label in top if label) / k


def solution_jaccard(a: Iterable[tuple], b: Iterable[tuple]) -> float:
    """Overlap of two chosen link sets; 1.0 when both are empty."""
    sa, sb = set(a), set(b)
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def ccdf(values: Sequence[float]) -> list:
    """Complementary CDF evaluated at each distinct value.

    Returns (threshold, fraction of values >= threshold) pairs with
    thresholds ascending, so fractions are non-increasing from 1.0.
    """
    if len(values) == 0:
        raise EmptySeries("CCDF of an empty series")
    arr = np.sort(np.asarray(values, dtype=float))
    n = len(arr)
    distinct = np.unique(arr)
    fractions = 1.0 - np.searchsorted(arr, distinct, side="left") / n
    return [(float(v), float(f)) for v, f in zip(distinct, fractions)]


@dataclass
class ClickVolumeReport:
    """Clicks received by chosen links in a later log window."""

    per_link: list            # [(source, target, clicks)] in solution order
    total: int
    average_by_rank: list     # mean clicks over the top-k prefix, k = 1..K


def click_volume_report(chosen_pairs: Sequence[tuple], later_stats) -> ClickVolumeReport:
    """Tally later-window direct clicks on the chosen links, in rank order."""
    per_link = [
        (s, t, int(later_stats.direct.get((s, t), 0))) for s, t in chosen_pairs
    ]
    clicks = [c for _, _, c in per_link]
    averages = []
    running = 0
    for k, c in enumerate(clicks, start=1):
        running += c
        averages.append(running / k)
    return ClickVolumeReport(per_link=per_link, total=sum(clicks),
                             average_by_rank=averages)
