"""Clickthrough-rate estimators for links that do not exist yet.

Five estimators, all driven by TransitionStats or by the clickthrough
matrix of existing links:

  search          searches from s landing on t, per view of s
  path            indirect navigation paths s -> ... -> t, per view of s
  path_and_search sum of the two
  random_walk     fixed point of the absorbing-walk recursion, solved by
                  power iteration on the pairwise transition matrix
  mean_baseline   mean clickthrough rate of s's existing out-links

The random-walk estimator needs only the pairwise transition matrix, so
it also runs from a transitions TSV alone (restricted-data scenario).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy import sparse

from .errors import NoExistingLinks, NonConvergent, UnknownSource
from .stats import (STOP_SINK, ClickthroughMatrix, TransitionStats,
                    clickthrough_matrix)

METHODS = ("search", "path", "path_and_search", "random_walk", "mean_baseline")

DEFAULT_EPSILON = 1e-8
DEFAULT_MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class CandidateEstimate:
    """Predicted clickthrough rate for one nonexistent link."""

    source: str
    target: str
    method: str
    estimate: float


@dataclass
class RandomWalkResult:
    """Fixed point of the absorbing-walk recursion for one target page.

    q maps each source to the expected number of paths reaching the
    target; q[target] == 1 by definition.
    """

    target: str
    q: dict
    iterations: int
    residual: float


def search_proportion(stats: TransitionStats, source: str, target: str) -> float:
    views = stats.page_views.get(source, 0)
    if views == 0:
        raise UnknownSource(f"no recorded views of {source!r}")
    return stats.search_counts.get((source, target), 0) / views


def path_proportion(stats: TransitionStats, source: str, target: str) -> float:
    views = stats.page_views.get(source, 0)
    if views == 0:
        raise UnknownSource(f"no recorded views of {source!r}")
    return stats.path_counts.get((source, target), 0) / views


def path_and_search_proportion(stats: TransitionStats, source: str, target: str) -> float:
    return path_proportion(stats, source, target) + search_proportion(stats, source, target)


def mean_baseline(matrix: ClickthroughMatrix, source: str) -> float:
    """Mean clickthrough rate over the existing out-links of the source.

    The same value is returned for every candidate target of that source.
    """
    rates = [p for (s, _), p in matrix.entries.items() if s == source]
    if not rates:
        raise NoExistingLinks(f"{source!r} has no existing out-links with rates")
    return sum(rates) / len(rates)


# --- random walk ----------------------------------------------------------

class _WalkMatrix:
    """Sparse pairwise transition matrix indexed by page."""

    def __init__(self, entries: dict):
        pages = sorted({s for s, _ in entries} | {t for _, t in entries})
        self.index = {p: i for i, p in enumerate(pages)}
        self.pages = pages
        n = len(pages)
        rows = [self.index[s] for (s, _) in entries]
        cols = [self.index[t] for (_, t) in entries]
        vals = list(entries.values())
        self.matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        self.column_sums = np.asarray(self.matrix.sum(axis=0)).ravel()


def random_walk_estimate(matrix: ClickthroughMatrix, target: str,
                         epsilon: float = DEFAULT_EPSILON,
                         max_iterations: int = DEFAULT_MAX_ITERATIONS) -> RandomWalkResult:
    """Expected number of navigation paths into `target` from every page,
    via power iteration over the existing-link clickthrough matrix.

    Requires every column sum of the matrix to stay below 1 (otherwise
    the iteration has no fixed point and NonConvergent is raised).  The
    returned vector's residual, max_s |q[s] - sum_u p_su q[u]| over
    s != target, is at most epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    walk = _WalkMatrix(matrix.entries)
    bad = [t for t, c in zip(walk.pages, walk.column_sums) if c >= 1.0]
    if bad:
        raise NonConvergent(
            f"incoming rate mass >= 1 for {len(bad)} pages (first: {bad[0]!r})"
        )
    return _power_iterate(walk, target, epsilon, max_iterations)


def _power_iterate(walk: _WalkMatrix, target: str, epsilon: float,
                   max_iterations: int) -> RandomWalkResult:
    n = len(walk.pages)
    t_idx = walk.index.get(target)
    q = np.zeros(n)
    if t_idx is None:
        # target unseen in the matrix: nothing reaches it
        return RandomWalkResult(target, {target: 1.0}, 0, 0.0)
    q[t_idx] = 1.0
    for iteration in range(1, max_iterations + 1):
        q_next = walk.matrix @ q
        q_next[t_idx] = 1.0
        diff = float(np.max(np.abs(q_next - q)))
        if diff <= epsilon:
            # diff equals the residual of q off the target row, so q (not
            # q_next) is the iterate with the verified residual
            result = {p: float(q[i]) for i, p in enumerate(walk.pages)}
            result[target] = 1.0
            return RandomWalkResult(target, result, iteration, diff)
        q = q_next
    raise NonConvergent(
        f"no fixed point within {max_iterations} iterations for target {target!r}"
    )


def thread_cap() -> int:
    """Worker cap for internal parallelism (LINKFORGE_THREADS, default 1)."""
    try:
        return max(1, int(os.environ.get("LINKFORGE_THREADS", "1")))
    except ValueError:
        return 1


def random_walk_estimates(matrix: ClickthroughMatrix, targets: Iterable[str],
                          epsilon: float = DEFAULT_EPSILON,
                          max_iterations: int = DEFAULT_MAX_ITERATIONS,
                          threads: Optional[int] = None) -> dict:
    """Run the power iteration for a batch of targets; returns target -> result.

    Per-target runs are independent; with threads > 1 they execute in a
    thread pool.
    """
    targets = sorted(set(targets))
    walk = _WalkMatrix(matrix.entries)
    bad = [t for t, c in zip(walk.pages, walk.column_sums) if c >= 1.0]
    if bad:
        raise NonConvergent(
            f"incoming rate mass >= 1 for {len(bad)} pages (first: {bad[0]!r})"
        )
    workers = thread_cap() if threads is None else max(1, threads)
    if workers == 1 or len(targets) <= 1:
        return {t: _power_iterate(walk, t, epsilon, max_iterations) for t in targets}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = pool.map(
            lambda t: _power_iterate(walk, t, epsilon, max_iterations), targets
        )
        return dict(zip(targets, results))


# --- candidate universe and batch estimation ------------------------------

def candidate_pairs(stats: TransitionStats, min_evidence: int = 1) -> list:
    """Nonexistent links with enough indirect-path or search evidence.

    Returns sorted (source, target) pairs with at least `min_evidence`
    indirect paths or search events, excluding existing links and
    self-pairs.
    """
    pairs = set()
    for pair, count in stats.path_counts.items():
        if count >= min_evidence:
            pairs.add(pair)
    for pair, count in stats.search_counts.items():
        if count >= min_evidence:
            pairs.add(pair)
    return sorted(
        (s, t) for s, t in pairs
        if s != t and (s, t) not in stats.graph_links
    )


def estimate_candidates(stats: TransitionStats, method: str,
                        pairs: Optional[list] = None,
                        min_evidence: int = 1,
                        epsilon: float = DEFAULT_EPSILON,
                        max_iterations: int = DEFAULT_MAX_ITERATIONS,
                        threads: Optional[int] = None) -> list:
    """Estimate the clickthrough rate of every candidate pair with one method."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if pairs is None:
        pairs = candidate_pairs(stats, min_evidence)

    if method == "search":
        return [CandidateEstimate(s, t, method, search_proportion(stats, s, t))
                for s, t in pairs]
    if method == "path":
        return [CandidateEstimate(s, t, method, path_proportion(stats, s, t))
                for s, t in pairs]
    if method == "path_and_search":
        return [CandidateEstimate(s, t, method,
                                  path_and_search_proportion(stats, s, t))
                for s, t in pairs]

    matrix = clickthrough_matrix(stats)
    if method == "mean_baseline":
        out = []
        for s, t in pairs:
            try:
                value = mean_baseline(matrix, s)
            except NoExistingLinks:
                value = 0.0
            out.append(CandidateEstimate(s, t, method, value))
        return out

    results = random_walk_estimates(matrix, {t for _, t in pairs},
                                    epsilon, max_iterations, threads)
    return [
        CandidateEstimate(s, t, method, results[t].q.get(s, 0.0))
        for s, t in pairs
    ]


# --- restricted-data input -------------------------------------------------

def matrix_from_transitions_tsv(path) -> ClickthroughMatrix:
    """Build a clickthrough matrix from a pairwise-transition TSV alone.

    Rows with the stop sink as target encode stop counts.  Per-source
    view totals are taken as clicks plus stops, which is exact for
    single-tab traffic and the best available denominator when full logs
    are out of reach.
    """
    clicks: dict = {}
    stops: dict = {}
    totals: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            s, t, c = line.rstrip("\n").split("\t")
            count = int(c)
            totals[s] = totals.get(s, 0) + count
            if t == STOP_SINK:
                stops[s] = stops.get(s, 0) + count
            else:
                clicks[(s, t)] = clicks.get((s, t), 0) + count
    entries = {
        (s, t): c / totals[s] for (s, t), c in sorted(clicks.items())
    }
    stop = {s: stops.get(s, 0) / total for s, total in sorted(totals.items())}
    return ClickthroughMatrix(entries=entries, stop=stop)


# --- estimate TSV ----------------------------------------------------------

def write_estimates(estimates: Iterable[CandidateEstimate], path) -> int:
    """Write the candidate-estimate TSV: source, target, method, estimate."""
    n = 0
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for est in estimates:
            fh.write(f"{est.source}\t{est.target}\t{est.method}\t{est.estimate!r}\n")
            n += 1
    return n


def read_estimates(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            s, t, method, value = line.rstrip("\n").split("\t")
            out.append(CandidateEstimate(s, t, method, float(value)))
    return out
