"""Aggregation of trees, sessions, and search events into count statistics.

Everything downstream (estimators, objectives, evaluation) consumes the
sparse counters collected here: page views, direct link transitions,
stop counts, indirect path counts, and search counts.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import AllStops, WindowMismatch, ZeroViews
from .traces import NavigationTree, SearchEvent, Session

#: Virtual sink page marking "no onward click" rows in transition TSVs.
STOP_SINK = "∅"


@dataclass
class TransitionStats:
    """Sparse counters aggregated over a log window.

    page_views[s]        total views of s
    direct[(s, t)]       direct clicks of the existing link (s, t)
    stops[s]             views of s with no onward click
    path_counts[(s, t)]  indirect navigation paths (edge depth >= 2)
    search_counts[(s,t)] search events from s landing on t
    graph_links          known existing links (always a superset of direct keys)
    """

    page_views: Counter = field(default_factory=Counter)
    direct: Counter = field(default_factory=Counter)
    stops: Counter = field(default_factory=Counter)
    path_counts: Counter = field(default_factory=Counter)
    search_counts: Counter = field(default_factory=Counter)
    graph_links: set = field(default_factory=set)

    def out_clicks(self, page: str) -> int:
        return sum(c for (s, _), c in self.direct.items() if s == page)


@dataclass
class ClickthroughMatrix:
    """Per-link clickthrough rates and per-page stop probabilities.

    entries[(s, t)] = direct[(s, t)] / page_views[s]; values in [0, 1]
    but rows are generally not distributions (multi-tab browsing).
    """

    entries: dict
    stop: dict

    def out_links(self, page: str) -> list:
        return [(pair, p) for pair, p in self.entries.items() if pair[0] == page]


def _count_tree_paths(tree: NavigationTree, paths: Counter,
                      per_view_dedup: bool) -> None:
    """Add indirect path counts for one tree.

    For each view v of page s, a descendant node u at edge depth >= 2
    counts toward (s, page(u)) iff page(u) does not occur strictly
    between v and u on the branch (absorption at the first occurrence;
    a depth-1 occurrence is a direct transition and blocks deeper ones).
    With per_view_dedup, each (view of s, target) pair counts at most once.
    """
    views = tree.views
    for v in views:
        source = v.page
        seen_for_view = set() if per_view_dedup else None
        # iterative DFS below v; on_path tracks pages between v and the cursor
        on_path: Counter = Counter()
        stack = [(child, 1, False) for child in reversed(v.children)]
        while stack:
            node_id, depth, done = stack.pop()
            node = views[node_id]
            if done:
                on_path[node.page] -= 1
                continue
            if on_path[node.page] == 0 and depth >= 2:
                key = (source, node.page)
                if seen_for_view is None:
                    paths[key] += 1
                elif key not in seen_for_view:
                    seen_for_view.add(key)
                    paths[key] += 1
            on_path[node.page] += 1
            stack.append((node_id, depth, True))
            for child in reversed(node.children):
                stack.append((child, depth + 1, False))


def _count_session_paths(session: Session, paths: Counter) -> None:
    """Session mode: count (s, t) once per session when s occurs before t."""
    seen_pages: list = []
    seen_set: set = set()
    counted: set = set()
    for t in session.pages:
        for s in seen_pages:
            if s != t and (s, t) not in counted:
                counted.add((s, t))
                paths[(s, t)] += 1
        if t not in seen_set:
            seen_set.add(t)
            seen_pages.append(t)


def _time_range(trees) -> tuple:
    lo, hi = None, None
    for tree in trees:
        for v in tree.views:
            lo = v.timestamp if lo is None else min(lo, v.timestamp)
            hi = v.timestamp if hi is None else max(hi, v.timestamp)
    return lo, hi


def accumulate(trees: Iterable[NavigationTree],
               search_events: Iterable[SearchEvent] = (),
               sessions: Optional[Iterable[Session]] = None,
               path_mode: str = "tree",
               per_view_dedup: bool = False,
               known_links: Optional[set] = None,
               check_window: bool = True) -> TransitionStats:
    """Aggregate traces into TransitionStats.

    path_mode "tree" counts indirect paths inside trees (first occurrence
    of the target per branch, edge depth >= 2); "session" counts sessions
    in which the source precedes the target.  Raises WindowMismatch when
    trees and search events cover disjoint time ranges.
    """
    if path_mode not in ("tree", "session"):
        raise ValueError(f"unknown path_mode {path_mode!r}")
    trees = list(trees)
    search_events = list(search_events)
    stats = TransitionStats()
    if known_links:
        stats.graph_links.update(known_links)

    if check_window and trees and search_events:
        lo, hi = _time_range(trees)
        ev_lo = min(e.timestamp for e in search_events)
        ev_hi = max(e.timestamp for e in search_events)
        if ev_lo > hi or ev_hi < lo:
            raise WindowMismatch(
                f"trees cover [{lo}, {hi}] but search events cover [{ev_lo}, {ev_hi}]"
            )

    for tree in trees:
        for v in tree.views:
            stats.page_views[v.page] += 1
            if not v.children:
                stats.stops[v.page] += 1
            for child in v.children:
                pair = (v.page, tree.views[child].page)
                stats.direct[pair] += 1
                stats.graph_links.add(pair)
        if path_mode == "tree":
            _count_tree_paths(tree, stats.path_counts, per_view_dedup)

    if path_mode == "session":
        for session in sessions or ():
            _count_session_paths(session, stats.path_counts)

    for event in search_events:
        stats.search_counts[(event.source, event.target)] += 1

    return stats


def merge(a: TransitionStats, b: TransitionStats) -> TransitionStats:
    """Field-wise sum of two shards; associative and commutative."""
    return TransitionStats(
        page_views=a.page_views + b.page_views,
        direct=a.direct + b.direct,
        stops=a.stops + b.stops,
        path_counts=a.path_counts + b.path_counts,
        search_counts=a.search_counts + b.search_counts,
        graph_links=a.graph_links | b.graph_links,
    )


def clickthrough_matrix(stats: TransitionStats) -> ClickthroughMatrix:
    """Empirical clickthrough rates c_st / c_s and stop probabilities."""
    entries = {}
    for (s, t), c in sorted(stats.direct.items()):
        views = stats.page_views.get(s, 0)
        if views == 0:
            raise ZeroViews(f"{c} transitions from {s!r} but zero views")
        entries[(s, t)] = c / views
    stop = {
        s: stats.stops.get(s, 0) / views
        for s, views in sorted(stats.page_views.items())
    }
    return ClickthroughMatrix(entries=entries, stop=stop)


def navigational_degree(stats: TransitionStats, page: str) -> float:
    """Average number of onward transitions per non-stopping view of a page."""
    views = stats.page_views.get(page, 0)
    stops = stats.stops.get(page, 0)
    if views - stops <= 0:
        raise AllStops(f"every recorded view of {page!r} stopped")
    clicks = sum(c for (s, _), c in stats.direct.items() if s == page)
    return clicks / (views - stops)


def degree_report(stats: TransitionStats) -> list:
    """Per-page (views, stops, stop probability, navigational degree) rows.

    Pages whose views all stopped report a degree of None.
    """
    rows = []
    clicks_by_source: Counter = Counter()
    for (s, _), c in stats.direct.items():
        clicks_by_source[s] += c
    for page in sorted(stats.page_views):
        views = stats.page_views[page]
        stops = stats.stops.get(page, 0)
        degree = clicks_by_source[page] / (views - stops) if views > stops else None
        rows.append({
            "page": page,
            "views": views,
            "stops": stops,
            "stop_probability": stops / views,
            "navigational_degree": degree,
        })
    return rows


# --- TSV round-trip -------------------------------------------------------

TRANSITIONS_TSV = "transitions.tsv"
PATHS_TSV = "paths.tsv"
PAGES_TSV = "pages.tsv"
SEARCHES_TSV = "searches.tsv"
LINK_RATES_TSV = "link_rates.tsv"


def _write_pair_tsv(path: Path, counter: Counter) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (s, t), c in sorted(counter.items()):
            fh.write(f"{s}\t{t}\t{c}\n")


def _read_pair_tsv(path: Path) -> Counter:
    out: Counter = Counter()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            s, t, c = line.rstrip("\n").split("\t")
            out[(s, t)] = int(c)
    return out


def write_stats(stats: TransitionStats, out_dir) -> list:
    """Write the stats TSV bundle; returns the written paths.

    transitions.tsv carries the pairwise direct-transition counts plus
    stop rows against the virtual sink; pages.tsv carries exact view and
    stop counts so the clickthrough matrix reloads bit-exactly.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    path = out_dir / TRANSITIONS_TSV
    with open(path, "w", encoding="utf-8") as fh:
        rows = list(stats.direct.items()) + [
            ((s, STOP_SINK), c) for s, c in stats.stops.items()
        ]
        for (s, t), c in sorted(rows):
            fh.write(f"{s}\t{t}\t{c}\n")
    paths.append(path)

    path = out_dir / PAGES_TSV
    with open(path, "w", encoding="utf-8") as fh:
        for page, views in sorted(stats.page_views.items()):
            fh.write(f"{page}\t{views}\t{stats.stops.get(page, 0)}\n")
    paths.append(path)

    _write_pair_tsv(out_dir / PATHS_TSV, stats.path_counts)
    paths.append(out_dir / PATHS_TSV)
    _write_pair_tsv(out_dir / SEARCHES_TSV, stats.search_counts)
    paths.append(out_dir / SEARCHES_TSV)

    matrix = clickthrough_matrix(stats)
    path = out_dir / LINK_RATES_TSV
    with open(path, "w", encoding="utf-8") as fh:
        for (s, t), p in sorted(matrix.entries.items()):
            fh.write(f"{s}\t{t}\t{p!r}\n")
    paths.append(path)
    return paths


def load_stats(in_dir) -> TransitionStats:
    """Reload a stats TSV bundle written by write_stats."""
    in_dir = Path(in_dir)
    stats = TransitionStats()
    with open(in_dir / PAGES_TSV, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            page, views, stops = line.rstrip("\n").split("\t")
            stats.page_views[page] = int(views)
            if int(stops):
                stats.stops[page] = int(stops)
    for (s, t), c in _read_pair_tsv(in_dir / TRANSITIONS_TSV).items():
        if t == STOP_SINK:
            continue                      # authoritative stops come from pages.tsv
        stats.direct[(s, t)] = c
        stats.graph_links.add((s, t))
    stats.path_counts = _read_pair_tsv(in_dir / PATHS_TSV)
    stats.search_counts = _read_pair_tsv(in_dir / SEARCHES_TSV)
    return stats
