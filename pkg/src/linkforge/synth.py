"""Synthetic browsing models and trace generation.

A ground-truth model fixes per-link clickthrough rates and per-page stop
probabilities; walks sampled from it produce navigation trees, which can
be serialized into the standard log TSV so the whole pipeline can be
exercised against known answers.  Hiding links from a model creates the
"nonexistent link" scenario: demand for a hidden link shows up only as
indirect traffic, while its original rate is kept as evaluation truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DisconnectedPair
from .traces import NavigationTree, PageView

MODES = ("single_tab", "multi_tab")

DEFAULT_MAX_DEPTH = 50
DEFAULT_CLOCK_START = 1_420_070_400_000      # an arbitrary fixed epoch, ms
DEFAULT_GAP_MS = 10_000


class TraceList(list):
    """Generated trees plus the count of depth-capped walks."""

    truncations: int = 0


@dataclass
class GroundTruthModel:
    """Browsing model over a fixed page set.

    single_tab: each page view follows exactly one link or stops; the
    constructor normalizes stop + link mass per source into a
    distribution.  multi_tab: every out-link is followed independently
    with its own probability; incoming rate mass per target must stay
    below 1 so the random-walk estimator's fixed point exists.
    """

    pages: list
    link_probs: dict                    # (source, target) -> rate
    stop_probs: dict = field(default_factory=dict)
    mode: str = "single_tab"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        known = set(self.pages)
        for (s, t), p in self.link_probs.items():
            if s not in known or t not in known:
                raise ValueError(f"link ({s!r}, {t!r}) references unknown pages")
            if p < 0:
                raise ValueError(f"negative rate for ({s!r}, {t!r})")
        if self.mode == "single_tab":
            self._normalize_single_tab()
        else:
            self._check_multi_tab()

    def _normalize_single_tab(self):
        for page in self.pages:
            links = [(pair, p) for pair, p in self.link_probs.items()
                     if pair[0] == page]
            stop = self.stop_probs.get(page, 0.0)
            mass = stop + sum(p for _, p in links)
            if mass <= 0:
                self.stop_probs[page] = 1.0
                continue
            self.stop_probs[page] = stop / mass
            for pair, p in links:
                self.link_probs[pair] = p / mass

    def _check_multi_tab(self):
        incoming: dict = {}
        for (s, t), p in self.link_probs.items():
            if p > 1:
                raise ValueError(f"rate above 1 for ({s!r}, {t!r})")
            incoming[t] = incoming.get(t, 0.0) + p
        bad = [t for t, mass in incoming.items() if mass >= 1.0]
        if bad:
            raise ValueError(
                f"incoming rate mass >= 1 for {sorted(bad)[:3]} (fixed point lost)"
            )

    def out_links(self, page: str) -> list:
        return sorted(
            ((t, p) for (s, t), p in self.link_probs.items() if s == page),
        )


def _transition_tables(model: GroundTruthModel) -> dict:
    """Per-page sampling tables: (targets, cumulative probabilities)."""
    tables = {}
    for page in model.pages:
        links = model.out_links(page)
        targets = [t for t, _ in links]
        probs = np.array([p for _, p in links], dtype=float)
        tables[page] = (targets, np.cumsum(probs))
    return tables


def generate_traces(model: GroundTruthModel, n_walks: int,
                    max_depth: int = DEFAULT_MAX_DEPTH,
                    seed: Optional[int] = None) -> TraceList:
    """Sample navigation trees from the model, deterministically per seed.

    Walk i starts at pages[i % n_pages], so every page gets start
    coverage.  single_tab walks are chains (one sampled link or stop per
    step); multi_tab walks are trees (independent coin per out-link).
    Walks cut at max_depth are tallied on the result's `truncations`.
    """
    if n_walks < 1:
        raise ValueError("n_walks must be >= 1")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    rng = np.random.default_rng(model.seed if seed is None else seed)
    tables = _transition_tables(model)
    traces = TraceList()
    for walk in range(n_walks):
        start = model.pages[walk % len(model.pages)]
        user = f"walker-{walk:07d}"
        if model.mode == "single_tab":
            tree, truncated = _single_tab_walk(model, tables, start, user,
                                               max_depth, rng)
        else:
            tree, truncated = _multi_tab_walk(model, tables, start, user,
                                              max_depth, rng)
        traces.append(tree)
        traces.truncations += truncated
    return traces


def _single_tab_walk(model, tables, start, user, max_depth, rng):
    views = [PageView(id=0, page=start, timestamp=0)]
    current = start
    truncated = 0
    for depth in range(1, max_depth + 1):
        targets, cumulative = tables[current]
        r = rng.random()
        if r < model.stop_probs.get(current, 0.0) or not targets:
            break
        idx = int(np.searchsorted(cumulative, r - model.stop_probs.get(current, 0.0),
                                  side="right"))
        idx = min(idx, len(targets) - 1)
        nxt = targets[idx]
        parent = len(views) - 1
        views.append(PageView(id=len(views), page=nxt, timestamp=depth,
                              parent=parent))
        views[parent].children.append(len(views) - 1)
        current = nxt
    else:
        truncated = 1
    return NavigationTree(user=user, views=views), truncated


def _multi_tab_walk(model, tables, start, user, max_depth, rng):
    views = [PageView(id=0, page=start, timestamp=0)]
    truncated = 0
    frontier = [0]                       # BFS so timestamps grow with depth
    depth = 0
    while frontier:
        depth += 1
        next_frontier = []
        for node_id in frontier:
            page = views[node_id].page
            targets, _ = tables[page]
            if not targets:
                continue
            if depth > max_depth:
                truncated = 1
                continue
            draws = rng.random(len(targets))
            for t, r in zip(targets, draws):
                if r < model.link_probs[(page, t)]:
                    child = PageView(id=len(views), page=t, timestamp=depth,
                                     parent=node_id)
                    views.append(child)
                    views[node_id].children.append(child.id)
                    next_frontier.append(child.id)
        frontier = next_frontier
    return NavigationTree(user=user, views=views), truncated


def emit_synthetic_log(trees: Iterable[NavigationTree],
                       clock_start: int = DEFAULT_CLOCK_START,
                       gap_ms: int = DEFAULT_GAP_MS) -> list:
    """Serialize trees into 7-column log TSV lines.

    Each tree gets its own synthetic client (distinct IP/agent pair), so
    user derivation keeps trees apart.  Views are emitted in DFS preorder
    with strictly increasing timestamps and referers set to parent pages,
    which makes trace reconstruction exact whenever a page appears at
    most once per tree (and for all chains).
    """
    lines = []
    clock = clock_start
    for idx, tree in enumerate(trees):
        ip = f"10.{(idx >> 16) & 255}.{(idx >> 8) & 255}.{idx & 255}"
        agent = f"synthbrowser/1.0 (walker {idx})"
        order = _preorder(tree)
        for view_id in order:
            view = tree.views[view_id]
            url = view.page if view.page.startswith("/") else "/" + view.page
            if view.parent is None:
                referer = ""
            else:
                parent_page = tree.views[view.parent].page
                referer = parent_page if parent_page.startswith("/") else "/" + parent_page
            lines.append(f"{clock}\t{ip}\t\t{agent}\t{url}\t{referer}\t200")
            clock += gap_ms
    return lines


def _preorder(tree: NavigationTree) -> list:
    order = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(reversed(tree.views[node].children))
    return order


def reachable(link_pairs: Iterable[tuple], source: str, target: str) -> bool:
    """Directed reachability of target from source over the given links."""
    adjacency: dict = {}
    for s, t in link_pairs:
        adjacency.setdefault(s, []).append(t)
    frontier = [source]
    seen = {source}
    while frontier:
        node = frontier.pop()
        if node == target:
            return True
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return target in seen


def hide_links(model: GroundTruthModel, hidden: Sequence[tuple]) -> tuple:
    """Remove links from a model, keeping their rates as evaluation truth.

    Returns (reduced model, {hidden pair -> original rate}).  Every
    hidden pair must stay connected through the remaining links, so its
    demand can still flow indirectly; otherwise DisconnectedPair.
    single_tab models renormalize, which mirrors users redistributing
    their clicks over the links that still exist.
    """
    hidden = [tuple(pair) for pair in hidden]
    for pair in hidden:
        if pair not in model.link_probs:
            raise ValueError(f"{pair} is not a link of the model")
    truth = {pair: model.link_probs[pair] for pair in hidden}
    remaining = {pair: p for pair, p in model.link_probs.items()
                 if pair not in set(hidden)}
    for s, t in hidden:
        if not reachable(remaining.keys(), s, t):
            raise DisconnectedPair(f"hiding ({s!r}, {t!r}) disconnects the pair")
    reduced = GroundTruthModel(
        pages=list(model.pages),
        link_probs=dict(remaining),
        stop_probs=dict(model.stop_probs),
        mode=model.mode,
        seed=model.seed,
    )
    return reduced, truth


# --- model spec JSON --------------------------------------------------------

def model_to_dict(model: GroundTruthModel) -> dict:
    return {
        "pages": list(model.pages),
        "links": [
            {"s": s, "t": t, "p": p}
            for (s, t), p in sorted(model.link_probs.items())
        ],
        "stops": dict(sorted(model.stop_probs.items())),
        "mode": model.mode,
        "seed": model.seed,
    }


def model_from_dict(doc: dict) -> GroundTruthModel:
    return GroundTruthModel(
        pages=list(doc["pages"]),
        link_probs={(l["s"], l["t"]): float(l["p"]) for l in doc.get("links", [])},
        stop_probs={k: float(v) for k, v in doc.get("stops", {}).items()},
        mode=doc.get("mode", "single_tab"),
        seed=int(doc.get("seed", 0)),
    )


def load_model(path) -> GroundTruthModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def save_model(model: GroundTruthModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
