"""Navigation-trace reconstruction from time-ordered request records.

Requests are joined on URL/referer into per-user browsing trees: a
request whose referer names a page viewed earlier by the same user is
attached to the most recent such view, everything else becomes a new
root.  An exhaustive minimum-weight-parent oracle (`mst_oracle`) is kept
alongside to verify the greedy rule.  The module also mines search
events and splits request streams into one-hour-idle sessions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence
from urllib.parse import urlsplit, urlunsplit

from .logs import LogRecord, normalize_url, referer_class

#: Referer matches against views older than this are ignored (ms).
LOOKBACK_MS = 3_600_000
#: External search events require source-to-target gaps within this (ms).
SEARCH_WINDOW_MS = 300_000
#: Sessions split when the idle gap exceeds this (ms).
SESSION_GAP_MS = 3_600_000
#: Default site-internal search results URL prefix.
INTERNAL_SEARCH_PREFIX = "/search?q="


def page_id(url: str) -> str:
    """Page identifier used for referer joins: normalized URL without query."""
    url = normalize_url(url)
    if not url:
        return ""
    parts = urlsplit(url)
    return urlunsplit((parts.scheme, parts.netloc, parts.path, "", ""))


@dataclass
class PageView:
    """One page view inside a navigation tree."""

    id: int                      # dense index within the tree
    page: str
    timestamp: int
    parent: Optional[int] = None
    children: list = field(default_factory=list)


@dataclass
class NavigationTree:
    """A reconstructed browsing tree for one user.

    Views are topologically (and temporally) ordered; view 0 is the root.
    """

    user: str
    views: list

    @property
    def root(self) -> int:
        return 0

    def size(self) -> int:
        return len(self.views)

    def average_degree(self) -> Optional[float]:
        """Mean child count over non-leaf views; None for all-leaf trees."""
        degrees = [len(v.children) for v in self.views if v.children]
        if not degrees:
            return None
        return sum(degrees) / len(degrees)


@dataclass(frozen=True)
class SearchEvent:
    """Page t reached from page s via internal or external search."""

    source: str
    target: str
    kind: str                    # "internal" | "external"
    timestamp: int               # target view timestamp


@dataclass(frozen=True)
class Session:
    """Maximal page-view run of one user with idle gaps <= one hour."""

    user: str
    pages: tuple
    timestamps: tuple


def _forest_from_parents(user: str, records: Sequence[LogRecord],
                         parents: Sequence[Optional[int]]) -> list:
    """Assemble NavigationTrees from per-record parent indices."""
    n = len(records)
    root_of = [0] * n
    for i in range(n):
        p = parents[i]
        root_of[i] = i if p is None else root_of[p]

    members: dict = {}
    for i in range(n):
        members.setdefault(root_of[i], []).append(i)

    out = []
    for root in sorted(members):
        idxs = members[root]
        local = {g: j for j, g in enumerate(idxs)}
        views = []
        for g in idxs:
            rec = records[g]
            par = parents[g]
            views.append(PageView(
                id=local[g],
                page=page_id(rec.url),
                timestamp=rec.timestamp,
                parent=None if par is None else local[par],
            ))
        for v in views:
            if v.parent is not None:
                views[v.parent].children.append(v.id)
        out.append(NavigationTree(user=user, views=views))
    return out


def build_trees(user: str, records: Sequence[LogRecord],
                lookback_ms: int = LOOKBACK_MS) -> list:
    """Reassemble one user's navigation trees from time-sorted records.

    A record whose referer is a page seen earlier by the same user (within
    the look-back window) attaches to the most recent such view; ties on
    timestamps go to the later-ingested record.  Empty, external, and
    unmatched referers start new trees.  The output trees partition the
    input records.
    """
    parents: list = []
    last_view: dict = {}          # page -> index of most recent earlier view
    for i, rec in enumerate(records):
        parent = None
        if referer_class(rec.referer) == "internal":
            ref_page = page_id(rec.referer)
            j = last_view.get(ref_page)
            if j is not None and rec.timestamp - records[j].timestamp <= lookback_ms:
                parent = j
        parents.append(parent)
        last_view[page_id(rec.url)] = i
    return _forest_from_parents(user, records, parents)


def mst_oracle(user: str, records: Sequence[LogRecord],
               lookback_ms: int = LOOKBACK_MS) -> list:
    """Test oracle for build_trees: materialize every candidate parent edge
    (the full ambiguity DAG, weighted by time difference) and keep each
    node's minimum-weight parent, ties to the later-ingested candidate.
    """
    parents: list = []
    for i, rec in enumerate(records):
        parent = None
        if referer_class(rec.referer) == "internal":
            ref_page = page_id(rec.referer)
            best, best_weight = None, None
            for j in range(i):                      # every candidate edge
                if page_id(records[j].url) != ref_page:
                    continue
                weight = rec.timestamp - records[j].timestamp
                if weight > lookback_ms:
                    continue
                if best is None or weight <= best_weight:
                    best, best_weight = j, weight
            parent = best
        parents.append(parent)
    return _forest_from_parents(user, records, parents)


def forest_edge_weight(trees: Iterable[NavigationTree]) -> int:
    """Sum of parent-child time deltas across a forest."""
    total = 0
    for tree in trees:
        for v in tree.views:
            if v.parent is not None:
                total += v.timestamp - tree.views[v.parent].timestamp
    return total


def forest_partition(trees: Iterable[NavigationTree]) -> list:
    """Canonical forest fingerprint: sorted list of per-tree (page, ts) sets."""
    return sorted(
        tuple(sorted((v.page, v.timestamp) for v in t.views)) for t in trees
    )


def is_search_request(record: LogRecord, pattern: str = INTERNAL_SEARCH_PREFIX) -> bool:
    """True iff the request URL is a site-internal search results page."""
    return bool(pattern) and record.url.startswith(pattern)


def split_search_requests(records: Sequence[LogRecord],
                          pattern: str = INTERNAL_SEARCH_PREFIX) -> tuple:
    """Partition records into (content page views, internal-search requests)."""
    content, searches = [], []
    for rec in records:
        (searches if is_search_request(rec, pattern) else content).append(rec)
    return content, searches


def _referer_host(referer: str) -> str:
    return (urlsplit(referer).hostname or "") if referer else ""


def _is_engine(host: str, engine_domains) -> bool:
    return any(host == d or host.endswith("." + d) for d in engine_domains)


def mine_search_events(records: Sequence[LogRecord], engine_domains,
                       internal_search_pattern: str = INTERNAL_SEARCH_PREFIX,
                       window_ms: int = SEARCH_WINDOW_MS) -> list:
    """Extract search events from one user's time-sorted records.

    External: target t has a search-engine referer, the source s is the
    temporally closest preceding content view, and 0 < t.ts - s.ts <=
    window_ms.  Internal: a request matches the internal search pattern
    and a later content view names that request's URL as its referer; the
    source is the closest content view preceding the search request.
    """
    events = []
    last_content = None
    pending_search: dict = {}     # search result URL -> source page
    for rec in records:
        if is_search_request(rec, internal_search_pattern):
            if last_content is not None:
                pending_search[rec.url] = last_content.url
            continue
        source_url = pending_search.get(rec.referer)
        if source_url is not None:
            events.append(SearchEvent(
                source=page_id(source_url),
                target=page_id(rec.url),
                kind="internal",
                timestamp=rec.timestamp,
            ))
        elif referer_class(rec.referer) == "external":
            host = _referer_host(rec.referer)
            if _is_engine(host, engine_domains) and last_content is not None:
                gap = rec.timestamp - last_content.timestamp
                if 0 < gap <= window_ms:
                    events.append(SearchEvent(
                        source=page_id(last_content.url),
                        target=page_id(rec.url),
                        kind="external",
                        timestamp=rec.timestamp,
                    ))
        last_content = rec
    return events


def sessionize(user: str, records: Sequence[LogRecord],
               gap_ms: int = SESSION_GAP_MS) -> list:
    """Split one user's time-sorted records into sessions on idle gaps > gap_ms."""
    sessions = []
    pages: list = []
    stamps: list = []
    for rec in records:
        if stamps and rec.timestamp - stamps[-1] > gap_ms:
            sessions.append(Session(user, tuple(pages), tuple(stamps)))
            pages, stamps = [], []
        pages.append(page_id(rec.url))
        stamps.append(rec.timestamp)
    if pages:
        sessions.append(Session(user, tuple(pages), tuple(stamps)))
    return sessions


# --- JSONL serialization -------------------------------------------------

def tree_to_dict(tree: NavigationTree) -> dict:
    return {
        "user": tree.user,
        "root": tree.root,
        "views": [
            {"id": v.id, "page": v.page, "ts": v.timestamp, "parent": v.parent}
            for v in tree.views
        ],
    }


def tree_from_dict(doc: dict) -> NavigationTree:
    views = [
        PageView(id=v["id"], page=v["page"], timestamp=v["ts"], parent=v["parent"])
        for v in doc["views"]
    ]
    for v in views:
        if v.parent is not None:
            views[v.parent].children.append(v.id)
    return NavigationTree(user=doc["user"], views=views)


def write_trees_jsonl(trees: Iterable[NavigationTree], fh) -> int:
    n = 0
    for tree in trees:
        fh.write(json.dumps(tree_to_dict(tree), sort_keys=True) + "\n")
        n += 1
    return n


def read_trees_jsonl(fh) -> Iterator[NavigationTree]:
    for line in fh:
        if line.strip():
            yield tree_from_dict(json.loads(line))


def session_to_dict(session: Session) -> dict:
    return {"user": session.user, "pages": list(session.pages),
            "ts": list(session.timestamps)}


def session_from_dict(doc: dict) -> Session:
    return Session(doc["user"], tuple(doc["pages"]), tuple(doc["ts"]))
