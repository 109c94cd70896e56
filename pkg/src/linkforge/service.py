"""Interactive review service: ranked suggestions with live re-ranking.

A review session wraps one placement problem.  Editors pull the current
ranking, accept or decline links, and the marginal gains of the touched
source's remaining candidates are recomputed against the accepted set —
the diminishing-returns loop, served over HTTP+JSON.

Sessions persist as a problem snapshot plus an append-only decision
journal; replaying the journal reproduces the exact session state.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import (AlreadyDecided, BudgetExhausted, InvalidProblem,
                     LinkforgeError, UnknownLink, UnknownSession)
from .placement import (PlacementProblem, SourceState, marginal_gain,
                        problem_from_dict, problem_to_dict)


@dataclass
class RankingEntry:
    source: str
    target: str
    p_est: float
    gain: float
    rank: int
    accepted_on_source: int

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "p_est": self.p_est,
            "gain": self.gain,
            "rank": self.rank,
            "accepted_on_source": self.accepted_on_source,
        }


class ReviewSession:
    """State of one review loop over a placement problem.

    Accepted links are treated as already placed: each remaining
    candidate's gain is the objective increase it would bring right now.
    Declined links simply vanish; budget is only spent by accepts.
    """

    def __init__(self, session_id: str, problem: PlacementProblem):
        self.id = session_id
        self.problem = problem
        self.accepted: list = []            # (source, target, gain at accept)
        self.declined: list = []
        self._by_pair = {c.pair: c for c in problem.candidates if c.p > 0}
        self._states: dict = {}             # source -> SourceState over accepted
        self._lock = threading.Lock()
        self._ranking = self._compute_ranking()

    # --- views ---

    @property
    def remaining_budget(self) -> int:
        return self.problem.budget - len(self.accepted)

    def ranking(self) -> list:
        return list(self._ranking)

    def suggestions(self, n: Optional[int] = None) -> list:
        if n is None:
            return self.ranking()
        return self._ranking[: max(n, 0)]

    # --- decisions ---

    def decide(self, source: str, target: str, verdict: str) -> dict:
        """Apply one verdict and return {remaining_budget, changed_ranks}."""
        if verdict not in ("accept", "decline"):
            raise ValueError(f"unknown verdict {verdict!r}")
        with self._lock:
            pair = (source, target)
            decided = {(s, t) for s, t, _ in self.accepted}
            decided.update((s, t) for s, t in self.declined)
            if pair in decided:
                raise AlreadyDecided(f"{pair} already received a verdict")
            entry = next((e for e in self._ranking
                          if (e.source, e.target) == pair), None)
            if entry is None:
                raise UnknownLink(f"{pair} is not in the current ranking")
            if verdict == "accept" and self.remaining_budget <= 0:
                raise BudgetExhausted("no budget left for accepts")

            before = {(e.source, e.target): e for e in self._ranking}
            if verdict == "accept":
                state = self._states.get(source, SourceState())
                gain = marginal_gain(self.problem.objective,
                                     self.problem.weight(source), state,
                                     self.problem.prior_mass(source),
                                     self._by_pair[pair].p)
                self.accepted.append((source, target, gain))
                self._states[source] = state.add(self._by_pair[pair].p)
            else:
                self.declined.append(pair)
            self._ranking = self._compute_ranking()

            changed = []
            for e in self._ranking:
                old = before.get((e.source, e.target))
                if old is None or old.rank != e.rank or old.gain != e.gain:
                    changed.append(e)
            return {
                "remaining_budget": self.remaining_budget,
                "changed_ranks": [e.to_dict() for e in changed],
            }

    def export_accepted(self) -> list:
        """Accepted links in decision order, with gains at acceptance time."""
        rows = []
        running = 0.0
        for rank, (source, target, gain) in enumerate(self.accepted, start=1):
            running += gain
            rows.append({
                "rank": rank,
                "source": source,
                "target": target,
                "p_est": self._by_pair[(source, target)].p,
                "marginal_gain": gain,
                "objective": running,
            })
        return rows

    def state_digest(self) -> dict:
        """Canonical session state, used for crash-consistency comparison."""
        return {
            "accepted": [[s, t, g] for s, t, g in self.accepted],
            "declined": [[s, t] for s, t in self.declined],
            "remaining_budget": self.remaining_budget,
            "ranking": [e.to_dict() for e in self._ranking],
        }

    # --- internals ---

    def _compute_ranking(self) -> list:
        decided = {(s, t) for s, t, _ in self.accepted}
        decided.update(self.declined)
        accepted_per_source: dict = {}
        for s, _, _ in self.accepted:
            accepted_per_source[s] = accepted_per_source.get(s, 0) + 1
        entries = []
        for pair, cand in self._by_pair.items():
            if pair in decided:
                continue
            state = self._states.get(cand.source, SourceState())
            gain = marginal_gain(self.problem.objective,
                                 self.problem.weight(cand.source), state,
                                 self.problem.prior_mass(cand.source), cand.p)
            entries.append(RankingEntry(
                source=cand.source,
                target=cand.target,
                p_est=cand.p,
                gain=gain,
                rank=0,
                accepted_on_source=accepted_per_source.get(cand.source, 0),
            ))
        entries.sort(key=lambda e: (-e.gain, e.source, e.target))
        for i, e in enumerate(entries, start=1):
            e.rank = i
        return entries


class SessionStore:
    """Disk-backed session registry: snapshot + append-only journal each."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict = {}
        self._lock = threading.Lock()

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def create(self, problem: PlacementProblem,
               session_id: Optional[str] = None) -> ReviewSession:
        session_id = session_id or uuid.uuid4().hex
        session_dir = self._dir(session_id)
        session_dir.mkdir(parents=True, exist_ok=False)
        with open(session_dir / "problem.json", "w", encoding="utf-8") as fh:
            json.dump(problem_to_dict(problem), fh, sort_keys=True)
            fh.write("\n")
        (session_dir / "journal.jsonl").touch()
        session = ReviewSession(session_id, problem)
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> ReviewSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            session = self._load(session_id)
        return session

    def decide(self, session_id: str, source: str, target: str, verdict: str) -> dict:
        """Journal the decision, then apply it to the in-memory session."""
        session = self.get(session_id)
        record = {"source": source, "target": target, "verdict": verdict}
        # journal before responding; replay tolerates a trailing rejected entry
        with open(self._dir(session_id) / "journal.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
        return session.decide(source, target, verdict)

    def _load(self, session_id: str) -> ReviewSession:
        session_dir = self._dir(session_id)
        if not (session_dir / "problem.json").exists():
            raise UnknownSession(f"no session {session_id!r}")
        return replay_session(session_dir, session_id)


def replay_session(session_dir, session_id: Optional[str] = None) -> ReviewSession:
    """Rebuild a session from its snapshot and journal (crash recovery)."""
    session_dir = Path(session_dir)
    with open(session_dir / "problem.json", "r", encoding="utf-8") as fh:
        problem = problem_from_dict(json.load(fh))
    session = ReviewSession(session_id or session_dir.name, problem)
    journal = session_dir / "journal.jsonl"
    if journal.exists():
        with open(journal, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                try:
                    session.decide(rec["source"], rec["target"], rec["verdict"])
                except LinkforgeError:
                    # a decision journaled but rejected pre-crash; skip
                    continue
    return session


# --- HTTP API ---------------------------------------------------------------

_HTTP_CODES = {
    "UnknownSession": 404,
    "UnknownLink": 404,
    "AlreadyDecided": 409,
    "BudgetExhausted": 409,
    "InvalidProblem": 400,
}


def create_app(store: SessionStore):
    """FastAPI application over a session store."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, PlainTextResponse

    app = FastAPI(title="linkforge review service")

    @app.exception_handler(LinkforgeError)
    async def on_error(request: Request, exc: LinkforgeError):
        status = _HTTP_CODES.get(exc.code, 400)
        return JSONResponse(status_code=status,
                            content={"code": exc.code, "message": str(exc)})

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    async def create_session(body: dict):
        doc = body.get("problem")
        if doc is None:
            ref = body.get("problem_ref")
            if not ref:
                raise InvalidProblem("provide problem or problem_ref")
            path = Path(ref)
            if not path.is_absolute():
                path = store.root / path
            if not path.exists():
                raise InvalidProblem(f"problem_ref {ref!r} not found")
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        try:
            problem = problem_from_dict(doc, budget=body.get("budget"),
                                        objective=body.get("objective"))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidProblem(f"bad problem document: {exc}") from None
        session = store.create(problem)
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}/suggestions")
    async def suggestions(session_id: str, n: int = 50):
        session = store.get(session_id)
        return [e.to_dict() for e in session.suggestions(n)]

    @app.post("/sessions/{session_id}/decisions")
    async def decide(session_id: str, body: dict):
        for key in ("source", "target", "verdict"):
            if key not in body:
                raise InvalidProblem(f"missing field {key!r}")
        if body["verdict"] not in ("accept", "decline"):
            raise InvalidProblem(f"unknown verdict {body['verdict']!r}")
        return store.decide(session_id, body["source"], body["target"],
                            body["verdict"])

    @app.get("/sessions/{session_id}/export")
    async def export(session_id: str):
        session = store.get(session_id)
        lines = "".join(json.dumps(row, sort_keys=True) + "\n"
                        for row in session.export_accepted())
        return PlainTextResponse(lines, media_type="application/jsonl")

    return app
