"""Append-only session persistence with replay.

Each session is one JSONL file of events plus an entry in an index file.
Events record exactly the inputs the engine cannot re-derive (creation
payload and feedback) and the derived milestones (issued queries, pool,
final summary) for verification: because the engine is deterministic,
folding the event log through a fresh engine reconstructs the same state,
and any divergence from a recorded milestone marks a corrupt log.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from .config import RunConfig
from .corpus import cluster_from_json
from .errors import ValidationError
from .pipeline import STAGE_ELICIT, STAGE_REWARD, SessionEngine

EVENT_KINDS = (
    "created",
    "query_issued",
    "feedback",
    "pool_built",
    "reward_feedback",
    "summary_emitted",
    "rated",
)


class CorruptLogError(RuntimeError):
    """Replay diverged from a recorded milestone."""


@dataclass
class Event:
    seq: int
    kind: str
    payload: dict
    ts: float

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "ts": self.ts}

    @classmethod
    def from_json(cls, data: dict) -> "Event":
        return cls(seq=data["seq"], kind=data["kind"], payload=data["payload"], ts=data["ts"])


class SessionHandle:
    """Single-writer wrapper around one engine plus its event log."""

    def __init__(self, session_id: str, engine: SessionEngine, path: Path, events=None):
        self.session_id = session_id
        self.engine = engine
        self.path = path
        self.events: List[Event] = events or []
        self.lock = threading.Lock()

    # -- event plumbing --

    def _append(self, kind: str, payload: dict) -> Event:
        event = Event(seq=len(self.events), kind=kind, payload=payload, ts=time.time())
        self.events.append(event)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(json.dumps(event.to_json(), sort_keys=True) + "\n")
            handle.flush()
        return event

    def _sync_milestones(self) -> None:
        """Record pool/final milestones reached by the last engine call."""
        logged_pool = any(e.kind == "pool_built" for e in self.events)
        if self.engine.pool is not None and not logged_pool:
            self._append(
                "pool_built",
                {"summaries": [list(s.sentence_ids) for s in self.engine.pool]},
            )
        logged_final = any(e.kind == "summary_emitted" for e in self.events)
        if self.engine.final is not None and not logged_final:
            self._append("summary_emitted", {"summary": self.engine.final_summary_json()})

    # -- operations --

    def next_query(self) -> dict:
        with self.lock:
            engine = self.engine
            if engine.stage == STAGE_ELICIT:
                fresh = engine.current_pair is None
                pair = engine.current_query()
                if pair is None:
                    self._sync_milestones()
                    return self._exhausted_payload()
                if fresh:
                    self._append(
                        "query_issued",
                        {"kind": "concept", "left": pair[0], "right": pair[1],
                         "round": engine.round},
                    )
                left, right = (engine.cluster.concepts[i] for i in pair)
                return {
                    "stage": STAGE_ELICIT,
                    "round": engine.round,
                    "budget_remaining": engine.config.budget - engine.round,
                    "left": self._concept_payload(left),
                    "right": self._concept_payload(right),
                }
            if engine.stage == STAGE_REWARD:
                fresh = engine.current_summary_pair is None
                pair = engine.current_summary_query()
                if pair is None:
                    self._sync_milestones()
                    return self._exhausted_payload()
                if fresh:
                    self._append(
                        "query_issued",
                        {"kind": "summary", "left": pair[0], "right": pair[1],
                         "round": engine.reward_round},
                    )
                return {
                    "stage": STAGE_REWARD,
                    "round": engine.reward_round,
                    "budget_remaining": engine.config.reward_budget - engine.reward_round,
                    "left": self._summary_payload(pair[0]),
                    "right": self._summary_payload(pair[1]),
                }
            return self._exhausted_payload()

    def _concept_payload(self, concept) -> dict:
        snippet = ""
        if concept.sentence_ids:
            snippet = self.engine.cluster.sentences[min(concept.sentence_ids)].text
        return {"id": concept.id, "surface": concept.surface, "snippet": snippet}

    def _summary_payload(self, index: int) -> dict:
        summary = self.engine.pool[index]
        return {"index": index, "text": summary.text(self.engine.cluster),
                "length": summary.length}

    def _exhausted_payload(self) -> dict:
        return {"exhausted": True, "stage": self.engine.stage}

    def post_feedback(self, left: int, right: int, label: int) -> dict:
        with self.lock:
            self.engine.submit_feedback(left, right, label)
            self._append(
                "feedback",
                {"left": left, "right": right, "label": label,
                 "round": self.engine.round - 1},
            )
            self._sync_milestones()
            return {"accepted": True, "round": self.engine.round,
                    "stage": self.engine.stage}

    def post_summary_preference(self, left: int, right: int, label: int) -> dict:
        with self.lock:
            self.engine.submit_summary_feedback(left, right, label)
            self._append(
                "reward_feedback",
                {"left": left, "right": right, "label": label,
                 "round": self.engine.reward_round - 1},
            )
            self._sync_milestones()
            return {"accepted": True, "round": self.engine.reward_round,
                    "stage": self.engine.stage}

    def post_rating(self, score: int) -> dict:
        with self.lock:
            self.engine.submit_rating(score)
            self._append("rated", {"score": score})
            return {"accepted": True}

    def summary(self, stage: str) -> dict:
        with self.lock:
            if stage == "draft":
                return self.engine.draft_summary().to_json(self.engine.cluster)
            if stage == "final":
                return self.engine.final_summary_json()
            raise ValidationError(f"unknown summary stage {stage!r}")

    def log(self) -> list:
        with self.lock:
            return [e.to_json() for e in self.events]

    def snapshot(self) -> dict:
        with self.lock:
            return self.engine.snapshot()


class SessionStore:
    """Filesystem-backed collection of sessions."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.data_dir / "index.json"
        self._lock = threading.Lock()
        self._cache: Dict[str, SessionHandle] = {}
        if not self.index_path.exists():
            self._write_index({})

    def _write_index(self, index: dict) -> None:
        with open(self.index_path, "w", encoding="utf-8") as handle:
            json.dump(index, handle, indent=2, sort_keys=True)

    def _read_index(self) -> dict:
        with open(self.index_path, encoding="utf-8") as handle:
            return json.load(handle)

    def create_session(self, cluster_data: dict, config: RunConfig, seed: int) -> SessionHandle:
        cluster = cluster_from_json(cluster_data, unit=config.unit)
        engine = SessionEngine(cluster, config, seed)
        session_id = uuid.uuid4().hex
        path = self.data_dir / f"{session_id}.jsonl"
        handle = SessionHandle(session_id, engine, path)
        handle._append(
            "created",
            {"cluster": cluster_data, "config": config.to_json(), "seed": seed},
        )
        handle._sync_milestones()
        with self._lock:
            index = self._read_index()
            index[session_id] = {
                "file": path.name,
                "cluster_id": cluster.id,
                "created_at": time.time(),
            }
            self._write_index(index)
            self._cache[session_id] = handle
        return handle

    def get(self, session_id: str) -> Optional[SessionHandle]:
        with self._lock:
            if session_id in self._cache:
                return self._cache[session_id]
            index = self._read_index()
            if session_id not in index:
                return None
            path = self.data_dir / index[session_id]["file"]
            handle = replay_session(session_id, path)
            self._cache[session_id] = handle
            return handle

    def session_ids(self) -> list:
        with self._lock:
            return sorted(self._read_index())


def replay_session(session_id: str, path: Path) -> SessionHandle:
    """Rebuild a session by folding its event log through a fresh engine."""
    events = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                events.append(Event.from_json(json.loads(line)))
    if not events or events[0].kind != "created":
        raise CorruptLogError(f"{path}: log does not start with a created event")

    created = events[0].payload
    cluster = cluster_from_json(created["cluster"], unit=created["config"]["unit"])
    config = RunConfig.from_json(created["config"])
    engine = SessionEngine(cluster, config, created["seed"])

    for event in events[1:]:
        if event.kind == "query_issued":
            payload = event.payload
            if payload["kind"] == "concept":
                pair = engine.current_query()
            else:
                pair = engine.current_summary_query()
            if pair != (payload["left"], payload["right"]):
                raise CorruptLogError(
                    f"{path}: replayed query {pair} != recorded "
                    f"({payload['left']}, {payload['right']})"
                )
        elif event.kind == "feedback":
            payload = event.payload
            if engine.current_pair is None:
                engine.current_query()
            engine.submit_feedback(payload["left"], payload["right"], payload["label"])
        elif event.kind == "reward_feedback":
            payload = event.payload
            if engine.current_summary_pair is None:
                engine.current_summary_query()
            engine.submit_summary_feedback(
                payload["left"], payload["right"], payload["label"]
            )
        elif event.kind == "pool_built":
            if engine.pool is None and engine.stage == STAGE_ELICIT:
                engine.current_query()
            if engine.pool is None:
                raise CorruptLogError(f"{path}: pool milestone before pool exists")
            got = [list(s.sentence_ids) for s in engine.pool]
            if got != event.payload["summaries"]:
                raise CorruptLogError(f"{path}: replayed pool diverges from log")
        elif event.kind == "summary_emitted":
            if engine.final is None and engine.stage == STAGE_REWARD:
                engine.current_summary_query()
            if engine.final is None:
                raise CorruptLogError(f"{path}: final milestone before final exists")
            if engine.final_summary_json() != event.payload["summary"]:
                raise CorruptLogError(f"{path}: replayed final summary diverges")
        elif event.kind == "rated":
            engine.submit_rating(event.payload["score"])
        else:
            raise CorruptLogError(f"{path}: unknown event kind {event.kind!r}")

    return SessionHandle(session_id, engine, path, events=events)
