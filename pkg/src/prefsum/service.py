"""HTTP session API over the event-sourced store.

Endpoints mirror the interaction loop: create a session, fetch the
outstanding query (idempotent), post feedback, read the draft or final
summary, post summary preferences and a final rating, and inspect the
event log.  Errors are returned as {code, message}.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import RunConfig
from .corpus import cluster_to_json, ingest_cluster
from .errors import ConflictError, StageError, ValidationError
from .session import CorruptLogError, SessionStore


class CreateSessionBody(BaseModel):
    cluster: Optional[dict] = None
    cluster_path: Optional[str] = None
    config: dict = Field(default_factory=dict)
    seed: int = 0


class FeedbackBody(BaseModel):
    left: int
    right: int
    label: int


class RatingBody(BaseModel):
    score: int


class UnknownSessionError(Exception):
    pass


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(data_dir) -> FastAPI:
    app = FastAPI(title="prefsum session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(data_dir)
    app.state.store = store

    @app.exception_handler(ValidationError)
    async def handle_validation(request: Request, exc: ValidationError):
        return _error(400, "validation", str(exc))

    @app.exception_handler(StageError)
    async def handle_stage(request: Request, exc: StageError):
        return _error(409, "stage", str(exc))

    @app.exception_handler(ConflictError)
    async def handle_conflict(request: Request, exc: ConflictError):
        return _error(409, "conflict", str(exc))

    @app.exception_handler(CorruptLogError)
    async def handle_corrupt(request: Request, exc: CorruptLogError):
        return _error(500, "corrupt_log", str(exc))

    def _get_session(session_id: str):
        handle = store.get(session_id)
        if handle is None:
            raise UnknownSessionError(session_id)
        return handle

    @app.exception_handler(UnknownSessionError)
    async def handle_missing(request: Request, exc: UnknownSessionError):
        return _error(404, "not_found", f"unknown session {exc}")

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        if body.cluster is None and body.cluster_path is None:
            raise ValidationError("provide either cluster or cluster_path")
        config = RunConfig.from_json({**RunConfig().to_json(), **body.config})
        if config.reward_mode != "pairwise":
            raise ValidationError("the session service supports pairwise reward mode only")
        if body.cluster is not None:
            cluster_data = body.cluster
        else:
            cluster = ingest_cluster(Path(body.cluster_path), config.unit)
            cluster_data = cluster_to_json(cluster)
        handle = store.create_session(cluster_data, config, body.seed)
        return {"session_id": handle.session_id}

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        return _get_session(session_id).next_query()

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackBody):
        if body.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {body.label}")
        return _get_session(session_id).post_feedback(body.left, body.right, body.label)

    @app.get("/sessions/{session_id}/summary")
    def get_summary(session_id: str, stage: str = "final"):
        return _get_session(session_id).summary(stage)

    @app.post("/sessions/{session_id}/summary-preference")
    def post_summary_preference(session_id: str, body: FeedbackBody):
        if body.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {body.label}")
        return _get_session(session_id).post_summary_preference(
            body.left, body.right, body.label
        )

    @app.post("/sessions/{session_id}/rating")
    def post_rating(session_id: str, body: RatingBody):
        return _get_session(session_id).post_rating(body.score)

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str):
        return {"session_id": session_id, "events": _get_session(session_id).log()}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        handle = _get_session(session_id)
        engine = handle.engine
        return {
            "session_id": session_id,
            "stage": engine.stage,
            "round": engine.round,
            "budget": engine.config.budget,
            "reward_round": engine.reward_round,
            "reward_budget": engine.config.reward_budget,
            "rating": engine.rating,
        }

    return app


def run_server(data_dir, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(data_dir), host=host, port=port)
