"""HTTP session service: schedules out, responses in, exports for annotation."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from ..annotation import AnnotationError
from .schemas import (
    CreateSessionRequest,
    ResponseAck,
    ResponseIn,
    SessionOut,
    UiScheduleOut,
    ui_schedule,
)
from .store import Session, SessionError, SessionStore

_STATUS = {"unknown": 404, "order": 409, "complete": 409, "invalid": 422}


def _session_out(session: Session) -> SessionOut:
    return SessionOut(
        session_id=session.session_id,
        participant_id=session.participant.participant_id,
        condition=session.participant.condition,
        state=session.state,
        n_trials=len(session.schedule.trials),
        n_responses=len(session.responses),
    )


def create_app(store: SessionStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="numcue session service")

    @app.exception_handler(SessionError)
    async def _session_error(_, exc: SessionError):
        raise HTTPException(status_code=_STATUS[exc.kind], detail=str(exc))

    @app.post("/sessions", response_model=SessionOut, status_code=201)
    def create_session(body: CreateSessionRequest) -> SessionOut:
        try:
            session = store.create_session(
                participant_id=body.participant.participant_id,
                age_days=body.participant.age_days,
                gender=body.participant.gender,
                condition=body.condition,
                schedule_seed=body.schedule_seed,
            )
        except (SessionError, AnnotationError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return _session_out(session)

    @app.get("/sessions/{session_id}", response_model=SessionOut)
    def get_session(session_id: str) -> SessionOut:
        return _session_out(_get(store, session_id))

    @app.get("/sessions/{session_id}/schedule", response_model=UiScheduleOut)
    def get_schedule(session_id: str) -> UiScheduleOut:
        session = _get(store, session_id)
        return ui_schedule(session.session_id, session.schedule)

    @app.post("/sessions/{session_id}/responses", response_model=ResponseAck)
    def post_response(session_id: str, body: ResponseIn) -> ResponseAck:
        try:
            store.post_response(
                session_id,
                trial_id=body.trial_id,
                chosen_side=body.chosen_side,
                latency_ms=body.latency_ms,
                timestamp=body.timestamp,
            )
        except SessionError as exc:
            raise HTTPException(status_code=_STATUS[exc.kind], detail=str(exc))
        session = store.get_session(session_id)
        last = session.responses[-1]
        return ResponseAck(
            accepted=True,
            correct=last.correct,
            completed=session.state == "complete",
            n_responses=len(session.responses),
        )

    @app.get("/sessions/{session_id}/export", response_class=PlainTextResponse)
    def export_session(session_id: str) -> PlainTextResponse:
        _get(store, session_id)
        return PlainTextResponse(
            store.export_session(session_id), media_type="text/csv"
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def _get(store: SessionStore, session_id: str) -> Session:
    try:
        return store.get_session(session_id)
    except SessionError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
