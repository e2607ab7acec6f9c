"""HTTP facade over approval sessions for interactive review.

One session per label.  The decision endpoint is serialized with a
process-wide lock, which keeps the append-only log coherent; concurrent
conflicting decisions surface to the loser as a 409.
"""

from __future__ import annotations

import threading
import time
from dataclasses import asdict
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse
from pydantic import BaseModel

from .approval import ApprovalConflict, ApprovalSession, ReviewItem, load_session


class DecisionRequest(BaseModel):
    decision: Literal["approved", "rejected"]
    decider: str = "human"


def _item_payload(
    session_id: str, session: ApprovalSession, item: ReviewItem
) -> dict:
    payload = asdict(item)
    payload["collage_url"] = f"/sessions/{session_id}/items/{item.item_id}/collage"
    payload["member_region_ids"] = list(item.member_region_ids)
    payload["status"] = session.status_of(item.item_id)
    record = session.decision_for(item.item_id)
    payload["decider"] = record.decider if record else None
    payload["decided_at"] = record.timestamp if record else None
    return payload


def create_app(sessions: dict[str, ApprovalSession], collage_root: Path | str) -> FastAPI:
    root = Path(collage_root)
    app = FastAPI(title="tagsift approval service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    lock = threading.Lock()

    def session_or_404(session_id: str) -> ApprovalSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session '{session_id}'")
        return session

    def item_or_404(session: ApprovalSession, item_id: str) -> ReviewItem:
        item = session.items.get(item_id)
        if item is None:
            raise HTTPException(
                status_code=404,
                detail=f"no item '{item_id}' in session '{session.label}'",
            )
        return item

    @app.get("/sessions")
    def list_sessions() -> list[dict]:
        return [
            {
                "session_id": session_id,
                "label": session.label,
                "pending_count": len(session.pending_items()),
                "total": session.total,
            }
            for session_id, session in sorted(sessions.items())
        ]

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str) -> dict:
        session = session_or_404(session_id)
        item = session.next_item()
        if item is None:
            raise HTTPException(
                status_code=404, detail=f"session '{session_id}' has no pending items"
            )
        return _item_payload(session_id, session, item)

    @app.get("/sessions/{session_id}/items/{item_id}/collage")
    def collage(session_id: str, item_id: str) -> FileResponse:
        session = session_or_404(session_id)
        item = item_or_404(session, item_id)
        path = root / item.collage_path
        if not path.exists():
            raise HTTPException(
                status_code=404, detail=f"collage file missing for item '{item_id}'"
            )
        return FileResponse(path, media_type="image/png")

    @app.post("/sessions/{session_id}/items/{item_id}/decision")
    def decide(session_id: str, item_id: str, request: DecisionRequest) -> dict:
        session = session_or_404(session_id)
        item = item_or_404(session, item_id)
        with lock:
            try:
                record = session.decide(
                    item_id,
                    request.decision,
                    decider=request.decider,
                    timestamp=time.time(),
                )
            except ApprovalConflict as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            payload = _item_payload(session_id, session, item)
            payload["decision"] = asdict(record)
            payload["pending_count"] = len(session.pending_items())
        return payload

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str) -> PlainTextResponse:
        session = session_or_404(session_id)
        text = ""
        if session.log_path.exists():
            text = session.log_path.read_text(encoding="utf-8")
        return PlainTextResponse(text, media_type="application/x-ndjson")

    return app


def discover_sessions(construct_dir: Path | str) -> dict[str, ApprovalSession]:
    """Load every per-label session directory under the construct root."""
    construct_dir = Path(construct_dir)
    sessions = {}
    if not construct_dir.exists():
        return sessions
    for session_path in sorted(construct_dir.glob("*/session.json")):
        session = load_session(session_path, session_path.parent / "decisions.ndjson")
        sessions[session.label] = session
    return sessions
