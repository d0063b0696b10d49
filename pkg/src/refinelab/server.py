"""HTTP annotation server for human evaluation sessions.

Annotator endpoints serve mapping-blind payloads only; the hidden
initial/refined assignment never leaves the server except through the
token-gated admin export.  Judgments persist to the session file after
every write, so a crashed server loses nothing.
"""

from __future__ import annotations

import logging
import secrets
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .human_eval import (
    CHOICES,
    DIMENSIONS,
    HumanEvalError,
    PairwiseSession,
    record_da_score,
    record_judgment,
    record_mqm_annotation,
    summarize_pairwise,
)

logger = logging.getLogger(__name__)


class PairwiseBody(BaseModel):
    dimension: str
    choice: str
    annotator: str = "anon"


class MqmBody(BaseModel):
    candidate: str
    start: int
    end: int
    category: str
    severity: str
    annotator: str = "anon"


class DaBody(BaseModel):
    candidate: str
    value: int
    annotator: str = "anon"


def create_app(
    session: PairwiseSession,
    session_path: str | Path | None = None,
    admin_token: str | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="refinelab annotation server")
    token = admin_token or secrets.token_hex(16)
    app.state.admin_token = token
    app.state.session = session

    def persist() -> None:
        if session_path is not None:
            session.save(session_path)

    def check_admin(header_token: str | None) -> None:
        if header_token != token:
            raise HTTPException(status_code=403, detail="admin token required")

    @app.get("/api/items")
    def list_items(annotator: str = "anon"):
        return [
            {
                **item.blind_payload(),
                "judged_dimensions": sorted(
                    session.judged_dimensions(item.item_id, annotator)
                ),
                "complete": len(session.judged_dimensions(item.item_id, annotator))
                == len(DIMENSIONS),
            }
            for item in session.items
        ]

    @app.get("/api/items/next")
    def next_item(annotator: str = "anon"):
        for item in session.items:
            judged = session.judged_dimensions(item.item_id, annotator)
            if len(judged) < len(DIMENSIONS):
                return {**item.blind_payload(), "judged": judged}
        return JSONResponse({"done": True})

    @app.get("/api/items/{item_id}")
    def get_item(item_id: str, annotator: str = "anon"):
        try:
            item = session.item(item_id)
        except HumanEvalError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            **item.blind_payload(),
            "judged": session.judged_dimensions(item_id, annotator),
        }

    @app.post("/api/items/{item_id}/pairwise")
    def submit_pairwise(item_id: str, body: PairwiseBody):
        try:
            record_judgment(session, item_id, body.dimension, body.choice,
                            body.annotator)
        except HumanEvalError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        persist()
        return {
            "ok": True,
            "judged": session.judged_dimensions(item_id, body.annotator),
        }

    @app.post("/api/items/{item_id}/mqm")
    def submit_mqm(item_id: str, body: MqmBody):
        try:
            record_mqm_annotation(
                session, item_id, body.candidate, body.start, body.end,
                body.category, body.severity, body.annotator,
            )
        except HumanEvalError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        persist()
        return {"ok": True}

    @app.post("/api/items/{item_id}/da")
    def submit_da(item_id: str, body: DaBody):
        try:
            record_da_score(
                session, item_id, body.candidate, body.value, body.annotator
            )
        except HumanEvalError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        persist()
        return {"ok": True}

    @app.get("/api/meta")
    def meta():
        return {
            "dimensions": list(DIMENSIONS),
            "choices": list(CHOICES),
            "n_items": len(session.items),
        }

    @app.get("/api/export")
    def export(x_admin_token: str | None = Header(default=None)):
        check_admin(x_admin_token)
        return session.to_dict()

    @app.get("/api/summary")
    def summary(x_admin_token: str | None = Header(default=None)):
        check_admin(x_admin_token)
        return {
            dim: {
                "n_judged": s.n_judged,
                "pct_initial": s.pct_initial,
                "pct_tie": s.pct_tie,
                "pct_refined": s.pct_refined,
                "win_rate_no_ties": s.win_rate_no_ties,
                "p_value": s.p_value,
                "per_lp_wins": {lp: list(v) for lp, v in s.per_lp_wins.items()},
            }
            for dim, s in summarize_pairwise(session).items()
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        # API routes above take precedence; everything else is the UI.
        app.mount(
            "/", StaticFiles(directory=str(ui_dir), html=True), name="ui"
        )

    return app


def serve(
    session_path: str | Path,
    host: str = "127.0.0.1",
    port: int = 8400,
    admin_token: str | None = None,
    ui_dir: str | Path | None = None,
) -> None:
    import uvicorn

    session = PairwiseSession.load(session_path)
    app = create_app(session, session_path, admin_token, ui_dir)
    logger.info("admin token: %s", app.state.admin_token)
    uvicorn.run(app, host=host, port=port)
