"""HTTP/JSON API over the engine: session management, messaging, database
uploads and the schema graph. Sessions are in-memory (lost on restart);
databases persist under the data directory. Per-session message handling is
serialized; distinct sessions proceed concurrently over shared immutable
schemas and databases.
"""

from __future__ import annotations

import io
import json
import os
import threading
import uuid
import zipfile
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, HTTPException, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .dialogue import DialogueSession, handle_message
from .engine import Engine, EngineConfig, load_engine
from .executor import ResultSet
from .schema import SchemaError, schema_graph


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8777
    data_dir: str = "data"
    theta: float = 0.85
    beam_width: int = 128
    max_rounds: int = 3
    embed_dim: int = 512
    seed: int = 0
    confidential: tuple[str, ...] = ()
    ui_dir: Optional[str] = None

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        cfg = cls()
        cfg.port = int(os.environ.get("PHOTON_PORT", cfg.port))
        cfg.data_dir = os.environ.get("PHOTON_DATA_DIR", cfg.data_dir)
        cfg.beam_width = int(os.environ.get("PHOTON_BEAM", cfg.beam_width))
        cfg.theta = float(os.environ.get("PHOTON_THETA", cfg.theta))
        cfg.max_rounds = int(os.environ.get("PHOTON_MAX_ROUNDS", cfg.max_rounds))
        cfg.ui_dir = os.environ.get("PHOTON_UI_DIR", cfg.ui_dir)
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg

    def engine_config(self) -> EngineConfig:
        return EngineConfig(theta=self.theta, beam_width=self.beam_width,
                            max_rounds=self.max_rounds,
                            embed_dim=self.embed_dim, seed=self.seed)


@dataclass
class _Session:
    session: DialogueSession
    engine: Engine
    lock: threading.Lock = dc_field(default_factory=threading.Lock)


def _result_payload(result: Optional[ResultSet]) -> Optional[dict]:
    if result is None:
        return None
    return {
        "columns": result.columns,
        "rows": [list(r) for r in result.rows],
        "provenance": ([list(r) for r in result.provenance]
                       if result.provenance is not None else None),
        "provenance_columns": result.provenance_columns,
        "hidden_count": result.hidden_count,
        "sql": result.sql_text,
    }


def create_app(config: Optional[ServiceConfig] = None,
               engine_factory: Optional[Callable[[Path, ServiceConfig], Engine]]
               = None) -> FastAPI:
    config = config or ServiceConfig.from_env()
    app = FastAPI(title="photon")
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    engines: dict[str, Engine] = {}
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    def _other_schemas(db_id: str):
        return [e.schema for other, e in engines.items() if other != db_id]

    def build_engine(db_dir: Path) -> Engine:
        if engine_factory is not None:
            return engine_factory(db_dir, config)
        return load_engine(db_dir, config.engine_config(),
                           distractor_schemas=_other_schemas(db_dir.name),
                           extra_confidential=config.confidential)

    def scan_data_dir() -> None:
        entries = [e for e in (sorted(data_dir.iterdir())
                               if data_dir.exists() else [])
                   if e.is_dir() and (e / "schema.json").exists()]
        # plain databases first so later demo-trained ones see them as
        # cross-domain distractors
        entries.sort(key=lambda e: (e / "demo_queries.json").exists())
        for entry in entries:
            try:
                engines[entry.name] = build_engine(entry)
            except Exception:
                continue

    scan_data_dir()

    @app.exception_handler(SchemaError)
    async def schema_error_handler(request: Request, exc: SchemaError):
        return JSONResponse(status_code=400, content={
            "code": type(exc).__name__, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "code": "BadRequest", "message": str(exc.errors()[:1])})

    def get_engine(db_id: str) -> Engine:
        engine = engines.get(db_id)
        if engine is None:
            raise HTTPException(status_code=404, detail={
                "code": "UnknownDatabase", "message": f"unknown database {db_id}"})
        return engine

    def get_session(session_id: str) -> _Session:
        s = sessions.get(session_id)
        if s is None:
            raise HTTPException(status_code=404, detail={
                "code": "UnknownSession", "message": f"unknown session {session_id}"})
        return s

    @app.get("/databases")
    def list_databases():
        return [{"db_id": db_id, "table_count": len(engine.schema.tables)}
                for db_id, engine in sorted(engines.items())]

    @app.post("/databases")
    async def upload_database(bundle: UploadFile):
        payload = await bundle.read()
        try:
            archive = zipfile.ZipFile(io.BytesIO(payload))
        except zipfile.BadZipFile:
            raise HTTPException(status_code=400, detail={
                "code": "BadBundle", "message": "expected a zip bundle"})
        names = archive.namelist()
        schema_name = next((n for n in names if n.endswith("schema.json")), None)
        if schema_name is None:
            raise HTTPException(status_code=400, detail={
                "code": "BadBundle", "message": "bundle has no schema.json"})
        doc = json.loads(archive.read(schema_name).decode("utf-8"))
        db_id = str(doc.get("db_id", "")).strip()
        if not db_id:
            raise HTTPException(status_code=400, detail={
                "code": "BadBundle", "message": "schema.json has no db_id"})
        target = data_dir / db_id
        target.mkdir(parents=True, exist_ok=True)
        prefix = schema_name[:-len("schema.json")]
        for name in names:
            if name.endswith("/"):
                continue
            rel = name[len(prefix):] if name.startswith(prefix) else name
            if not rel or "/" in rel or rel.startswith("."):
                continue
            (target / rel).write_bytes(archive.read(name))
        with registry_lock:
            engines[db_id] = build_engine(target)  # SchemaError -> 400
        return {"db_id": db_id}

    @app.get("/databases/{db_id}/graph")
    def database_graph(db_id: str):
        return schema_graph(get_engine(db_id).schema)

    @app.post("/sessions")
    def create_session(payload: dict):
        db_id = payload.get("db_id", "")
        engine = get_engine(db_id)
        session_id = uuid.uuid4().hex[:12]
        sessions[session_id] = _Session(
            session=DialogueSession(session_id=session_id, db_id=db_id),
            engine=engine)
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, payload: dict):
        if "text" not in payload or not isinstance(payload["text"], str):
            raise HTTPException(status_code=400, detail={
                "code": "BadRequest", "message": "payload must carry text"})
        s = get_session(session_id)
        with s.lock:
            response = handle_message(s.session, payload["text"], s.engine)
        return {
            "state": response.state.value,
            "text": response.text,
            "result": _result_payload(response.result),
            "suggestions": ([{"surface": c.surface, "score": c.score,
                              "source": c.source}
                             for c in response.suggestion]
                            if response.suggestion else None),
            "sql": response.result.sql_text if response.result else None,
            "corrected_question": response.corrected_question,
            "span": ({"start": response.span.start, "end": response.span.end}
                     if response.span else None),
            "question_tokens": response.question_tokens,
        }

    @app.get("/sessions/{session_id}/history")
    def session_history(session_id: str):
        s = get_session(session_id)
        return [{"speaker": t.speaker, "text": t.text,
                 "timestamp": t.timestamp, "state": t.state}
                for t in s.session.history]

    ui_dir = config.ui_dir
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def run(config: Optional[ServiceConfig] = None) -> None:
    import uvicorn

    config = config or ServiceConfig.from_env()
    uvicorn.run(create_app(config), host=config.host, port=config.port,
                log_level="warning")
