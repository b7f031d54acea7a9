"""HTTP surface for one multi-bot server instance.

All endpoints sit under /v1 and speak JSON.  Channel traffic
authenticates with the bot's own token, authoring and operations with
the admin token.  Error bodies are {"error": {"code", "message"}} with
machine codes that stay stable across releases; validation results ride
in an optional "diagnostics" list.

The scheduler ticker runs as a daemon thread inside serve(); proactive
messages go out through the bot's webhook when it has one, otherwise
they wait in the outbox for the user's next synchronous exchange.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from contextlib import asynccontextmanager
from pathlib import Path

import httpx
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import OutboundMessage
from .runtime import BotRuntime, TickFiring, TurnBusy
from .store import Conflict, ContentStore, NotFound, PublishBlocked, parse_instant
from .graph import GraphLoadError
from .validate import validate_graph

__all__ = ["build_app", "load_server_config", "serve", "ApiError", "MAX_TEXT_LENGTH"]

log = logging.getLogger(__name__)

MAX_TEXT_LENGTH = 4000


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, diagnostics: list | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.diagnostics = diagnostics


class InboundBody(BaseModel):
    user_id: str
    text: str
    timestamp: str | None = None


class DocumentBody(BaseModel):
    document: dict


class DraftUpdateBody(BaseModel):
    document: dict
    revision: int


def load_server_config(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as f:
        config = json.load(f)
    for key in ("admin_token", "data_dir", "bots"):
        if key not in config:
            raise ValueError(f"server config missing '{key}'")
    env_dir = os.environ.get("DIALOGKIT_DATA_DIR")
    if env_dir:
        config["data_dir"] = env_dir
    config.setdefault("port", 8080)
    config.setdefault("redaction", True)
    return config


def _message_dict(message: OutboundMessage) -> dict:
    return {
        "kind": message.kind,
        "body": message.body,
        "alt_text": message.alt_text,
        "quick_replies": list(message.quick_replies),
    }


def _meta_dict(meta) -> dict:
    return {
        "version_id": meta.version_id,
        "graph_id": meta.graph_id,
        "status": meta.status,
        "revision": meta.revision,
        "parent_version": meta.parent_version,
        "created_at": meta.created_at,
    }


def _diag_dict(diagnostic) -> dict:
    return {
        "severity": diagnostic.severity,
        "code": diagnostic.code,
        "node": diagnostic.node,
        "message": diagnostic.message,
    }


def build_app(
    store: ContentStore,
    *,
    admin_token: str,
    clock=None,
    seed_base: int = 0,
    webhook_client: httpx.Client | None = None,
    ui_dir: str | Path | None = None,
    tick_seconds: float = 60.0,
    run_ticker: bool = False,
) -> FastAPI:
    runtimes: dict[str, BotRuntime] = {}
    for bot_id in store.list_bots():
        runtimes[bot_id] = BotRuntime(store, bot_id, clock=clock, seed_base=seed_base)
    client = webhook_client if webhook_client is not None else httpx.Client(timeout=5.0)

    def deliver(runtime: BotRuntime, user: str, messages: list[OutboundMessage]) -> int:
        """Push messages out the bot's webhook; failures re-queue."""
        url = runtime.channel.get("url")
        payload = {
            "bot_id": runtime.bot_id,
            "user": user,
            "messages": [_message_dict(m) for m in messages],
        }
        try:
            response = client.post(url, json=payload)
            response.raise_for_status()
            return len(messages)
        except httpx.HTTPError as exc:
            log.warning("webhook delivery to %s failed: %s", url, exc)
            runtime.queue_outbox(user, messages)
            return 0

    def run_tick() -> None:
        for runtime in list(runtimes.values()):
            try:
                firings: list[TickFiring] = runtime.tick()
            except Exception:
                log.exception("tick failed for bot %s", runtime.bot_id)
                continue
            for firing in firings:
                if runtime.channel["kind"] == "webhook":
                    deliver(runtime, firing.user, firing.messages)
                else:
                    runtime.queue_outbox(firing.user, firing.messages)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = threading.Event()
        ticker = None
        if run_ticker:
            def loop():
                while not stop.wait(tick_seconds):
                    run_tick()

            ticker = threading.Thread(target=loop, name="checkin-ticker", daemon=True)
            ticker.start()
        yield
        stop.set()
        if ticker is not None:
            ticker.join(timeout=2)

    app = FastAPI(title="dialog server", lifespan=lifespan)
    app.state.runtimes = runtimes
    app.state.run_tick = run_tick

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        body: dict = {"error": {"code": exc.code, "message": exc.message}}
        if exc.diagnostics is not None:
            body["error"]["diagnostics"] = exc.diagnostics
        return JSONResponse(body, status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            {"error": {"code": "bad_request", "message": str(exc.errors()[:3])}},
            status_code=422,
        )

    def bearer(request: Request) -> str | None:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def require_admin(request: Request) -> None:
        if bearer(request) != admin_token:
            raise ApiError(401, "unauthorized", "admin token required")

    def runtime_for(bot_id: str) -> BotRuntime:
        runtime = runtimes.get(bot_id)
        if runtime is None:
            raise ApiError(404, "bot_not_found", f"no bot '{bot_id}'")
        return runtime

    def resolve_version(graph_id: str, version_ref: str) -> str:
        version_id = version_ref if "@" in version_ref else f"{graph_id}@{version_ref}"
        try:
            meta = store.get_version(version_id)
        except NotFound:
            raise ApiError(404, "version_not_found", f"no version '{version_id}'") from None
        if meta.graph_id != graph_id:
            raise ApiError(404, "version_not_found", f"no version '{version_ref}' of '{graph_id}'")
        return version_id

    # --- channel ---

    @app.post("/v1/channels/{bot_id}/messages")
    def channel_message(bot_id: str, body: InboundBody, request: Request):
        runtime = runtime_for(bot_id)
        token = bearer(request)
        if token != runtime.channel["token"] and token != admin_token:
            raise ApiError(401, "unauthorized", "bad channel token")
        if len(body.text) > MAX_TEXT_LENGTH:
            raise ApiError(
                422, "text_too_long", f"text exceeds {MAX_TEXT_LENGTH} characters"
            )
        try:
            messages = runtime.handle_inbound(body.user_id, body.text)
        except TurnBusy:
            raise ApiError(
                409, "turn_in_progress", "a turn for this user is already running"
            ) from None
        if runtime.channel["kind"] == "webhook":
            user = runtime.pseudonym(body.user_id)
            delivered = deliver(runtime, user, messages)
            return {"status": "accepted", "delivered": delivered}
        return {"messages": [_message_dict(m) for m in messages]}

    # --- authoring ---

    @app.get("/v1/graphs")
    def list_graphs(request: Request):
        require_admin(request)
        grouped: dict[str, list[dict]] = {}
        for meta in store.list_versions():
            grouped.setdefault(meta.graph_id, []).append(_meta_dict(meta))
        return {
            "graphs": [
                {"graph_id": graph_id, "versions": grouped[graph_id]}
                for graph_id in sorted(grouped)
            ]
        }

    @app.post("/v1/graphs", status_code=201)
    def create_graph(body: DocumentBody, request: Request):
        require_admin(request)
        try:
            meta = store.create_version(body.document)
        except GraphLoadError as exc:
            raise ApiError(422, "invalid_document", str(exc)) from None
        return {"version": _meta_dict(meta)}

    @app.get("/v1/graphs/{graph_id}/versions/{version_ref}")
    def get_version(graph_id: str, version_ref: str, request: Request):
        require_admin(request)
        version_id = resolve_version(graph_id, version_ref)
        return {
            "version": _meta_dict(store.get_version(version_id)),
            "document": store.get_document(version_id),
        }

    @app.put("/v1/graphs/{graph_id}/versions/{version_ref}")
    def put_version(graph_id: str, version_ref: str, body: DraftUpdateBody, request: Request):
        require_admin(request)
        version_id = resolve_version(graph_id, version_ref)
        try:
            meta = store.update_draft(version_id, body.document, body.revision)
        except GraphLoadError as exc:
            raise ApiError(422, "invalid_document", str(exc)) from None
        except Conflict as exc:
            raise ApiError(409, exc.code, str(exc)) from None
        return {"version": _meta_dict(meta)}

    @app.post("/v1/graphs/{graph_id}/versions/{version_ref}/validate")
    def validate_version(graph_id: str, version_ref: str, request: Request):
        require_admin(request)
        version_id = resolve_version(graph_id, version_ref)
        diagnostics = validate_graph(store.get_graph(version_id))
        return {
            "diagnostics": [_diag_dict(d) for d in diagnostics],
            "errors": sum(d.severity == "error" for d in diagnostics),
            "warnings": sum(d.severity == "warning" for d in diagnostics),
        }

    @app.post("/v1/graphs/{graph_id}/versions/{version_ref}/duplicate", status_code=201)
    def duplicate_version(graph_id: str, version_ref: str, request: Request):
        require_admin(request)
        version_id = resolve_version(graph_id, version_ref)
        return {"version": _meta_dict(store.duplicate_version(version_id))}

    @app.post("/v1/graphs/{graph_id}/versions/{version_ref}/publish")
    def publish_version(graph_id: str, version_ref: str, request: Request):
        require_admin(request)
        version_id = resolve_version(graph_id, version_ref)
        try:
            meta = store.publish_version(version_id)
        except PublishBlocked as exc:
            raise ApiError(
                422,
                "validation_failed",
                "validation errors block publishing",
                diagnostics=[_diag_dict(d) for d in exc.diagnostics],
            ) from None
        except Conflict as exc:
            raise ApiError(409, exc.code, str(exc)) from None
        return {"version": _meta_dict(meta)}

    # --- bots ---

    @app.get("/v1/bots/{bot_id}")
    def get_bot(bot_id: str, request: Request):
        require_admin(request)
        try:
            return {"bot": store.get_bot(bot_id)}
        except NotFound:
            raise ApiError(404, "bot_not_found", f"no bot '{bot_id}'") from None

    @app.put("/v1/bots/{bot_id}")
    def put_bot(bot_id: str, request: Request, body: dict):
        require_admin(request)
        if body.get("bot_id") != bot_id:
            raise ApiError(422, "bad_request", "bot_id in body must match path")
        try:
            store.register_bot(body)
        except NotFound as exc:
            raise ApiError(422, "version_not_found", str(exc)) from None
        except Conflict as exc:
            raise ApiError(409, exc.code, str(exc)) from None
        except Exception as exc:
            raise ApiError(422, "invalid_bot_config", str(exc)) from None
        if bot_id in runtimes:
            runtimes[bot_id].refresh()
        else:
            runtimes[bot_id] = BotRuntime(store, bot_id, clock=clock, seed_base=seed_base)
        return {"bot": store.get_bot(bot_id)}

    @app.get("/v1/bots/{bot_id}/events")
    def get_events(bot_id: str, request: Request, response: Response):
        require_admin(request)
        runtime_for(bot_id)
        params = request.query_params

        def instant(name: str):
            raw = params.get(name)
            if raw is None:
                return None
            try:
                return parse_instant(raw)
            except ValueError:
                raise ApiError(422, "bad_request", f"bad '{name}' instant") from None

        since, until = instant("from"), instant("to")
        lines = "".join(
            json.dumps(record, ensure_ascii=False) + "\n"
            for record in store.iter_events(bot_id, since=since, until=until)
        )
        return Response(content=lines, media_type="application/x-ndjson")

    @app.post("/v1/bots/{bot_id}/sessions/{user_id}/reset")
    def reset_session(bot_id: str, user_id: str, request: Request):
        require_admin(request)
        runtime_for(bot_id).reset_user(user_id)
        return {"status": "reset"}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(config: dict, *, port: int | None = None) -> None:
    """Blocking server entry point used by the CLI."""
    import uvicorn

    store = ContentStore(config["data_dir"], redaction=config.get("redaction", True))
    for bot in config["bots"]:
        store.register_bot(bot)
    ui_dir = config.get("ui_dir")
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    app = build_app(
        store,
        admin_token=config["admin_token"],
        seed_base=int(config.get("seed", 0)),
        ui_dir=ui_dir,
        tick_seconds=float(config.get("tick_seconds", 60.0)),
        run_ticker=True,
    )
    uvicorn.run(app, host=config.get("host", "127.0.0.1"), port=port or config["port"])
