"""HTTP surface: POST /embed and GET /health.

The wire contract: /embed takes {"texts": [...]} and answers
{"vectors": [[384 floats], ...], "dim": 384}; errors come back as JSON
{"error": ...} with a 4xx/5xx status, oversized batches specifically as
413.  A model whose output width is not 384 refuses to start.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoder import OUTPUT_DIM, load_encoder

DEFAULT_BATCH_LIMIT = 256


@dataclass(frozen=True)
class ServiceConfig:
    model_identifier: str = "char-ngram"
    host: str = "127.0.0.1"
    port: int = 8384
    batch_limit: int = DEFAULT_BATCH_LIMIT

    def __post_init__(self) -> None:
        if self.batch_limit < 1:
            raise ValueError("batch_limit must be >= 1")

    @classmethod
    def from_listen(cls, model: str, listen: str, batch_limit: int) -> "ServiceConfig":
        host, _, port = listen.rpartition(":")
        return cls(model_identifier=model, host=host or "127.0.0.1",
                   port=int(port), batch_limit=batch_limit)


def create_app(config: ServiceConfig, encoder=None) -> FastAPI:
    encoder = encoder if encoder is not None else load_encoder(config.model_identifier)
    dim = getattr(encoder, "dim", OUTPUT_DIM)
    if dim != OUTPUT_DIM:
        raise RuntimeError(
            f"model {config.model_identifier!r} produces {dim}-dim vectors, "
            f"this service only serves {OUTPUT_DIM}"
        )

    app = FastAPI(title="title-embedding-service")
    app.state.encoder = encoder
    app.state.config = config

    @app.exception_handler(Exception)
    async def on_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/health")
    async def health():
        return {"dim": OUTPUT_DIM, "model": config.model_identifier,
                "batch_limit": config.batch_limit}

    @app.post("/embed")
    async def embed(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400,
                                content={"error": "body must be JSON"})
        texts = body.get("texts")
        if not isinstance(texts, list) or any(not isinstance(t, str) for t in texts):
            return JSONResponse(
                status_code=400,
                content={"error": 'body must carry {"texts": [str, ...]}'},
            )
        if len(texts) > config.batch_limit:
            return JSONResponse(
                status_code=413,
                content={"error": f"batch of {len(texts)} exceeds the "
                                  f"limit of {config.batch_limit}"},
            )
        if not texts:
            return {"vectors": [], "dim": OUTPUT_DIM}
        vectors = encoder.encode(texts)
        return {"vectors": vectors.tolist(), "dim": OUTPUT_DIM}

    return app


def serve(config: ServiceConfig) -> None:
    """Run until interrupted."""
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


class BackgroundServer:
    """Test helper: the service on an ephemeral port in a daemon thread."""

    def __init__(self, config: ServiceConfig, encoder=None) -> None:
        app = create_app(config, encoder)
        self._server = uvicorn.Server(uvicorn.Config(
            app, host=config.host, port=config.port, log_level="error",
        ))
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self) -> str:
        self._thread.start()
        deadline = time.time() + 10.0
        while not self._server.started:
            if time.time() > deadline:
                raise RuntimeError("service did not start in time")
            time.sleep(0.01)
        host, port = self._server.servers[0].sockets[0].getsockname()[:2]
        return f"http://{host}:{port}"

    def __exit__(self, *exc) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=5.0)
