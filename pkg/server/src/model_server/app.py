"""FastAPI application: schema-validated wire-protocol endpoints.

Requests and responses are validated against the shared JSON schema files
(the single source of truth for both the engine and this server). Malformed
requests get a 400 naming the offending field path; endpoints whose model
failed to load report 503 with the reason.
"""

from __future__ import annotations

import json
from functools import partial
from pathlib import Path

import jsonschema
from fastapi import FastAPI, Request, Response

from . import fallback
from .config import ALL_ENDPOINTS, ServerConfig
from .wire import WireError


def _load_validators(schema_dir: Path) -> dict:
    validators = {}
    for name in ALL_ENDPOINTS:
        for kind in ("request", "response"):
            path = schema_dir / f"{name}_{kind}.json"
            schema = json.loads(path.read_text())
            jsonschema.Draft202012Validator.check_schema(schema)
            validators[(name, kind)] = jsonschema.Draft202012Validator(schema)
    return validators


def _error_path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(
        f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
    )


def _json_response(payload: dict, status: int = 200) -> Response:
    # canonical serialization so identical payloads are identical bytes
    return Response(
        content=json.dumps(payload, sort_keys=True, separators=(",", ":")),
        status_code=status,
        media_type="application/json",
    )


def _error(status: int, message: str) -> Response:
    return _json_response({"error": message}, status)


def load_model(endpoint: str, identifier: str):
    """Load a real pretrained model for `endpoint`.

    No real model integrations are bundled; wiring one in means registering
    it here. Until then any non-fallback endpoint reports load failure.
    """
    raise RuntimeError(f"no model integration registered for {identifier!r}")


def create_app(config: ServerConfig | None = None, pair_size: int = 512) -> FastAPI:
    config = config or ServerConfig()
    validators = _load_validators(config.resolved_schema_dir())
    app = FastAPI(title="model-server", docs_url=None, redoc_url=None)

    handlers = {
        "depth": fallback.depth,
        "segment": fallback.segment,
        "inpaint": fallback.inpaint,
        "pair": partial(fallback.pair, size=pair_size),
        "describe": fallback.describe,
        "detect": fallback.detect,
    }

    # endpoint -> None (healthy) or failure reason
    failures: dict[str, str | None] = {}
    for name in config.endpoints:
        if config.fallback:
            failures[name] = None
            continue
        try:
            load_model(name, config.models.get(name, name))
            failures[name] = None
        except RuntimeError as e:
            failures[name] = str(e)

    def make_route(name: str):
        async def route(request: Request) -> Response:
            if failures[name] is not None:
                return _error(503, f"/{name} unavailable: {failures[name]}")
            body = await request.body()
            try:
                payload = json.loads(body)
            except ValueError:
                return _error(400, "request body is not valid JSON")
            errs = sorted(
                validators[(name, "request")].iter_errors(payload),
                key=lambda e: list(e.absolute_path),
            )
            if errs:
                return _error(
                    400, f"invalid request at {_error_path(errs[0])}: {errs[0].message}"
                )
            try:
                out = handlers[name](payload, body)
            except fallback.FallbackError as e:
                return _error(400, f"invalid request at {e.path}: {e}")
            except WireError as e:
                return _error(400, f"invalid request payload: {e}")
            errs = list(validators[(name, "response")].iter_errors(out))
            if errs:  # internal bug guard: never emit an off-schema response
                return _error(500, f"response failed schema validation: {errs[0].message}")
            return _json_response(out)

        return route

    for name in config.endpoints:
        app.add_api_route(f"/{name}", make_route(name), methods=["POST"])

    @app.get("/healthz")
    async def healthz() -> Response:
        return _json_response(
            {
                "endpoints": {
                    name: {"available": failures.get(name) is None,
                           "reason": failures.get(name)}
                    for name in config.endpoints
                },
                "fallback": config.fallback,
            }
        )

    return app
