"""HTTP inference service: ``GET /health`` and ``POST /predict?plant=<name>``.

The request body is the raw image (``image/jpeg`` or ``image/png``).
"""
from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.concurrency import run_in_threadpool

from ..errors import DecodeError, EmptyForeground, PlantDxError
from ..forest import ForestModel, load_model
from ..inference import predict_bytes
from .schemas import ErrorResponse, HealthResponse, PredictionResponse

log = logging.getLogger(__name__)

MAX_BODY = 10 * 1024 * 1024
CONTENT_TYPES = {"image/jpeg", "image/png"}


class RegistryError(PlantDxError):
    pass


@dataclass(frozen=True)
class ModelRegistry:
    models: Mapping[str, ForestModel]

    def plants(self) -> list[str]:
        return sorted(self.models)


def load_registry(models_dir) -> ModelRegistry:
    root = Path(models_dir)
    if not root.is_dir():
        raise RegistryError(f"models directory not found: {root}")
    models: dict[str, ForestModel] = {}
    for path in sorted(root.glob("*.json")):
        model = load_model(path)
        if model.plant in models:
            raise RegistryError(f"two models for plant {model.plant!r} in {root}")
        models[model.plant] = model
    if not models:
        raise RegistryError(f"no model files (*.json) in {root}")
    return ModelRegistry(MappingProxyType(models))


def _error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(ErrorResponse(error=code, detail=detail).model_dump(), status_code=status)


async def _read_capped(request: Request, limit: int) -> bytes | None:
    chunks, size = [], 0
    async for chunk in request.stream():
        size += len(chunk)
        if size > limit:
            return None
        chunks.append(chunk)
    return b"".join(chunks)


def create_app(models_dir=None, registry: ModelRegistry | None = None, max_inflight: int = 4,
               max_body: int = MAX_BODY) -> FastAPI:
    """Build the app; the registry is loaded eagerly so a bad models dir fails at startup."""
    if registry is None:
        registry = load_registry(models_dir)
    gate = asyncio.Semaphore(max_inflight)
    app = FastAPI(title="plantdx", version="0.1.0")
    app.state.registry = registry

    @app.api_route("/health", methods=["GET", "HEAD"], response_model=HealthResponse)
    async def health(request: Request):
        if request.method == "HEAD":
            return Response(status_code=200)
        return HealthResponse(status="ok", models=registry.plants())

    @app.post("/predict", response_model=PredictionResponse,
              responses={400: {"model": ErrorResponse}, 404: {"model": ErrorResponse},
                         413: {"model": ErrorResponse}, 415: {"model": ErrorResponse}})
    async def predict(request: Request, plant: str | None = None):
        if not plant:
            return _error(400, "missing_plant", "query parameter 'plant' is required")
        model = registry.models.get(plant)
        if model is None:
            return _error(404, "unknown_plant", f"no model for plant {plant!r}; have {registry.plants()}")
        ctype = request.headers.get("content-type", "").split(";")[0].strip().lower()
        if ctype not in CONTENT_TYPES:
            return _error(415, "unsupported_media_type",
                          f"content-type {ctype or '<none>'!r} not in {sorted(CONTENT_TYPES)}")
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > max_body:
            return _error(413, "payload_too_large", f"body exceeds {max_body} bytes")
        body = await _read_capped(request, max_body)
        if body is None:
            return _error(413, "payload_too_large", f"body exceeds {max_body} bytes")
        async with gate:
            try:
                result = await run_in_threadpool(predict_bytes, model, body)
            except DecodeError as exc:
                return _error(400, "undecodable_image", str(exc))
            except EmptyForeground as exc:
                return _error(400, "empty_foreground", str(exc))
        return PredictionResponse(**result)

    return app
