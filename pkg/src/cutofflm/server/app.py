"""HTTP API: GET /v1/models, POST /v1/chat, POST /v1/compare.

Errors are JSON objects {"code", "message"} with conventional status codes:
404 for unknown models, 400 for invalid requests or context overflow.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..chat import ROLES
from .registry import ModelRegistry, UnknownModelError
from .service import ChatResult, chat_completion, compare


class ChatMessage(BaseModel):
    role: str
    text: str


class ChatBody(BaseModel):
    model: str
    messages: list[ChatMessage] = Field(min_length=1)
    temperature: float = 0.8
    top_k: int = 50
    max_tokens: int = 128
    seed: int | None = None


class CompareBody(BaseModel):
    models: list[str] = Field(min_length=2)
    messages: list[ChatMessage] = Field(min_length=1)
    temperature: float = 0.8
    top_k: int = 50
    max_tokens: int = 128
    seed: int | None = None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _chat_payload(result: ChatResult) -> dict:
    return {
        "model": result.model_id,
        "text": result.text,
        "seed": result.seed,
        "finish_reason": result.finish_reason,
        "usage": {
            "prompt_tokens": result.prompt_tokens,
            "completion_tokens": result.completion_tokens,
        },
    }


def create_app(registry: ModelRegistry) -> FastAPI:
    app = FastAPI(title="cutofflm", version="1")

    @app.get("/v1/models")
    def list_models() -> list[dict]:
        return [
            {"id": e.model_id, "cutoff_year": e.cutoff_year, "stage": e.stage}
            for e in registry.list_entries()
        ]

    @app.post("/v1/chat")
    def chat(body: ChatBody):
        if any(m.role not in ROLES for m in body.messages):
            return _error(400, "invalid_request", "message roles must be system/user/assistant")
        try:
            result = chat_completion(
                registry,
                body.model,
                [(m.role, m.text) for m in body.messages],
                temperature=body.temperature,
                top_k=body.top_k,
                max_tokens=body.max_tokens,
                seed=body.seed,
            )
        except UnknownModelError as exc:
            return _error(404, "model_not_found", f"unknown model {exc.args[0]!r}")
        except ValueError as exc:
            code = "context_overflow" if "context window" in str(exc) else "invalid_request"
            return _error(400, code, str(exc))
        return _chat_payload(result)

    @app.post("/v1/compare")
    def compare_models(body: CompareBody):
        if any(m.role not in ROLES for m in body.messages):
            return _error(400, "invalid_request", "message roles must be system/user/assistant")
        try:
            results = compare(
                registry,
                body.models,
                [(m.role, m.text) for m in body.messages],
                temperature=body.temperature,
                top_k=body.top_k,
                max_tokens=body.max_tokens,
                seed=body.seed,
            )
        except UnknownModelError as exc:
            return _error(404, "model_not_found", f"unknown model(s): {exc.args[0]}")
        except ValueError as exc:
            return _error(400, "invalid_request", str(exc))
        return {
            "results": [
                _chat_payload(r) if isinstance(r, ChatResult) else r for r in results
            ]
        }

    return app
