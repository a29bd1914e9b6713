"""FastAPI app implementing POST /v1/embed and GET /healthz.

Request/response shapes follow the pipeline's embedding wire protocol:
``{items: [{id, text?} | {id, image_ref}], modality}`` in,
``{vectors: [{id, values}]}`` out. Handling is stateless, so any request
interleaving yields identical per-request responses.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import AdapterConfig
from .vectors import deterministic_vector


class EmbedItem(BaseModel):
    id: str
    text: str | None = None
    image_ref: str | None = None


class EmbedRequest(BaseModel):
    items: list[EmbedItem]
    modality: Literal["text", "image"]


class VectorOut(BaseModel):
    id: str
    values: list[float]


class EmbedResponse(BaseModel):
    vectors: list[VectorOut]


class _Encoder:
    """Lazy sentence-transformers wrapper for encoder mode."""

    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer

        self.model = SentenceTransformer(model_name)

    def encode_texts(self, texts: list[str]):
        return self.model.encode(texts, convert_to_numpy=True, normalize_embeddings=True)

    def encode_images(self, paths: list[str]):
        from PIL import Image

        images = [Image.open(p) for p in paths]
        return self.model.encode(images, convert_to_numpy=True, normalize_embeddings=True)


def create_app(config: AdapterConfig) -> FastAPI:
    app = FastAPI(title="embed-adapter", version="0.1.0")
    state = {"encoder": None}

    def encoder() -> _Encoder:
        if state["encoder"] is None:
            state["encoder"] = _Encoder(config.model_name)
        return state["encoder"]

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "mode": config.mode}

    @app.post("/v1/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        contents = []
        for item in request.items:
            content = item.text if request.modality == "text" else item.image_ref
            if content is None:
                raise HTTPException(
                    status_code=400,
                    detail=f"item {item.id!r} lacks content for modality {request.modality!r}",
                )
            contents.append(content)
        if config.mode == "deterministic":
            namespace = f"{config.model_id}:{request.modality}"
            rows = [deterministic_vector(c, config.dim, namespace) for c in contents]
        else:
            try:
                if request.modality == "text":
                    rows = encoder().encode_texts(contents)
                else:
                    rows = encoder().encode_images(contents)
            except FileNotFoundError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        return EmbedResponse(
            vectors=[
                VectorOut(id=item.id, values=[float(v) for v in row])
                for item, row in zip(request.items, rows)
            ]
        )

    return app
