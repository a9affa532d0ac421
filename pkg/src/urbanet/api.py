"""Read-only HTTP/JSON API over a built artifact store."""

from __future__ import annotations

import csv
import io

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .pipeline import EligibilityError
from .serving import load_serving_context, recommend_from_request
from .store import ArtifactStore

API_PREFIX = "/api/v1"


class RecommendBody(BaseModel):
    visited: list[tuple[str, int]] = Field(min_length=1)
    k: int = 3
    m: int = 2
    user_mode: str | None = None


def create_app(store: ArtifactStore) -> FastAPI:
    app = FastAPI(title="urbanet", version="1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    ctx = load_serving_context(store) if store.has("regions") else None

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": details})

    def artifact_json(name: str):
        if not store.has(name):
            raise HTTPException(status_code=404, detail=f"artifact {name!r} not found")
        return store.read_json(name), store.entry(name).config_hash

    def artifact_text(name: str) -> tuple[str, str]:
        if not store.has(name):
            raise HTTPException(status_code=404, detail=f"artifact {name!r} not found")
        return store.read_bytes(name).decode(), store.entry(name).config_hash

    @app.get(f"{API_PREFIX}/health")
    def health():
        return {"status": "ok", "artifacts": len(store.manifest)}

    @app.get(f"{API_PREFIX}/levels")
    def levels():
        found = sorted({
            name.rsplit("_", 1)[1]
            for name in store.manifest
            if name.startswith("inet_") and not name.endswith(".meta")
        })
        return {"levels": found}

    @app.get(f"{API_PREFIX}/regions")
    def regions(level: str | None = None):
        doc, chash = artifact_json("regions")
        if level:
            doc = {
                "type": "FeatureCollection",
                "features": [f for f in doc["features"]
                             if f["properties"].get("level") == level],
            }
        return {"config_hash": chash, "regions": doc}

    @app.get(f"{API_PREFIX}/inet")
    def inet(platform: str, level: str):
        name = f"inet_{platform}_{level}"
        text, chash = artifact_text(name)
        meta, _ = artifact_json(name + ".meta")
        edges = []
        self_loops = {}
        for row in csv.DictReader(io.StringIO(text)):
            if row["src"] == row["dst"]:
                self_loops[row["src"]] = int(row["weight"])
            else:
                edges.append([row["src"], row["dst"], int(row["weight"])])
        return {"config_hash": chash, "meta": meta, "edges": edges,
                "self_loops": self_loops, "stats": meta.get("stats")}

    @app.get(f"{API_PREFIX}/upzones")
    def upzones(platform: str, level: str):
        doc, chash = artifact_json(f"upzones_{platform}_{level}")
        return {"config_hash": chash, **doc}

    @app.get(f"{API_PREFIX}/compare")
    def compare(a: str, b: str, level: str | None = None):
        if level is None:
            names = [n for n in store.manifest if n.startswith(f"compare_{a}_{b}_")]
            if not names:
                raise HTTPException(status_code=404,
                                    detail=f"artifact 'compare_{a}_{b}_*' not found")
            name = sorted(names)[0]
        else:
            name = f"compare_{a}_{b}_{level}"
        doc, chash = artifact_json(name)
        return {"config_hash": chash, **doc}

    @app.get(f"{API_PREFIX}/correlations")
    def correlations(net: str):
        names = [n for n in store.manifest
                 if n.startswith(f"correlations_{net}") and store.entry(n).kind == "json"]
        if not names:
            raise HTTPException(status_code=404,
                                detail=f"artifact 'correlations_{net}' not found")
        doc, chash = artifact_json(sorted(names)[0])
        return {"config_hash": chash, **doc}

    @app.post(f"{API_PREFIX}/recommend")
    def recommend_endpoint(body: RecommendBody):
        if ctx is None or "region" not in ctx.models:
            raise HTTPException(status_code=404, detail="artifact 'model_region' not found")
        try:
            return recommend_from_request(ctx, body.model_dump())
        except EligibilityError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    return app
