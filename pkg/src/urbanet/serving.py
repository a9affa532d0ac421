"""Shared recommendation path over a built artifact store.

The CLI `recommend` command and the HTTP API both call
`recommend_from_request`, so their outputs are identical for the same store
and request.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .geo import Projection
from .hexgrid import GridResolution, HexGrid
from .inet import UserRegionCounts
from .ingest import (
    ContextProfile,
    Region,
    Venue,
    assign_venues_to_regions,
    attach_category_frequencies,
)
from .pipeline import EligibilityError
from .recsys import TreeEnsembleModel, classify_mobility, label_user, recommend
from .store import ArtifactStore

ELIGIBILITY_MESSAGE = (
    "need at least k+1 visited regions and a review count at rank k strictly "
    "above rank k+1"
)


@dataclass
class ServingContext:
    store: ArtifactStore
    regions_by_id: dict[str, Region]
    models: dict[str, TreeEnsembleModel]
    coarse_ids: list[str]
    sub_candidates: dict[str, list[str]] = field(default_factory=dict)
    config_hash: str = ""


def _load_regions(store: ArtifactStore) -> dict[str, Region]:
    doc = json.loads(store.read_bytes("regions").decode())
    regions: dict[str, Region] = {}
    for feat in doc["features"]:
        props = feat["properties"]
        rid = str(props["id"])
        boundary = None
        if feat.get("geometry"):
            boundary = [[(x, y) for x, y in ring] for ring in feat["geometry"]["coordinates"]]
        regions[rid] = Region(
            region_id=rid, level=props.get("level", "city"),
            centroid=tuple(props.get("centroid", (0.0, 0.0))),
            boundary=boundary, context=ContextProfile(),
        )
    return regions


def _load_context(store: ArtifactStore, regions: dict[str, Region]) -> None:
    if not store.has("context.csv"):
        return
    race_like = {"white", "black", "asian", "hispanic", "brown", "yellow", "indigenous"}
    for row in csv.DictReader(io.StringIO(store.read_bytes("context.csv").decode())):
        region = regions.get(row["region_id"])
        if region is None:
            continue
        ctx = region.context
        for name in ("population", "income", "education", "employment", "literacy", "vote_share"):
            if row.get(name):
                setattr(ctx, name, float(row[name]))
        races = {c: float(row[c]) for c in race_like if row.get(c)}
        if races:
            ctx.race_counts = races
        scenes = [row.get(f"s{i}") for i in range(1, 16)]
        if all(s not in (None, "") for s in scenes):
            ctx.scene_vector = tuple(float(s) for s in scenes)


def _load_venues(store: ArtifactStore) -> list[Venue]:
    if not store.has("venues.csv"):
        return []
    out = []
    for row in csv.DictReader(io.StringIO(store.read_bytes("venues.csv").decode())):
        out.append(Venue(venue_id=row["venue_id"], name=row["name"],
                         category=row["category"], lat=float(row["lat"]),
                         lon=float(row["lon"])))
    return out


def load_serving_context(store: ArtifactStore) -> ServingContext:
    regions = _load_regions(store)
    coarse_ids = sorted(regions)
    _load_context(store, regions)
    venues = _load_venues(store)

    sub_candidates: dict[str, list[str]] = {}
    fine_ids: set[str] = set()
    fine_doc = store.read_json("fine_regions") if store.has("fine_regions") else None
    if fine_doc:
        for cell, info in sorted(fine_doc["cells"].items()):
            parent = info["parent"]
            sub_candidates.setdefault(parent, []).append(cell)
            fine_ids.add(cell)
            parent_ctx = regions[parent].context if parent in regions else ContextProfile()
            regions[cell] = Region(
                region_id=cell, level=fine_doc["resolution"],
                centroid=tuple(info["centroid"]), boundary=None,
                context=ContextProfile(**{
                    name: getattr(parent_ctx, name)
                    for name in ("population", "income", "education", "employment",
                                 "literacy", "race_counts", "vote_share", "scene_vector")
                }),
            )

    if venues:
        coarse = [regions[r] for r in coarse_ids if regions[r].boundary]
        vmap = assign_venues_to_regions(venues, coarse)
        attach_category_frequencies(coarse, venues, vmap)
        if fine_doc and store.has("projection"):
            proj = Projection(**store.read_json("projection"))
            grid = HexGrid(res=GridResolution.named(fine_doc["resolution"]),
                           origin=tuple(fine_doc["origin"]))
            fine_map = {}
            for v in venues:
                cell = grid.locate_xy(*proj.forward(v.lat, v.lon))
                if cell in fine_ids:
                    fine_map[v.venue_id] = cell
            attach_category_frequencies([regions[c] for c in sorted(fine_ids)], venues, fine_map)

    models: dict[str, TreeEnsembleModel] = {}
    chash = ""
    for name in ("model_region", "model_subregion", "model_returner", "model_explorer"):
        if store.has(name):
            models[name.removeprefix("model_")] = TreeEnsembleModel.from_dict(store.read_json(name))
            chash = store.entry(name).config_hash

    return ServingContext(store=store, regions_by_id=regions, models=models,
                          coarse_ids=coarse_ids, sub_candidates=sub_candidates,
                          config_hash=chash)


def recommend_from_request(ctx: ServingContext, request: dict) -> dict:
    """request: {"visited": [[region_id, count], ...], "k": int, "m": int,
    "user_mode": "auto"|"returner"|"explorer"|null}."""
    visited = request.get("visited") or []
    k = int(request.get("k", 3))
    m = int(request.get("m", 2))
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    counts: dict[str, int] = {}
    for rid, c in visited:
        if int(c) < 1:
            raise ValueError(f"review count for {rid} must be >= 1")
        if rid not in ctx.regions_by_id:
            raise ValueError(f"unknown region {rid!r}")
        counts[str(rid)] = counts.get(str(rid), 0) + int(c)

    profile = label_user(UserRegionCounts(user_id="request", counts=counts, first_seen={}), k)
    if not profile.eligible:
        raise EligibilityError(ELIGIBILITY_MESSAGE)

    mode = request.get("user_mode") or "auto"
    if mode == "auto":
        cents = {r: ctx.regions_by_id[r].centroid for r in profile.visited}
        mobility_class = classify_mobility(profile, cents).mobility_class
    elif mode in ("returner", "explorer"):
        mobility_class = mode
    else:
        raise ValueError(f"unknown user_mode {mode!r}")
    coarse_model = ctx.models.get(mobility_class) or ctx.models.get("region")
    if coarse_model is None:
        raise KeyError("model_region")

    models = {"region": coarse_model}
    sub_candidates = None
    if "subregion" in ctx.models and ctx.sub_candidates:
        models["subregion"] = ctx.models["subregion"]
        sub_candidates = ctx.sub_candidates

    candidates = [rid for rid in ctx.coarse_ids if rid not in counts]
    recs = recommend(profile, models, candidates, ctx.regions_by_id, k=k, m=m,
                     sub_candidates=sub_candidates)
    return {
        "config_hash": ctx.config_hash,
        "k": k,
        "m": m,
        "user_mode": mobility_class,
        "recommendations": [
            {
                "region_id": r.region_id,
                "score": r.score,
                "explanation": r.explanation,
                "top_factors": [f.to_dict() for f in r.top_factors],
                "sub_regions": [{"region_id": s.region_id, "score": s.score}
                                for s in r.sub_regions],
            }
            for r in recs
        ],
    }
