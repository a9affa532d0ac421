"""Pipeline orchestration: synth/ingest -> interest networks -> comparisons,
zones, correlations, models — every stage content-addressed in the store.

A config (JSON or TOML) names the stages to run plus per-stage settings.
Rerunning an unchanged config is a no-op: every artifact lands at a path
keyed by the config hash, so checksums in the manifest cannot drift.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures
from .geo import Projection
from .hexgrid import GridResolution, HexGrid, grid_for
from .inet import INet, aggregate, build_user_counts, filter_top_edges, load_inet, net_stats
from .ingest import (
    ContextProfile,
    Interaction,
    Region,
    Venue,
    assign_venues_to_regions,
    attach_category_frequencies,
    filter_users,
    load_context,
    load_interactions,
    load_regions,
    load_venues,
)
from .metrics import FACTORS, FactorMetricSpec, compare_inets, correlate_edges_with_factor
from .recsys import (
    TreeEnsembleModel,
    build_feature_table,
    classify_mobility,
    evaluate,
    label_user,
    mean_abs_shapley,
    permutation_importance,
    random_search,
    recommend,
    train,
)
from .recsys.features import DEFAULT_SPECS, assemble_features, feature_names
from .recsys.labeling import UserInterestProfile
from .store import ArtifactStore, config_hash
from .synth import SynthConfig, generate
from .upzones import leiden, profile_zones, spatially_connected_fraction

logger = logging.getLogger(__name__)


class PipelineError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class EligibilityError(ValueError):
    pass


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        import tomllib

        return tomllib.loads(text)
    return json.loads(text)


@dataclass
class World:
    """Everything the analysis stages need, in memory."""

    level: str
    projection: Projection
    regions: list[Region]
    venues: list[Venue]
    interactions: list[Interaction]
    venue_region_map: dict[str, str]

    regions_by_id: dict[str, Region] = field(init=False)

    def __post_init__(self):
        attach_category_frequencies(self.regions, self.venues, self.venue_region_map)
        self.regions_by_id = {r.region_id: r for r in self.regions}

    def centroids(self) -> dict[str, tuple[float, float]]:
        return {r.region_id: r.centroid for r in self.regions}


def _world_from_synth(data) -> World:
    return World(
        level=data.config.resolution,
        projection=data.projection,
        regions=data.regions,
        venues=data.venues,
        interactions=data.interactions,
        venue_region_map=data.venue_region_map,
    )


def _world_from_inputs(inputs: dict) -> World:
    regions, projection = load_regions(inputs["regions"], level=inputs.get("level", "city"))
    if "context" in inputs:
        load_context(inputs["context"], regions)
    venues = load_venues(inputs["venues"]).records
    vmap = assign_venues_to_regions(venues, regions)
    interactions: list[Interaction] = []
    spec = inputs["interactions"]
    if isinstance(spec, str):
        interactions = list(load_interactions(spec).records)
    else:
        for platform, path in sorted(spec.items()):
            interactions += load_interactions(path, platform=platform).records
    return World(
        level=inputs.get("level", "city"),
        projection=projection,
        regions=regions,
        venues=venues,
        interactions=interactions,
        venue_region_map=vmap,
    )


def _regions_feature_json(regions: list[Region], extra_props=None) -> bytes:
    features = []
    for r in regions:
        props = {"id": r.region_id, "level": r.level, "centroid": list(r.centroid)}
        if extra_props:
            props.update(extra_props.get(r.region_id, {}))
        geom = None
        if r.boundary:
            geom = {"type": "Polygon", "coordinates": [[[x, y] for x, y in ring] for ring in r.boundary]}
        features.append({"type": "Feature", "properties": props, "geometry": geom})
    return json.dumps({"type": "FeatureCollection", "features": features}, sort_keys=True).encode()


def _context_csv(regions: list[Region]) -> bytes:
    scene_cols = [f"s{i}" for i in range(1, 16)]
    race_cols = sorted({c for r in regions if r.context and r.context.race_counts
                        for c in r.context.race_counts})
    cols = ["region_id", "population", "income", "education", "employment", "literacy",
            "vote_share", *race_cols, *scene_cols]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols)
    writer.writeheader()
    for r in regions:
        ctx = r.context or ContextProfile()
        row = {"region_id": r.region_id}
        for name in ("population", "income", "education", "employment", "literacy", "vote_share"):
            value = getattr(ctx, name)
            if value is not None:
                row[name] = value
        for c in race_cols:
            if ctx.race_counts and c in ctx.race_counts:
                row[c] = ctx.race_counts[c]
        if ctx.scene_vector:
            for i, v in enumerate(ctx.scene_vector, start=1):
                row[f"s{i}"] = v
        writer.writerow(row)
    return buf.getvalue().encode()


def _inet_csv(net: INet) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["src", "dst", "weight"])
    for (a, b), w in sorted(net.edges.items()):
        writer.writerow([a, b, w])
    for a, w in sorted(net.self_loops.items()):
        if w > 0:
            writer.writerow([a, a, w])
    return buf.getvalue().encode()


def _net_from_store(store: ArtifactStore, name: str) -> INet:
    meta = store.read_json(name + ".meta")
    net = INet(level=meta["level"], platform=meta["platform"])
    for row in csv.DictReader(io.StringIO(store.read_bytes(name).decode())):
        a, b, w = row["src"], row["dst"], int(row["weight"])
        net.nodes.update((a, b))
        if a == b:
            net.self_loops[a] = w
        else:
            net.edges[(a, b) if a < b else (b, a)] = w
    net.nodes.update(meta.get("nodes", []))
    return net


def _eligible_profiles(world: World, k: int, min_places: int) -> list[UserInterestProfile]:
    kept = filter_users(world.interactions, world.venue_region_map, min_places)
    counts = build_user_counts(kept, world.venue_region_map)
    return [p for p in (label_user(uc, k) for uc in counts) if p.eligible]


def _fine_level(world: World, fine_resolution: str):
    """Sub-region layer: a finer hex grid located over the same projection.

    Fine cells inherit their parent's context; a fine cell's parent is the
    coarse region containing its center.
    """
    res = GridResolution.named(fine_resolution)
    xs = [r.centroid[0] for r in world.regions]
    ys = [r.centroid[1] for r in world.regions]
    from shapely.geometry import Polygon as ShPolygon

    pad = 5000.0
    boundary = ShPolygon([
        (min(xs) - pad, min(ys) - pad), (max(xs) + pad, min(ys) - pad),
        (max(xs) + pad, max(ys) + pad), (min(xs) - pad, max(ys) + pad),
    ])
    grid = grid_for(boundary, res)

    fine_map: dict[str, str] = {}
    for v in world.venues:
        x, y = world.projection.forward(v.lat, v.lon)
        fine_map[v.venue_id] = grid.locate_xy(x, y)

    parent_of: dict[str, str] = {}
    fine_regions: dict[str, Region] = {}
    coarse_geoms = [(r.region_id, r.geometry()) for r in world.regions if r.boundary]
    from shapely.geometry import Point

    for venue_id, cell_id in fine_map.items():
        if cell_id in fine_regions:
            continue
        _, q, r = cell_id.split(":")[-3], int(cell_id.split(":")[1]), int(cell_id.split(":")[2])
        center = grid.cell_center(q, r)
        lat, lon = world.projection.inverse(*center)
        parent = None
        pt = Point(lon, lat)
        for rid, geom in coarse_geoms:
            if geom is not None and geom.covers(pt):
                parent = rid
                break
        if parent is None:
            parent = world.venue_region_map.get(venue_id)
        if parent is None:
            continue
        parent_of[cell_id] = parent
        parent_region = world.regions_by_id[parent]
        fine_regions[cell_id] = Region(
            region_id=cell_id,
            level=fine_resolution,
            centroid=center,
            boundary=None,
            context=parent_region.context,
        )
    # fine cells carry their own venue mix even though the rest is inherited
    fine_list = [fine_regions[c] for c in sorted(fine_regions)]
    for region in fine_list:
        region.context = ContextProfile(**{
            k2: getattr(region.context, k2) if region.context else None
            for k2 in ("population", "income", "education", "employment",
                       "literacy", "race_counts", "vote_share", "scene_vector")
        })
    attach_category_frequencies(fine_list, world.venues, fine_map)
    return grid, fine_map, {r.region_id: r for r in fine_list}, parent_of


def _fine_training_rows(profiles, fine_counts_by_user, parent_of, fine_regions, specs, include_population, m):
    """Label = top-m most reviewed fine cells within each of the user's top
    coarse regions; features are computed against the coarse profile."""
    names = feature_names(specs, include_population)
    data, labels, groups = [], [], []
    excluded = 0
    for profile in profiles:
        fine_counts = fine_counts_by_user.get(profile.user_id)
        if fine_counts is None:
            continue
        by_parent: dict[str, list[tuple[str, int]]] = {}
        for cell, count in fine_counts.counts.items():
            parent = parent_of.get(cell)
            if parent in profile.top_set:
                by_parent.setdefault(parent, []).append((cell, count))
        for parent, cells in sorted(by_parent.items()):
            if len(cells) < 2:
                continue
            ranked = sorted(cells, key=lambda cc: (-cc[1], fine_counts.first_seen.get(cc[0], 0), cc[0]))
            top_cells = {c for c, _ in ranked[:m]}
            for cell, _ in ranked:
                region = fine_regions.get(cell)
                if region is None:
                    continue
                fv = assemble_features(profile, cell, {**fine_regions, cell: region},
                                       specs, include_population)
                # reference sets live at the coarse level
                if fv.missing:
                    excluded += 1
                    continue
                data.append([fv.values[n] for n in names])
                labels.append(1 if cell in top_cells else 0)
                groups.append(profile.user_id)
    X = np.asarray(data, dtype=float) if data else np.empty((0, len(names)))
    return names, X, np.asarray(labels, dtype=float), groups, excluded


def run_pipeline(config_path_or_dict, store_root=None) -> dict:
    """Execute the configured stages; returns the manifest as a dict.

    Pipeline runs are exclusive per store: a .lock file is held for the whole
    run, so concurrent writers cannot interleave."""
    cfg = load_config(config_path_or_dict) if not isinstance(config_path_or_dict, dict) else config_path_or_dict
    pipe = cfg.get("pipeline", {})
    root = store_root or pipe.get("store", "store")
    store = ArtifactStore(root)
    stages = pipe.get("stages", [])
    seed = int(pipe.get("seed", 0))
    chash = config_hash(cfg)

    lock_path = store.root / ".lock"
    try:
        lock_fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StoreError(f"store {store.root} is locked by another pipeline run") from None
    try:
        os.write(lock_fd, str(os.getpid()).encode())
        os.close(lock_fd)
        return _run_stages(cfg, store, stages, seed, chash)
    finally:
        lock_path.unlink(missing_ok=True)


def _run_stages(cfg: dict, store: ArtifactStore, stages: list[str], seed: int, chash: str) -> dict:

    world: World | None = None
    written_this_stage: list[str] = []

    def put_json(name, obj):
        entry = store.put(name, "json", json.dumps(obj, sort_keys=True, indent=1).encode(), chash)
        written_this_stage.append(name)
        return entry

    def put_bytes(name, kind, payload):
        entry = store.put(name, kind, payload, chash)
        written_this_stage.append(name)
        return entry

    def ensure_world() -> World:
        nonlocal world
        if world is None:
            if "inputs" in cfg:
                world = _world_from_inputs(cfg["inputs"])
            elif "synth" in cfg:
                world = _world_from_synth(generate(SynthConfig.from_dict(cfg["synth"])))
            else:
                raise ValueError("config needs an 'inputs' or 'synth' section")
        return world

    for stage in stages:
        written_this_stage = []
        try:
            if stage == "synth":
                synth_cfg = dict(cfg.get("synth", {}))
                synth_cfg.setdefault("seed", seed)
                data = generate(SynthConfig.from_dict(synth_cfg))
                world = _world_from_synth(data)
                lines = "".join(
                    json.dumps({"user_id": it.user_id, "venue_id": it.venue_id,
                                "ts": it.ts, "platform": it.platform}, sort_keys=True) + "\n"
                    for it in data.interactions
                )
                put_bytes("interactions.jsonl", "jsonl", lines.encode())
                buf = io.StringIO()
                writer = csv.writer(buf)
                writer.writerow(["venue_id", "name", "category", "lat", "lon"])
                for v in data.venues:
                    writer.writerow([v.venue_id, v.name, v.category, repr(v.lat), repr(v.lon)])
                put_bytes("venues.csv", "csv", buf.getvalue().encode())
                put_bytes("regions", "json", _regions_feature_json(world.regions))
                put_bytes("context.csv", "csv", _context_csv(world.regions))
                put_json("projection", {"lat0": world.projection.lat0, "lon0": world.projection.lon0})

            elif stage == "inet":
                w = ensure_world()
                if not store.has("regions"):
                    put_bytes("regions", "json", _regions_feature_json(w.regions))
                    put_bytes("context.csv", "csv", _context_csv(w.regions))
                    put_json("projection", {"lat0": w.projection.lat0, "lon0": w.projection.lon0})
                icfg = cfg.get("inet", {})
                keep = icfg.get("keep_fraction")
                min_regions = int(icfg.get("min_distinct_regions", 0))
                platforms = icfg.get("platforms") or sorted({it.platform for it in w.interactions})
                for platform in platforms:
                    its = [it for it in w.interactions if it.platform == platform]
                    if min_regions:
                        its = filter_users(its, w.venue_region_map, min_regions)
                    net = aggregate(build_user_counts(its, w.venue_region_map), w.level, platform)
                    if keep:
                        net = filter_top_edges(net, float(keep))
                    name = f"inet_{platform}_{w.level}"
                    put_bytes(name, "csv", _inet_csv(net))
                    stats = net_stats(net)
                    put_json(name + ".meta", {
                        "level": w.level, "platform": platform, "nodes": sorted(net.nodes),
                        "stats": vars(stats),
                    })

            elif stage == "compare":
                w = ensure_world()
                ccfg = cfg.get("compare", {})
                a, b = ccfg.get("a", "GP"), ccfg.get("b", "FS")
                mode = ccfg.get("mode", "intersection")
                net_a = _net_from_store(store, f"inet_{a}_{w.level}")
                net_b = _net_from_store(store, f"inet_{b}_{w.level}")
                report = compare_inets(net_a, net_b, mode=mode).to_dict()
                if ccfg.get("verbose"):
                    other = "union" if mode == "intersection" else "intersection"
                    report["alternate_mode"] = compare_inets(net_a, net_b, mode=other).to_dict()
                put_json(f"compare_{a}_{b}_{w.level}", report)
                keys = sorted(set(net_a.edges) & set(net_b.edges))
                fig_path = store.root / "figures" / f"compare_{a}_{b}_{w.level}.png"
                figures.save_compare_scatter(
                    [net_a.edges[k2] for k2 in keys], [net_b.edges[k2] for k2 in keys],
                    report, fig_path, label_a=a, label_b=b)

            elif stage == "upzones":
                w = ensure_world()
                ucfg = cfg.get("upzones", {})
                platform = ucfg.get("platform", "GP")
                gamma = float(ucfg.get("gamma", 1.0))
                net = _net_from_store(store, f"inet_{platform}_{w.level}")
                zones = leiden(net, gamma=gamma, seed=seed)
                profiles = profile_zones(zones, w.venues, w.venue_region_map)
                payload = {
                    "level": zones.level, "platform": platform, "gamma": gamma, "seed": seed,
                    "modularity": zones.modularity,
                    "n_zones": zones.n_zones(),
                    "spatially_connected_fraction": spatially_connected_fraction(zones),
                    "zones": {cell: z for cell, z in sorted(zones.zones.items())},
                    "profiles": {
                        str(p.zone_id): [[t, round(p.tfidf[t], 6)] for t in p.top_terms[:20]]
                        for p in profiles
                    },
                }
                put_json(f"upzones_{platform}_{w.level}", payload)
                boundaries = {
                    r.region_id: [w.projection.forward(lat, lon)[:2] for lon, lat in r.boundary[0]]
                    for r in w.regions if r.boundary and r.region_id in zones.zones
                }
                fig_path = store.root / "figures" / f"upzones_{platform}_{w.level}.png"
                figures.save_zone_map(boundaries, zones.zones, fig_path)

            elif stage == "correlate":
                w = ensure_world()
                ccfg = cfg.get("correlate", {})
                platform = ccfg.get("platform", "GP")
                keep = float(ccfg.get("keep_fraction", 0.75))
                net = _net_from_store(store, f"inet_{platform}_{w.level}")
                if keep < 1.0 and net.edges:
                    net = filter_top_edges(net, keep)
                wanted = ccfg.get("factors", "all")
                factors = list(FACTORS) if wanted == "all" else list(wanted)
                rows = []
                for factor in factors:
                    spec = FactorMetricSpec.for_factor(factor)
                    try:
                        rows.append(correlate_edges_with_factor(net, spec, w.regions_by_id))
                    except ValueError as exc:
                        rows.append({"factor": factor, "kind": spec.kind, "spearman": None,
                                     "n_edges_used": 0, "n_edges_dropped": len(net.edges),
                                     "error": str(exc)})
                buf = io.StringIO()
                writer = csv.DictWriter(buf, fieldnames=["factor", "kind", "spearman",
                                                         "n_edges_used", "n_edges_dropped", "error"])
                writer.writeheader()
                for row in rows:
                    writer.writerow(row)
                name = f"correlations_{platform}_{w.level}"
                put_bytes(name + ".csv", "csv", buf.getvalue().encode())
                put_json(name, {"platform": platform, "level": w.level,
                                "keep_fraction": keep, "rows": rows})
                good = [r for r in rows if r.get("spearman") is not None]
                if good:
                    figures.save_factor_correlation_bars(
                        good, store.root / "figures" / f"{name}.png",
                        title=f"{platform} {w.level}: factor correlations")

            elif stage == "train":
                w = ensure_world()
                tcfg = cfg.get("train", {})
                k = int(tcfg.get("k", 3))
                m = int(tcfg.get("m", 2))
                trials = int(tcfg.get("trials", 0))
                min_places = int(tcfg.get("min_distinct_places", max(6, k + 1)))
                include_population = bool(tcfg.get("include_population", True))
                profiles = _eligible_profiles(w, k, min_places)
                if not profiles:
                    raise ValueError("no eligible users for training")
                table = build_feature_table(profiles, w.regions_by_id,
                                            include_population=include_population)

                rng = np.random.default_rng(seed)
                from .recsys import grouped_split

                train_rows, test_rows = grouped_split(len(table.y), table.groups, 0.2, rng)
                params = dict(tcfg.get("hyperparams", {}))
                search_log = None
                if trials > 0:
                    result = random_search(table.X[train_rows], table.y[train_rows],
                                           table.feature_names, trials, seed=seed,
                                           groups=[g for g, keep in zip(table.groups, train_rows) if keep])
                    params = result.best_params
                    search_log = [{"params": t.params, "f1": t.f1} for t in result.trials]
                model = train(table.X[train_rows], table.y[train_rows], table.feature_names,
                              params or None, seed=seed)
                metrics = evaluate(model, table.X[test_rows], table.y[test_rows])
                importance = permutation_importance(model, table.X[test_rows], table.y[test_rows],
                                                    repeats=int(tcfg.get("importance_repeats", 5)),
                                                    seed=seed)
                shap_summary = mean_abs_shapley(model, table.X[test_rows],
                                                max_rows=int(tcfg.get("shap_rows", 50)))
                model.extra = {"level": w.level, "k": k, "role": "region"}
                put_bytes("model_region", "json", json.dumps(model.to_dict()).encode())

                # feature table as a reusable delimited artifact
                buf = io.StringIO()
                writer = csv.writer(buf)
                writer.writerow(["user_id", "candidate", "label", *table.feature_names])
                for (uid, cand), yv, xrow in zip(table.rows, table.y, table.X):
                    writer.writerow([uid, cand, int(yv), *[repr(float(v)) for v in xrow]])
                put_bytes("features_region.csv", "csv", buf.getvalue().encode())

                report = {
                    "k": k, "m": m, "n_profiles": len(profiles),
                    "n_rows": int(len(table.y)), "n_excluded": table.n_excluded,
                    "metrics": metrics, "permutation_importance": importance,
                    "mean_abs_shapley": shap_summary, "hyperparams": model.hyperparams,
                    "search_log": search_log,
                }

                cents = w.centroids()
                mobility = {p.user_id: classify_mobility(p, cents).mobility_class for p in profiles}
                share = sum(1 for c in mobility.values() if c == "explorer") / len(mobility)
                report["explorer_fraction"] = share
                if tcfg.get("by_mobility_class", True):
                    for cls in ("returner", "explorer"):
                        subset = [p for p in profiles if mobility[p.user_id] == cls]
                        sub_table = build_feature_table(subset, w.regions_by_id,
                                                        include_population=include_population)
                        if len(sub_table.y) < 40 or len(set(sub_table.y)) < 2:
                            continue
                        tr, te = grouped_split(len(sub_table.y), sub_table.groups, 0.2,
                                               np.random.default_rng(seed))
                        cls_model = train(sub_table.X[tr], sub_table.y[tr],
                                          sub_table.feature_names, params or None, seed=seed)
                        cls_metrics = evaluate(cls_model, sub_table.X[te], sub_table.y[te])
                        cls_imp = permutation_importance(cls_model, sub_table.X[te], sub_table.y[te],
                                                         repeats=5, seed=seed)
                        cls_model.extra = {"level": w.level, "k": k, "role": cls}
                        put_bytes(f"model_{cls}", "json", json.dumps(cls_model.to_dict()).encode())
                        report[f"{cls}_metrics"] = cls_metrics
                        report[f"{cls}_importance"] = cls_imp

                if m >= 1:
                    fine_res = tcfg.get("fine_resolution")
                    if fine_res is None:
                        order = ["h6", "h7", "h8", "h9"]
                        fine_res = order[min(order.index(w.level) + 1, 3)] if w.level in order else "h9"
                    grid, fine_map, fine_regions, parent_of = _fine_level(w, fine_res)
                    fine_counts = {uc.user_id: uc for uc in build_user_counts(w.interactions, fine_map)}
                    names, Xf, yf, groups_f, _ = _fine_training_rows(
                        profiles, fine_counts, parent_of, fine_regions,
                        DEFAULT_SPECS, include_population, m)
                    if len(yf) >= 40 and len(set(yf.tolist())) == 2:
                        trf, tef = grouped_split(len(yf), groups_f, 0.2, np.random.default_rng(seed))
                        fine_model = train(Xf[trf], yf[trf], names, params or None, seed=seed)
                        fine_model.extra = {"level": fine_res, "m": m, "role": "subregion"}
                        put_bytes("model_subregion", "json", json.dumps(fine_model.to_dict()).encode())
                        report["subregion_metrics"] = evaluate(fine_model, Xf[tef], yf[tef])
                        put_json("fine_regions", {
                            "resolution": fine_res,
                            "origin": list(grid.origin),
                            "cells": {
                                cid: {"centroid": list(fine_regions[cid].centroid),
                                      "parent": parent_of[cid]}
                                for cid in sorted(fine_regions)
                            },
                        })

                put_json("recsys_report", report)
                figures.save_importance_bars(
                    importance, store.root / "figures" / "importance_region.png",
                    title=f"Permutation importance (k={k}, level {w.level})")
                figures.save_importance_bars(
                    shap_summary, store.root / "figures" / "shapley_region.png",
                    title="Mean |Shapley| on held-out rows")

            else:
                raise ValueError(f"unknown stage {stage!r}")
        except Exception as exc:
            for name in written_this_stage:
                store.remove(name)
            raise PipelineError(stage, exc) from exc

    return {name: vars(entry) for name, entry in sorted(store.manifest.items())}
