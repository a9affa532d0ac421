"""Command-line interface: urbanet {synth, grid, build-inet, compare,
upzones, correlate, train, recommend, serve, pipeline}.

Report commands write a PNG figure next to their delimited output unless
--no-fig is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

logger = logging.getLogger("urbanet")


def _load_cfg(path):
    from .pipeline import load_config

    return load_config(path) if path else {}


def cmd_synth(args):
    from .synth import SynthConfig, generate

    cfg = _load_cfg(args.config).get("synth", {}) if args.config else {}
    if args.seed is not None:
        cfg["seed"] = args.seed
    data = generate(SynthConfig.from_dict(cfg))
    paths = data.write(args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))


def cmd_grid(args):
    import shapely.ops
    from shapely.geometry import shape

    from .geo import Projection
    from .hexgrid import GridResolution, grid_for, tessellate

    doc = json.loads(Path(args.boundary).read_text())
    geoms = [shape(f["geometry"]) for f in doc["features"]]
    union = shapely.ops.unary_union(geoms)
    minx, miny, maxx, maxy = union.bounds
    proj = Projection.for_bbox(miny, minx, maxy, maxx)

    def project_ring(ring):
        return [proj.forward(lat, lon) for lon, lat in ring]

    from shapely.geometry import MultiPolygon, Polygon

    if isinstance(union, MultiPolygon):
        projected = MultiPolygon([
            Polygon(project_ring(g.exterior.coords),
                    [project_ring(i.coords) for i in g.interiors])
            for g in union.geoms
        ])
    else:
        projected = Polygon(project_ring(union.exterior.coords),
                            [project_ring(i.coords) for i in union.interiors])

    res = GridResolution.named(args.res) if args.res.startswith("h") \
        else GridResolution.custom(float(args.res))
    cells = tessellate(projected, res, inclusion=args.inclusion)
    grid = grid_for(projected, res)
    features = []
    for cell in cells:
        ring = [proj.inverse(x, y) for x, y in cell.vertices]
        ring.append(ring[0])
        features.append({
            "type": "Feature",
            "properties": {"id": cell.cell_id, "center": list(cell.center)},
            "geometry": {"type": "Polygon",
                         "coordinates": [[[lon, lat] for lat, lon in ring]]},
        })
    out = {
        "type": "FeatureCollection",
        "properties": {
            "resolution": res.name,
            "target_area_km2": res.target_area_km2,
            "origin": list(grid.origin),
            "projection": {"lat0": proj.lat0, "lon0": proj.lon0},
        },
        "features": features,
    }
    Path(args.out).write_text(json.dumps(out))
    print(f"wrote {len(cells)} cells to {args.out}")


def cmd_build_inet(args):
    from .inet import aggregate, build_user_counts, filter_top_edges, net_stats, save_inet
    from .ingest import assign_venues_to_regions, filter_users, load_interactions, load_regions, load_venues

    grid_meta = json.loads(Path(args.regions).read_text()).get("properties", {})
    regions, _ = load_regions(args.regions, level=args.level)
    venues = load_venues(args.venues).records
    vmap = assign_venues_to_regions(venues, regions)
    interactions = load_interactions(args.interactions, platform=args.platform).records
    if args.min_distinct:
        interactions = filter_users(interactions, vmap, args.min_distinct)
    net = aggregate(build_user_counts(interactions, vmap), args.level, args.platform)
    if args.keep_fraction:
        net = filter_top_edges(net, args.keep_fraction)
    meta = {"stats": vars(net_stats(net))}
    if grid_meta:
        meta["grid"] = grid_meta
    save_inet(net, args.out, meta=meta)
    print(json.dumps(meta["stats"]))


def cmd_compare(args):
    from .figures import save_compare_scatter
    from .inet import filter_top_edges, load_inet
    from .metrics import compare_inets

    net_a, _ = load_inet(args.a)
    net_b, _ = load_inet(args.b)
    if args.keep_fraction:
        net_a = filter_top_edges(net_a, args.keep_fraction)
        net_b = filter_top_edges(net_b, args.keep_fraction)
    report = compare_inets(net_a, net_b, mode=args.mode).to_dict()
    if args.verbose:
        other = "union" if args.mode == "intersection" else "intersection"
        report["alternate_mode"] = compare_inets(net_a, net_b, mode=other).to_dict()
    Path(args.out).write_text(json.dumps(report, indent=2))
    if not args.no_fig:
        keys = sorted(set(net_a.edges) & set(net_b.edges))
        fig = Path(args.out).with_suffix(".png")
        save_compare_scatter([net_a.edges[k] for k in keys], [net_b.edges[k] for k in keys],
                             report, fig, label_a=net_a.platform, label_b=net_b.platform)
        print(f"figure: {fig}")
    print(json.dumps({k: report[k] for k in ("pearson", "spearman", "kendall_centrality")}))


def _venue_cell_map(net_meta, venues, regions_path=None, level=None):
    """Venue -> node mapping, via stored grid parameters or region polygons."""
    from .geo import Projection
    from .hexgrid import GridResolution, HexGrid
    from .ingest import assign_venues_to_regions, load_regions

    grid_meta = net_meta.get("grid")
    if grid_meta and "origin" in grid_meta:
        res_name = grid_meta["resolution"]
        res = GridResolution.named(res_name) if res_name != "custom" \
            else GridResolution.custom(grid_meta["target_area_km2"])
        grid = HexGrid(res=res, origin=tuple(grid_meta["origin"]))
        proj = Projection(**grid_meta["projection"])
        return {v.venue_id: grid.locate(v.lat, v.lon, proj) for v in venues}
    if regions_path is None:
        raise SystemExit("net has no grid metadata; pass --regions for venue assignment")
    regions, _ = load_regions(regions_path, level=level or "h9")
    return assign_venues_to_regions(venues, regions)


def cmd_upzones(args):
    from .figures import save_zone_map
    from .geo import Projection
    from .inet import load_inet
    from .ingest import load_regions, load_venues
    from .upzones import leiden, profile_zones, spatially_connected_fraction

    net, meta = load_inet(args.net)
    zones = leiden(net, gamma=args.gamma, seed=args.seed)
    venues = load_venues(args.venues).records
    vmap = _venue_cell_map(meta, venues, args.regions, net.level)
    profiles = profile_zones(zones, venues, vmap)
    payload = {
        "level": net.level,
        "platform": net.platform,
        "gamma": args.gamma,
        "seed": args.seed,
        "modularity": zones.modularity,
        "n_zones": zones.n_zones(),
        "spatially_connected_fraction": spatially_connected_fraction(zones),
        "zones": {c: z for c, z in sorted(zones.zones.items())},
        "profiles": {str(p.zone_id): [[t, round(p.tfidf[t], 6)] for t in p.top_terms[:20]]
                     for p in profiles},
    }
    Path(args.out).write_text(json.dumps(payload, indent=1))
    if not args.no_fig and args.regions:
        regions, proj = load_regions(args.regions, level=net.level)
        boundaries = {
            r.region_id: [proj.forward(lat, lon) for lon, lat in r.boundary[0]]
            for r in regions if r.boundary and r.region_id in zones.zones
        }
        fig = Path(args.out).with_suffix(".png")
        save_zone_map(boundaries, zones.zones, fig)
        print(f"figure: {fig}")
    print(f"{zones.n_zones()} zones, modularity {zones.modularity:.4f}")


def cmd_correlate(args):
    import csv as _csv

    from .figures import save_factor_correlation_bars
    from .inet import filter_top_edges, load_inet
    from .ingest import (
        assign_venues_to_regions,
        attach_category_frequencies,
        load_context,
        load_regions,
        load_venues,
    )
    from .metrics import FACTORS, FactorMetricSpec, correlate_edges_with_factor

    net, meta = load_inet(args.net)
    regions, _ = load_regions(args.regions, level=net.level)
    load_context(args.context, regions)
    if args.venues:
        venues = load_venues(args.venues).records
        vmap = assign_venues_to_regions(venues, regions)
        attach_category_frequencies(regions, venues, vmap)
    if args.keep_fraction and net.edges:
        net = filter_top_edges(net, args.keep_fraction)
    by_id = {r.region_id: r for r in regions}
    factors = list(FACTORS) if args.factors == "all" else args.factors.split(",")
    rows = []
    for factor in factors:
        spec = FactorMetricSpec.for_factor(factor.strip())
        try:
            rows.append(correlate_edges_with_factor(net, spec, by_id))
        except ValueError as exc:
            rows.append({"factor": spec.factor, "kind": spec.kind, "spearman": None,
                         "n_edges_used": 0, "n_edges_dropped": len(net.edges),
                         "error": str(exc)})
    with open(args.out, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=["factor", "kind", "spearman",
                                                 "n_edges_used", "n_edges_dropped", "error"])
        writer.writeheader()
        writer.writerows(rows)
    good = [r for r in rows if r.get("spearman") is not None]
    if good and not args.no_fig:
        fig = Path(args.out).with_suffix(".png")
        save_factor_correlation_bars(good, fig)
        print(f"figure: {fig}")
    for row in rows:
        rho = row.get("spearman")
        print(f"{row['factor']:>18}: {'n/a' if rho is None else f'{rho:+.3f}'}")


def cmd_train(args):
    import csv as _csv

    import numpy as np

    from .figures import save_importance_bars
    from .recsys import evaluate, grouped_split, permutation_importance, random_search, train

    with open(args.features, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    meta_cols = [c for c in ("user_id", "candidate", "label") if c in header]
    names = [c for c in header if c not in meta_cols]
    li = header.index("label")
    gi = header.index("user_id") if "user_id" in header else None
    X = np.array([[float(r[header.index(n)]) for n in names] for r in rows])
    y = np.array([float(r[li]) for r in rows])
    groups = [r[gi] for r in rows] if gi is not None else None

    rng = np.random.default_rng(args.seed)
    train_rows, test_rows = grouped_split(len(y), groups, 0.2, rng)
    params = None
    search_log = None
    if args.trials > 0:
        result = random_search(
            X[train_rows], y[train_rows], names, args.trials, seed=args.seed,
            groups=[g for g, keep in zip(groups, train_rows) if keep] if groups else None)
        params = result.best_params
        search_log = [{"params": t.params, "f1": t.f1} for t in result.trials]
    model = train(X[train_rows], y[train_rows], names, params, seed=args.seed)
    metrics = evaluate(model, X[test_rows], y[test_rows])
    importance = permutation_importance(model, X[test_rows], y[test_rows],
                                        repeats=5, seed=args.seed)
    model.extra = {"metrics": metrics, "search_log": search_log}
    model.save(args.out)
    if not args.no_fig:
        fig = Path(args.out).with_suffix(".png")
        save_importance_bars(importance, fig)
        print(f"figure: {fig}")
    print(json.dumps(metrics))


def cmd_recommend(args):
    from .pipeline import EligibilityError
    from .recsys import TreeEnsembleModel
    from .serving import load_serving_context, recommend_from_request
    from .store import ArtifactStore

    request = json.loads(Path(args.profile).read_text())
    if args.k is not None:
        request["k"] = args.k
    if args.m is not None:
        request["m"] = args.m
    ctx = load_serving_context(ArtifactStore(args.store))
    if args.model:  # score with a model file instead of the store's artifact
        ctx.models["region"] = TreeEnsembleModel.load(args.model)
    try:
        out = recommend_from_request(ctx, request)
    except EligibilityError as exc:
        raise SystemExit(f"ineligible: {exc}")
    text = json.dumps(out, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)


def cmd_serve(args):
    import uvicorn

    from .api import create_app
    from .store import ArtifactStore

    app = create_app(ArtifactStore(args.store))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


def cmd_pipeline(args):
    from .pipeline import run_pipeline

    manifest = run_pipeline(args.config, store_root=args.store)
    print(json.dumps({name: entry["sha256"][:12] for name, entry in manifest.items()}, indent=2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urbanet",
                                     description="interest networks for cities")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="JSON/TOML config with a [synth] section")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("grid", help="tessellate a boundary into hex cells")
    p.add_argument("--boundary", required=True)
    p.add_argument("--res", default="h8", help="h6..h9 or a target area in km^2")
    p.add_argument("--inclusion", choices=("center", "overlap"), default="center")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("build-inet", help="aggregate interactions into an interest network")
    p.add_argument("--interactions", required=True)
    p.add_argument("--venues", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--platform", required=True)
    p.add_argument("--level", required=True)
    p.add_argument("--keep-fraction", type=float, default=None)
    p.add_argument("--min-distinct", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_inet)

    p = sub.add_parser("compare", help="cross-platform network similarity report")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--mode", choices=("intersection", "union"), default="intersection")
    p.add_argument("--keep-fraction", type=float, default=None)
    p.add_argument("--verbose", action="store_true")
    p.add_argument("--no-fig", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("upzones", help="detect urban preference zones")
    p.add_argument("--net", required=True)
    p.add_argument("--venues", required=True)
    p.add_argument("--regions", default=None)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-fig", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_upzones)

    p = sub.add_parser("correlate", help="edge weights vs contextual factors")
    p.add_argument("--net", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--venues", default=None)
    p.add_argument("--factors", default="all")
    p.add_argument("--keep-fraction", type=float, default=0.75)
    p.add_argument("--no-fig", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("train", help="train the high-interest classifier from a feature table")
    p.add_argument("--features", required=True)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-fig", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recommend", help="rank high-interest regions for a visit profile")
    p.add_argument("--store", required=True)
    p.add_argument("--profile", required=True, help="JSON: visited/k/m/user_mode")
    p.add_argument("--model", default=None, help="model JSON overriding the store's model_region")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("serve", help="serve artifacts over HTTP")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("pipeline", help="run configured stages into an artifact store")
    p.add_argument("--config", required=True)
    p.add_argument("--store", default=None)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
