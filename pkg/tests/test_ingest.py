import json
import math
import random

import pytest

from urbanet.geo import Projection
from urbanet.ingest import (
    IngestError,
    Venue,
    assign_venues_to_regions,
    filter_users,
    load_context,
    load_interactions,
    load_regions,
    load_venues,
)


def days_from_civil(y, m, d):
    # independent calendar arithmetic (no datetime) for the epoch oracle
    y -= m <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m + (-3 if m > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")


def test_load_interactions_identity(tmp_path):
    rows = [
        {"user_id": "u1", "venue_id": "v1", "ts": 100, "platform": "GP"},
        {"user_id": "u2", "venue_id": "v2", "ts": 200, "platform": "GP", "rating": 4.5},
        {"user_id": "u3", "venue_id": "v3", "ts": 300, "platform": "GP"},
    ]
    path = tmp_path / "it.jsonl"
    write_jsonl(path, rows)
    report = load_interactions(path)
    assert len(report.records) == 3
    assert report.skipped == 0
    assert report.records[1].rating == 4.5


def test_load_interactions_skips_missing_venue(tmp_path):
    rows = [
        {"user_id": "u1", "venue_id": "v1", "ts": 100, "platform": "GP"},
        {"user_id": "u2", "ts": 200, "platform": "GP"},
        {"user_id": "u3", "venue_id": "v3", "ts": 300, "platform": "GP"},
    ]
    path = tmp_path / "it.jsonl"
    write_jsonl(path, rows)
    report = load_interactions(path)
    assert len(report.records) == 2
    assert report.skipped == 1


def test_iso_timestamps_parse_to_epoch_seconds(tmp_path):
    expected = days_from_civil(2014, 4, 1) * 86400
    rows = [{"user_id": "u", "venue_id": "v", "ts": "2014-04-01T00:00:00Z", "platform": "FS"}]
    path = tmp_path / "it.jsonl"
    write_jsonl(path, rows)
    report = load_interactions(path)
    assert report.records[0].ts == expected == 1396310400


def test_platform_argument_overrides_rows(tmp_path):
    path = tmp_path / "it.jsonl"
    write_jsonl(path, [
        {"user_id": "u", "venue_id": "v", "ts": 5},
        {"user_id": "u2", "venue_id": "v2", "ts": 6, "platform": "GP"},
    ])
    report = load_interactions(path, platform="FS")
    assert [r.platform for r in report.records] == ["FS", "FS"]
    # without an override each row must carry its platform
    assert load_interactions(path).skipped == 1


def test_csv_variant(tmp_path):
    path = tmp_path / "it.csv"
    path.write_text("user_id,venue_id,ts,platform\nu1,v1,100,GP\nu2,v2,bogus,GP\n")
    report = load_interactions(path)
    assert len(report.records) == 1
    assert report.skipped == 1


def test_mostly_malformed_file_is_fatal(tmp_path):
    rows = [
        {"user_id": "u1", "venue_id": "v1", "ts": 100, "platform": "GP"},
        {"user_id": "u2", "ts": 1, "platform": "GP"},
        {"user_id": "", "venue_id": "v", "ts": 1, "platform": "GP"},
    ]
    path = tmp_path / "it.jsonl"
    write_jsonl(path, rows)
    with pytest.raises(IngestError):
        load_interactions(path)


def test_unreadable_file_is_fatal(tmp_path):
    with pytest.raises(IngestError):
        load_interactions(tmp_path / "missing.jsonl")


def feature(region_id, rings):
    return {
        "type": "Feature",
        "properties": {"id": region_id},
        "geometry": {"type": "Polygon", "coordinates": rings},
    }


def write_regions(path, features):
    path.write_text(json.dumps({"type": "FeatureCollection", "features": features}))


def test_unit_square_centroid(tmp_path):
    path = tmp_path / "regions.json"
    write_regions(path, [feature("r1", [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]])])
    regions, proj = load_regions(path, level="city")
    assert regions[0].centroid == pytest.approx(proj.forward(0.5, 0.5), abs=1e-9)


def test_duplicate_region_id_fatal(tmp_path):
    path = tmp_path / "regions.json"
    ring = [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]]
    write_regions(path, [feature("r1", ring), feature("r1", ring)])
    with pytest.raises(IngestError):
        load_regions(path, level="city")


def test_missing_id_fatal(tmp_path):
    path = tmp_path / "regions.json"
    feat = feature("x", [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]])
    del feat["properties"]["id"]
    write_regions(path, [feat])
    with pytest.raises(IngestError):
        load_regions(path, level="city")


def shoelace_centroid(ring):
    # area-weighted centroid oracle
    a = cx = cy = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        cross = x0 * y1 - x1 * y0
        a += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    a /= 2.0
    return cx / (6 * a), cy / (6 * a)


def test_l_shape_centroid_matches_shoelace(tmp_path):
    ring = [[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2], [0, 0]]
    path = tmp_path / "regions.json"
    write_regions(path, [feature("L", [ring])])
    regions, proj = load_regions(path, level="neighborhood")
    ex, ey = shoelace_centroid([tuple(p) for p in ring])
    assert regions[0].centroid == pytest.approx(proj.forward(ey, ex), abs=1e-6)


def test_context_loading(tmp_path):
    rpath = tmp_path / "regions.json"
    write_regions(rpath, [feature("r1", [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]])])
    regions, _ = load_regions(rpath, level="city")

    cpath = tmp_path / "ctx.csv"
    cpath.write_text("region_id,population\nr1,100\nr99,5\n")
    report = load_context(cpath, regions)
    assert regions[0].context.population == 100
    assert report.unmatched == ["r99"]


def test_context_rejects_bad_rows(tmp_path):
    rpath = tmp_path / "regions.json"
    write_regions(rpath, [feature("r1", [[[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]]])])
    regions, _ = load_regions(rpath, level="city")

    scene_cols = ",".join(f"s{i}" for i in range(1, 15))  # only 14 columns
    cpath = tmp_path / "ctx.csv"
    cpath.write_text(
        f"region_id,population,{scene_cols}\n"
        "r1,-5," + ",".join(["0.1"] * 14) + "\n"
    )
    report = load_context(cpath, regions)
    assert report.rejected == 1
    assert regions[0].context is None

    cpath.write_text(
        "region_id," + ",".join(f"s{i}" for i in range(1, 16)) + "\n"
        "r1," + ",".join(["0.5"] * 15) + "\n"
    )
    report = load_context(cpath, regions)
    assert report.rejected == 0
    assert len(regions[0].context.scene_vector) == 15


def grid_regions(tmp_path, n=4, cell=1.0):
    feats = []
    for i in range(n):
        for j in range(n):
            x0, y0 = i * cell, j * cell
            feats.append(feature(f"g{i}{j}", [[[x0, y0], [x0 + cell, y0], [x0 + cell, y0 + cell], [x0, y0 + cell], [x0, y0]]]))
    path = tmp_path / "grid.json"
    write_regions(path, feats)
    return load_regions(path, level="zip")[0]


def test_assignment_matches_bruteforce_grid(tmp_path):
    regions = grid_regions(tmp_path)
    rng = random.Random(7)
    venues = [
        Venue(venue_id=f"v{k}", name="", category="Food",
              lat=rng.uniform(-0.5, 4.5), lon=rng.uniform(-0.5, 4.5))
        for k in range(100)
    ]
    mapping = assign_venues_to_regions(venues, regions, level="zip")
    for v in venues:
        # brute-force oracle: containment by direct coordinate comparison
        expected = None
        if 0 <= v.lon <= 4 and 0 <= v.lat <= 4:
            i = min(int(v.lon), 3)
            j = min(int(v.lat), 3)
            expected = f"g{i}{j}"
        assert mapping.get(v.venue_id) == expected


def test_boundary_point_goes_to_lexicographically_smallest(tmp_path):
    regions = grid_regions(tmp_path)
    venues = [Venue(venue_id="edge", name="", category="Food", lat=0.5, lon=1.0)]
    mapping = assign_venues_to_regions(venues, regions, level="zip")
    assert mapping["edge"] == "g00"  # on the g00|g10 border


def test_outside_venue_unassigned(tmp_path):
    regions = grid_regions(tmp_path)
    venues = [Venue(venue_id="far", name="", category="Food", lat=50.0, lon=50.0)]
    assert "far" not in assign_venues_to_regions(venues, regions, level="zip")


def make_interactions(spec):
    # spec: list of (user, venue, ts)
    from urbanet.ingest import Interaction

    return [Interaction(user_id=u, venue_id=v, ts=t, platform="GP") for u, v, t in spec]


def test_filter_users():
    vmap = {f"v{i}": f"r{i}" for i in range(8)}
    spread = make_interactions([("alice", f"v{i}", 10 + i) for i in range(6)])
    stuck = make_interactions([("bob", "v0", 100 + i) for i in range(10)])
    kept = filter_users(spread + stuck, vmap, min_distinct_regions=6)
    users = {it.user_id for it in kept}
    assert users == {"alice"}

    everyone = filter_users(spread + stuck, vmap, min_distinct_regions=1)
    assert everyone == spread + stuck


def test_filter_users_window_inclusive():
    vmap = {"v0": "r0", "v1": "r1"}
    its = make_interactions([("u", "v0", 10), ("u", "v1", 20)])
    assert len(filter_users(its, vmap, 2, window=(10, 20))) == 2
    assert filter_users(its, vmap, 2, window=(11, 20)) == []


def test_load_venues_validates(tmp_path):
    path = tmp_path / "venues.csv"
    path.write_text(
        "venue_id,name,category,lat,lon\n"
        "v1,Cafe Uno,Cafe,45.0,-73.0\n"
        "v2,No Cat,,45.1,-73.1\n"
        "v3,Bad,Pub,95.0,-73.0\n"
    )
    report = load_venues(path)
    assert [v.venue_id for v in report.records] == ["v1", "v2"]
    assert report.records[1].category == "uncategorized"
    assert report.skipped == 1


def test_projection_round_trip():
    proj = Projection(lat0=45.0, lon0=-73.0)
    for lat, lon in [(45.1, -73.2), (44.9, -72.8), (45.0, -73.0)]:
        x, y = proj.forward(lat, lon)
        back = proj.inverse(x, y)
        assert back == pytest.approx((lat, lon), abs=1e-9)
    # a degree of latitude is ~111 km
    x, y = proj.forward(46.0, -73.0)
    assert math.hypot(x, y) == pytest.approx(111_195, rel=1e-3)
