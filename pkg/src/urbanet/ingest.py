"""Parsing, validation and normalization of interaction, venue, region and
context inputs into the canonical data model."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from shapely.geometry import MultiPolygon, Point, Polygon, shape
from shapely.strtree import STRtree

from .geo import Projection, polygon_lonlat_centroid, vertex_mean

logger = logging.getLogger(__name__)

PLATFORMS = ("GP", "FS", "OTHER")
REGION_LEVELS = ("h6", "h7", "h8", "h9", "neighborhood", "zip", "borough", "city", "county")
UNCATEGORIZED = "uncategorized"
RACE_COLUMNS = ("white", "black", "asian", "hispanic", "brown", "yellow", "indigenous")
SCENE_DIMS = 15


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class Interaction:
    user_id: str
    venue_id: str
    ts: int  # UTC seconds since epoch
    platform: str
    rating: float | None = None


@dataclass(frozen=True)
class Venue:
    venue_id: str
    name: str
    category: str
    lat: float
    lon: float


@dataclass
class ContextProfile:
    population: float | None = None
    income: float | None = None
    education: float | None = None
    employment: float | None = None
    literacy: float | None = None
    race_counts: dict[str, float] | None = None
    vote_share: float | None = None
    scene_vector: tuple[float, ...] | None = None
    category_freq: dict[str, int] | None = None


@dataclass
class Region:
    region_id: str
    level: str
    centroid: tuple[float, float]  # projected meters
    boundary: list[list[tuple[float, float]]] | None = None  # (lon, lat) rings
    context: ContextProfile | None = None

    def geometry(self) -> Polygon | MultiPolygon | None:
        if self.boundary is None:
            return None
        return Polygon(self.boundary[0], self.boundary[1:])


@dataclass
class LoadReport:
    """Validated records plus what was skipped along the way."""

    records: list
    skipped: int = 0
    problems: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def parse_timestamp(value) -> int:
    """Epoch seconds from either a number or an ISO-8601 string."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        ts = int(value)
    elif isinstance(value, str):
        text = value.strip()
        try:
            ts = int(float(text))
        except ValueError:
            if text.endswith("Z"):
                text = text[:-1] + "+00:00"
            dt = datetime.fromisoformat(text)
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            ts = int(dt.timestamp())
    else:
        raise ValueError(f"unparseable timestamp {value!r}")
    if ts <= 0:
        raise ValueError(f"timestamp must be positive, got {ts}")
    return ts


def _validate_interaction(row: dict, platform: str | None) -> Interaction:
    user_id = str(row.get("user_id") or "").strip()
    venue_id = str(row.get("venue_id") or "").strip()
    if not user_id:
        raise ValueError("missing user_id")
    if not venue_id:
        raise ValueError("missing venue_id")
    ts = parse_timestamp(row.get("ts"))
    plat = platform if platform is not None else str(row.get("platform") or "").strip().upper()
    if plat not in PLATFORMS:
        raise ValueError(f"unknown platform {plat!r}")
    rating = row.get("rating")
    if rating in (None, ""):
        rating = None
    else:
        rating = float(rating)
        if not 1.0 <= rating <= 5.0:
            raise ValueError(f"rating {rating} outside [1, 5]")
    return Interaction(user_id=user_id, venue_id=venue_id, ts=ts, platform=plat, rating=rating)


def load_interactions(path, platform: str | None = None, fmt: str | None = None) -> LoadReport:
    """Read interaction records from JSONL or CSV.

    When `platform` is given it is applied to every record; otherwise each
    row must carry its own platform field. Malformed rows are skipped and
    counted; more than 50% malformed is treated as a broken file.
    """
    path = Path(path)
    if fmt is None:
        fmt = "CSV" if path.suffix.lower() == ".csv" else "JSONL"
    try:
        raw = path.read_text()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    rows: list[dict] = []
    problems: list[str] = []
    skipped = 0
    if fmt.upper() == "JSONL":
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                skipped += 1
                problems.append(f"line {lineno}: invalid JSON ({exc.msg})")
    else:
        rows = list(csv.DictReader(raw.splitlines()))

    records: list[Interaction] = []
    for i, row in enumerate(rows, start=1):
        try:
            records.append(_validate_interaction(row, platform))
        except (ValueError, TypeError) as exc:
            skipped += 1
            problems.append(f"row {i}: {exc}")

    total = len(records) + skipped
    if total > 0 and skipped > total / 2:
        raise IngestError(
            f"{skipped}/{total} rows malformed in {path}; first problems: " + "; ".join(problems[:5])
        )
    if skipped:
        logger.warning("skipped %d malformed rows loading %s", skipped, path)
    return LoadReport(records=records, skipped=skipped, problems=problems)


def load_venues(path) -> LoadReport:
    """Venues CSV: venue_id,name,category,lat,lon. Unknown categories map to
    the reserved "uncategorized" token."""
    path = Path(path)
    records: list[Venue] = []
    problems: list[str] = []
    skipped = 0
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=1):
            try:
                venue_id = (row.get("venue_id") or "").strip()
                if not venue_id:
                    raise ValueError("missing venue_id")
                lat = float(row["lat"])
                lon = float(row["lon"])
                if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                    raise ValueError(f"coordinates ({lat}, {lon}) out of range")
                category = (row.get("category") or "").strip() or UNCATEGORIZED
                records.append(
                    Venue(venue_id=venue_id, name=(row.get("name") or "").strip(), category=category, lat=lat, lon=lon)
                )
            except (ValueError, TypeError, KeyError) as exc:
                skipped += 1
                problems.append(f"row {i}: {exc}")
    if skipped:
        logger.warning("skipped %d malformed venue rows loading %s", skipped, path)
    return LoadReport(records=records, skipped=skipped, problems=problems)


def load_regions(path, level: str, projection: Projection | None = None) -> tuple[list[Region], Projection]:
    """Read a FeatureCollection of Polygon/MultiPolygon features with an "id"
    property into Regions with projected centroids.

    Returns the regions and the projection used (constructed from the file's
    bounding box when not supplied), so callers can keep projecting venues
    and grids consistently.
    """
    path = Path(path)
    doc = json.loads(path.read_text())
    features = doc.get("features", [])
    if projection is None:
        lats, lons = [], []
        for feat in features:
            geom = shape(feat["geometry"])
            minx, miny, maxx, maxy = geom.bounds
            lons += [minx, maxx]
            lats += [miny, maxy]
        if not lats:
            raise IngestError(f"no features in {path}")
        projection = Projection.for_bbox(min(lats), min(lons), max(lats), max(lons))

    regions: list[Region] = []
    seen: set[str] = set()
    for feat in features:
        props = feat.get("properties") or {}
        region_id = props.get("id", feat.get("id"))
        if region_id is None:
            raise IngestError(f"feature without an 'id' property in {path}")
        region_id = str(region_id)
        if region_id in seen:
            raise IngestError(f"duplicate region id {region_id!r} in {path}")
        seen.add(region_id)

        geom = shape(feat["geometry"])
        if not isinstance(geom, (Polygon, MultiPolygon)):
            raise IngestError(f"region {region_id!r}: geometry must be Polygon or MultiPolygon")
        if geom.is_valid:
            lat, lon = polygon_lonlat_centroid(geom)
        else:
            logger.warning("region %s: invalid polygon, centroid from vertex mean", region_id)
            lat, lon = vertex_mean(geom)

        if isinstance(geom, MultiPolygon):
            # keep rings of all parts; exterior of the largest part first
            parts = sorted(geom.geoms, key=lambda g: g.area, reverse=True)
            rings = [list(parts[0].exterior.coords)] + [list(r.coords) for r in parts[0].interiors]
            for extra in parts[1:]:
                rings.append(list(extra.exterior.coords))
        else:
            rings = [list(geom.exterior.coords)] + [list(r.coords) for r in geom.interiors]

        regions.append(
            Region(
                region_id=region_id,
                level=level,
                centroid=projection.forward(lat, lon),
                boundary=[[(x, y) for x, y in ring] for ring in rings],
            )
        )
    return regions, projection


def _parse_rate(row: dict, key: str):
    raw = row.get(key)
    if raw in (None, ""):
        return None
    value = float(raw)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{key}={value} outside [0, 1]")
    return value


def _parse_count(row: dict, key: str):
    raw = row.get(key)
    if raw in (None, ""):
        return None
    value = float(raw)
    if value < 0:
        raise ValueError(f"{key}={value} is negative")
    return value


@dataclass
class ContextReport:
    updated: int = 0
    rejected: int = 0
    unmatched: list[str] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)


def load_context(path, regions: list[Region]) -> ContextReport:
    """Attach ContextProfiles from a CSV keyed by region_id.

    Rows with negative counts, out-of-range rates or partial scene vectors are
    rejected; region_ids not present in `regions` are reported as unmatched.
    """
    path = Path(path)
    by_id = {r.region_id: r for r in regions}
    report = ContextReport()
    with path.open(newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=1):
            region_id = (row.get("region_id") or "").strip()
            if not region_id:
                report.rejected += 1
                report.problems.append(f"row {i}: missing region_id")
                continue
            try:
                profile = ContextProfile(
                    population=_parse_count(row, "population"),
                    income=_parse_count(row, "income"),
                    education=_parse_rate(row, "education"),
                    employment=_parse_rate(row, "employment"),
                    literacy=_parse_rate(row, "literacy"),
                    vote_share=_parse_rate(row, "vote_share"),
                )
                races = {}
                for col in RACE_COLUMNS:
                    value = _parse_count(row, col)
                    if value is not None:
                        races[col] = value
                if races:
                    if profile.population is not None and sum(races.values()) > profile.population:
                        raise ValueError("race counts exceed population")
                    profile.race_counts = races
                scene_cols = [f"s{k}" for k in range(1, SCENE_DIMS + 1)]
                present = [c for c in scene_cols if row.get(c) not in (None, "")]
                if present:
                    if len(present) != SCENE_DIMS:
                        raise ValueError(f"scene vector has {len(present)} of {SCENE_DIMS} columns")
                    profile.scene_vector = tuple(float(row[c]) for c in scene_cols)
            except (ValueError, TypeError) as exc:
                report.rejected += 1
                report.problems.append(f"row {i} ({region_id}): {exc}")
                continue

            region = by_id.get(region_id)
            if region is None:
                report.unmatched.append(region_id)
                logger.warning("context row for unknown region %s ignored", region_id)
                continue
            if region.context is None:
                region.context = profile
            else:
                for name in ("population", "income", "education", "employment", "literacy",
                             "race_counts", "vote_share", "scene_vector"):
                    value = getattr(profile, name)
                    if value is not None:
                        setattr(region.context, name, value)
            report.updated += 1
    return report


def assign_venues_to_regions(venues: list[Venue], regions: list[Region], level: str | None = None) -> dict[str, str]:
    """Map each venue to the region containing it, boundary points going to
    the lexicographically smallest region_id. Venues outside all regions are
    left out of the mapping (and counted in the log)."""
    pool = [r for r in regions if (level is None or r.level == level) and r.boundary is not None]
    geoms = [r.geometry() for r in pool]
    tree = STRtree(geoms)
    mapping: dict[str, str] = {}
    unassigned = 0
    for venue in venues:
        point = Point(venue.lon, venue.lat)
        hits = []
        for idx in tree.query(point):
            if geoms[idx].covers(point):
                hits.append(pool[idx].region_id)
        if hits:
            mapping[venue.venue_id] = min(hits)
        else:
            unassigned += 1
    if unassigned:
        logger.info("%d venues fell outside all regions at level %s", unassigned, level)
    return mapping


def attach_category_frequencies(regions: list[Region], venues: list[Venue], venue_region_map: dict[str, str]) -> None:
    """Fill each region's venue-category frequency vector from the assignment."""
    freq: dict[str, dict[str, int]] = {}
    for venue in venues:
        region_id = venue_region_map.get(venue.venue_id)
        if region_id is None:
            continue
        bucket = freq.setdefault(region_id, {})
        bucket[venue.category] = bucket.get(venue.category, 0) + 1
    for region in regions:
        if region.region_id in freq:
            if region.context is None:
                region.context = ContextProfile()
            region.context.category_freq = dict(sorted(freq[region.region_id].items()))


def filter_users(
    interactions: list[Interaction],
    venue_region_map: dict[str, str],
    min_distinct_regions: int,
    window: tuple[int, int] | None = None,
) -> list[Interaction]:
    """Keep interactions of users spanning at least `min_distinct_regions`
    distinct regions inside the (inclusive) time window."""

    def in_window(it: Interaction) -> bool:
        return window is None or window[0] <= it.ts <= window[1]

    regions_per_user: dict[str, set[str]] = {}
    for it in interactions:
        if not in_window(it):
            continue
        region = venue_region_map.get(it.venue_id)
        if region is not None:
            regions_per_user.setdefault(it.user_id, set()).add(region)

    eligible = {u for u, regs in regions_per_user.items() if len(regs) >= min_distinct_regions}
    return [it for it in interactions if it.user_id in eligible and in_window(it)]
