"""Deterministic synthetic check-in generator with planted structure.

The generator plants three kinds of recoverable signal:
  * zones: users co-visit almost entirely within an assigned strip of cells,
    so community detection on the resulting network recovers the strips;
  * interest drivers: explorers review nearby regions more (their top-k is a
    tight cluster plus far low-count excursions), returners review regions
    whose venue mix matches their archetype (anchors spread wide, bottom
    regions are nearby satellites);
  * eligibility: a configured fraction of users gets a strict count gap at
    rank k, the rest are planted ineligible.

Everything is a pure function of the config, and the emitted files are the
exact ingest formats.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import Polygon

from .geo import Projection
from .hexgrid import GridResolution, cells_to_regions, tessellate
from .ingest import ContextProfile, Interaction, Region, Venue

RACE_CATS = ("white", "black", "asian", "hispanic")
CATEGORIES = (
    "Pub", "Cafe", "Bakery", "Gym", "Museum", "Theater",
    "Bookstore", "Park", "Diner", "Nightclub", "Gallery", "Market",
)


@dataclass
class SynthConfig:
    seed: int = 7
    n_users: int = 500
    n_regions: int = 60
    resolution: str = "h8"
    regions_per_user: tuple[int, int] = (6, 8)
    distance_decay_exponent: float = 2.0
    n_archetypes: int = 4
    planted_zone_count: int = 0
    returner_fraction: float = 0.5
    k: int = 3
    strict_fraction: float = 0.9
    venues_per_region: int = 5
    platform: str = "GP"
    center: tuple[float, float] = (45.0, -73.0)
    time_window: tuple[int, int] = (1388534400, 1419984000)  # calendar year 2014

    def validate(self) -> None:
        if min(self.n_users, self.n_regions, self.venues_per_region, self.n_archetypes) < 1:
            raise ValueError("counts must be positive")
        if self.distance_decay_exponent <= 0:
            raise ValueError("decay exponent must be positive")
        if self.regions_per_user[1] > self.n_regions:
            raise ValueError(
                f"regions_per_user up to {self.regions_per_user[1]} "
                f"infeasible with {self.n_regions} regions"
            )
        if not 0.0 <= self.returner_fraction <= 1.0:
            raise ValueError("returner_fraction must be in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        cfg = cls(**{k: v for k, v in d.items()})
        for name in ("regions_per_user", "center", "time_window"):
            setattr(cfg, name, tuple(getattr(cfg, name)))
        return cfg


@dataclass
class PlantedUser:
    user_id: str
    home: str
    zone: int
    archetype: int
    mobility_class: str
    eligible: bool
    counts: dict[str, int]


@dataclass
class SynthData:
    config: SynthConfig
    projection: Projection
    regions: list[Region]
    venues: list[Venue]
    interactions: list[Interaction]
    venue_region_map: dict[str, str]
    planted_users: list[PlantedUser]
    region_zone: dict[str, int]  # planted zone truth (empty when no zones)
    context_rows: list[dict] = field(default_factory=list)

    def write(self, outdir) -> dict[str, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = {
            "interactions": outdir / "interactions.jsonl",
            "venues": outdir / "venues.csv",
            "regions": outdir / "regions.json",
            "context": outdir / "context.csv",
        }
        with paths["interactions"].open("w") as fh:
            for it in self.interactions:
                fh.write(json.dumps(
                    {"user_id": it.user_id, "venue_id": it.venue_id,
                     "ts": it.ts, "platform": it.platform},
                    sort_keys=True) + "\n")
        with paths["venues"].open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["venue_id", "name", "category", "lat", "lon"])
            for v in self.venues:
                writer.writerow([v.venue_id, v.name, v.category, repr(v.lat), repr(v.lon)])
        features = []
        for r in self.regions:
            ring = [[lon, lat] for lon, lat in r.boundary[0]]
            features.append({
                "type": "Feature",
                "properties": {"id": r.region_id},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            })
        paths["regions"].write_text(json.dumps(
            {"type": "FeatureCollection", "features": features}, sort_keys=True))
        scene_cols = [f"s{i}" for i in range(1, 16)]
        cols = ["region_id", "population", "income", "education", "employment",
                "vote_share", *RACE_CATS, *scene_cols]
        with paths["context"].open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols)
            writer.writeheader()
            for row in self.context_rows:
                writer.writerow(row)
        return paths


def _region_category_mix(region_index: int, archetype_of_region: int, n_archetypes: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Each region leans 70/30 toward its archetype's category block."""
    n = len(CATEGORIES)
    block = n // n_archetypes
    weights = np.full(n, 0.3 / n)
    lo = archetype_of_region * block
    hi = lo + block if archetype_of_region < n_archetypes - 1 else n
    weights[lo:hi] += 0.7 / (hi - lo)
    weights += rng.uniform(0, 0.02, size=n)
    return weights / weights.sum()


def generate(config: SynthConfig) -> SynthData:
    config.validate()
    rng = np.random.default_rng(config.seed)
    proj = Projection(lat0=config.center[0], lon0=config.center[1])
    res = GridResolution.named(config.resolution)

    # enough cells, then keep the first n_regions in tessellation order
    side = math.sqrt(config.n_regions * res.target_area_m2 * 1.6)
    boundary = Polygon([(0, 0), (side, 0), (side, side), (0, side)])
    cells = tessellate(boundary, res)
    if len(cells) < config.n_regions:
        raise ValueError("boundary produced too few cells; widen it")
    cells = cells[: config.n_regions]
    regions = cells_to_regions(cells, proj, res)
    region_ids = [r.region_id for r in regions]
    centroids = {r.region_id: r.centroid for r in regions}

    # planted zones: contiguous strips in tessellation (column) order
    n_zones = max(config.planted_zone_count, 0)
    region_zone: dict[str, int] = {}
    if n_zones >= 2:
        per = math.ceil(len(region_ids) / n_zones)
        for i, rid in enumerate(region_ids):
            region_zone[rid] = min(i // per, n_zones - 1)

    archetype_of_region = {rid: i % config.n_archetypes for i, rid in enumerate(region_ids)}

    # venues + context
    venues: list[Venue] = []
    venue_region_map: dict[str, str] = {}
    context_rows: list[dict] = []
    venues_by_region: dict[str, list[Venue]] = {rid: [] for rid in region_ids}
    jitter = 0.35 * res.circumradius_m
    vid = 0
    for i, region in enumerate(regions):
        rid = region.region_id
        mix = _region_category_mix(i, archetype_of_region[rid], config.n_archetypes, rng)
        cx, cy = region.centroid
        for _ in range(config.venues_per_region):
            dx, dy = rng.uniform(-jitter, jitter, size=2)
            lat, lon = proj.inverse(cx + dx, cy + dy)
            category = CATEGORIES[int(rng.choice(len(CATEGORIES), p=mix))]
            venue = Venue(venue_id=f"v{vid:06d}", name=f"Venue {vid}",
                          category=category, lat=lat, lon=lon)
            vid += 1
            venues.append(venue)
            venues_by_region[rid].append(venue)
            venue_region_map[venue.venue_id] = rid

        population = int(rng.integers(200, 5000))
        shares = rng.dirichlet(np.ones(len(RACE_CATS)))
        race = {c: int(population * s * 0.95) for c, s in zip(RACE_CATS, shares)}
        zone = region_zone.get(rid, 0)
        scene = rng.normal(0, 0.2, size=15)
        scene[zone % 15] += 2.0
        row = {
            "region_id": rid,
            "population": population,
            "income": round(float(rng.uniform(800, 9000)), 2),
            "education": round(float(rng.uniform(0.05, 0.95)), 4),
            "employment": round(float(rng.uniform(0.4, 0.99)), 4),
            "vote_share": round(float(rng.uniform(0.1, 0.9)), 4),
        }
        row.update(race)
        for d in range(15):
            row[f"s{d + 1}"] = round(float(scene[d]), 4)
        context_rows.append(row)
        region.context = ContextProfile(
            population=float(population),
            income=row["income"],
            education=row["education"],
            employment=row["employment"],
            vote_share=row["vote_share"],
            race_counts={c: float(race[c]) for c in RACE_CATS},
            scene_vector=tuple(float(row[f"s{d + 1}"]) for d in range(15)),
            category_freq=None,
        )

    def pool_for(zone: int) -> list[str]:
        if n_zones >= 2:
            return [rid for rid in region_ids if region_zone[rid] == zone]
        return list(region_ids)

    def distance(a: str, b: str) -> float:
        return math.dist(centroids[a], centroids[b])

    R = res.circumradius_m

    def sample_by_weight(candidates: list[str], weights: np.ndarray, size: int) -> list[str]:
        size = min(size, len(candidates))
        if size <= 0:
            return []
        p = weights / weights.sum()
        idx = rng.choice(len(candidates), size=size, replace=False, p=p)
        return [candidates[i] for i in idx]

    def decay_weights(home: str, candidates: list[str]) -> np.ndarray:
        return np.array([
            (distance(home, r) / R + 1.0) ** (-config.distance_decay_exponent)
            for r in candidates
        ])

    n_returners = round(config.returner_fraction * config.n_users)
    n_strict = round(config.strict_fraction * config.n_users)

    planted: list[PlantedUser] = []
    interactions: list[Interaction] = []
    t_lo, t_hi = config.time_window
    for u in range(config.n_users):
        user_id = f"u{u:05d}"
        zone = u % n_zones if n_zones >= 2 else 0
        archetype = u % config.n_archetypes
        is_returner = u < n_returners
        eligible = u < n_strict or len(pool_for(zone)) <= config.k

        pool = pool_for(zone)
        n_visit = int(rng.integers(config.regions_per_user[0], config.regions_per_user[1] + 1))
        n_visit = min(n_visit, len(pool))
        home = pool[int(rng.integers(len(pool)))]

        if is_returner:
            # anchors with the user's favorite venue mix; satellites sit next
            # to the anchors, so geography separates nothing for returners
            flavored = [r for r in pool if archetype_of_region[r] == archetype] or pool
            anchors = [home] if home in flavored else []
            others = [r for r in flavored if r not in anchors]
            anchors += sample_by_weight(others, decay_weights(home, others), config.k - len(anchors))
            rest: list[str] = []
            for anchor in anchors:
                near = sorted((r for r in pool if r not in anchors and r not in rest),
                              key=lambda r: (distance(r, anchor), r))
                rest.extend(near[: math.ceil((n_visit - len(anchors)) / len(anchors))])
            visited = (anchors + rest)[:n_visit]
            ranked = anchors + [r for r in visited if r not in anchors]
        else:
            # explorers: decay-sampled cluster in the home neighborhood, plus
            # far excursions they barely review
            others = [r for r in pool if r != home]
            ring = [r for r in others if distance(home, r) <= 3.0 * R]
            if len(ring) < config.k - 1:
                ring = sorted(others, key=lambda r: (distance(home, r), r))[: 2 * config.k]
            cluster = [home] + sample_by_weight(ring, decay_weights(home, ring), config.k - 1)
            far_pool = [r for r in pool if r not in cluster]
            d_max = max(distance(home, r) for r in far_pool)
            far = [r for r in far_pool if distance(home, r) >= 0.6 * d_max] or far_pool
            far_w = np.array([(distance(home, r) / R) ** 2 for r in far])
            n_far = max(2, n_visit - len(cluster))
            excursions = sample_by_weight(far, far_w, n_far)
            visited = cluster + excursions
            ranked = sorted(cluster, key=lambda r: (distance(r, home), r)) + \
                sorted(excursions, key=lambda r: (distance(r, home), r))

        # review counts descending in planted-interest order; explorers leave
        # only a review or two at their excursions
        counts: dict[str, int] = {}
        top_base = int(rng.integers(10, 15))
        for rank, rid in enumerate(ranked):
            if is_returner or rank < config.k:
                counts[rid] = max(1, top_base - 2 * rank + int(rng.integers(0, 2)))
            else:
                counts[rid] = 1 + int(rng.integers(0, 2))
        ks = config.k
        if len(ranked) > ks:
            if eligible and counts[ranked[ks - 1]] <= counts[ranked[ks]]:
                counts[ranked[ks - 1]] = counts[ranked[ks]] + 1
            if not eligible:
                counts[ranked[ks]] = counts[ranked[ks - 1]]
        for i in range(1, ks):  # keep the planted order strict inside the top
            if counts[ranked[i - 1]] <= counts[ranked[i]]:
                counts[ranked[i - 1]] = counts[ranked[i]] + 1

        planted.append(PlantedUser(
            user_id=user_id, home=home, zone=zone, archetype=archetype,
            mobility_class="returner" if is_returner else "explorer",
            eligible=eligible, counts=dict(counts),
        ))

        cross_zone = [r for r in region_ids if r not in pool]
        for rid, c in counts.items():
            vs = venues_by_region[rid]
            for _ in range(c):
                venue = vs[int(rng.integers(len(vs)))]
                ts = int(rng.integers(t_lo, t_hi))
                interactions.append(Interaction(
                    user_id=user_id, venue_id=venue.venue_id, ts=ts,
                    platform=config.platform))
        if n_zones >= 2 and cross_zone and rng.random() < 0.3:
            # light cross-zone noise so the planted structure is not a giveaway
            rid = cross_zone[int(rng.integers(len(cross_zone)))]
            venue = venues_by_region[rid][0]
            interactions.append(Interaction(
                user_id=user_id, venue_id=venue.venue_id,
                ts=int(rng.integers(t_lo, t_hi)), platform=config.platform))

    interactions.sort(key=lambda it: (it.user_id, it.ts, it.venue_id))
    return SynthData(
        config=config,
        projection=proj,
        regions=regions,
        venues=venues,
        interactions=interactions,
        venue_region_map=venue_region_map,
        planted_users=planted,
        region_zone=region_zone,
        context_rows=context_rows,
    )
