import math

import pytest

from urbanet.ingest import (
    assign_venues_to_regions,
    load_context,
    load_interactions,
    load_regions,
    load_venues,
)
from urbanet.inet import aggregate, build_user_counts
from urbanet.metrics import nmi
from urbanet.recsys import classify_mobility, label_user
from urbanet.synth import SynthConfig, generate
from urbanet.upzones import leiden


def small_config(**overrides):
    base = dict(seed=11, n_users=120, n_regions=40, regions_per_user=(6, 7),
                venues_per_region=4)
    base.update(overrides)
    return SynthConfig(**base)


def test_generation_deterministic_files(tmp_path):
    paths_a = generate(small_config()).write(tmp_path / "a")
    paths_b = generate(small_config()).write(tmp_path / "b")
    for name in paths_a:
        assert paths_a[name].read_bytes() == paths_b[name].read_bytes(), name


def test_infeasible_config_rejected():
    with pytest.raises(ValueError):
        generate(small_config(regions_per_user=(50, 60), n_regions=40))
    with pytest.raises(ValueError):
        generate(small_config(distance_decay_exponent=0.0))


def test_outputs_round_trip_through_ingest(tmp_path):
    data = generate(small_config())
    paths = data.write(tmp_path)

    interactions = load_interactions(paths["interactions"])
    assert interactions.skipped == 0
    assert len(interactions.records) == len(data.interactions)

    venues = load_venues(paths["venues"])
    assert venues.skipped == 0

    regions, _ = load_regions(paths["regions"], level=data.config.resolution)
    assert len(regions) == data.config.n_regions

    report = load_context(paths["context"], regions)
    assert report.rejected == 0 and report.updated == len(regions)
    assert all(len(r.context.scene_vector) == 15 for r in regions)

    mapping = assign_venues_to_regions(venues.records, regions)
    # venues were jittered well inside their cells
    assert mapping == data.venue_region_map


def test_high_decay_concentrates_visits_near_home():
    def mean_trip(data):
        cents = {r.region_id: r.centroid for r in data.regions}
        homes = {p.user_id: p.home for p in data.planted_users}
        total = n = 0
        for it in data.interactions:
            rid = data.venue_region_map[it.venue_id]
            home = homes[it.user_id]
            total += math.dist(cents[rid], cents[home])
            n += 1
        return total / n

    concentrated = generate(small_config(distance_decay_exponent=8.0))
    diffuse = generate(small_config(distance_decay_exponent=0.5))
    cents = {r.region_id: r.centroid for r in concentrated.regions}
    ids = sorted(cents)
    global_mean = sum(
        math.dist(cents[a], cents[b]) for a in ids for b in ids if a < b
    ) / (len(ids) * (len(ids) - 1) / 2)
    assert mean_trip(concentrated) < mean_trip(diffuse)
    assert mean_trip(concentrated) < global_mean


def test_planted_zones_recovered_by_leiden():
    data = generate(small_config(n_users=200, n_regions=48, planted_zone_count=4, seed=3))
    counts = build_user_counts(data.interactions, data.venue_region_map)
    net = aggregate(counts, level=data.config.resolution, platform="GP")
    zones = leiden(net, gamma=1.0, seed=1)
    truth = {rid: z for rid, z in data.region_zone.items() if rid in zones.zones}
    assert nmi(zones.zones, truth) >= 0.9


def test_planted_eligibility_fraction():
    data = generate(small_config(strict_fraction=0.8, n_users=200))
    eligible = 0
    for p in data.planted_users:
        uc = [c for c in build_user_counts(data.interactions, data.venue_region_map)
              if c.user_id == p.user_id]
        profile = label_user(uc[0], k=data.config.k)
        assert profile.eligible == p.eligible
        eligible += profile.eligible
    assert eligible == round(0.8 * 200)


def test_planted_returner_fraction_recovered():
    data = generate(small_config(n_users=200, n_regions=60, returner_fraction=0.4,
                                 strict_fraction=1.0, distance_decay_exponent=3.0, seed=5))
    cents = {r.region_id: r.centroid for r in data.regions}
    counts = build_user_counts(data.interactions, data.venue_region_map)
    got_returners = 0
    classified = 0
    for uc in counts:
        profile = label_user(uc, k=data.config.k)
        if not profile.eligible:
            continue
        out = classify_mobility(profile, cents)
        classified += 1
        got_returners += out.mobility_class == "returner"
    assert classified == 200
    assert abs(got_returners / classified - 0.4) <= 0.05
