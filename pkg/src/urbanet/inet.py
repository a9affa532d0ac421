"""Interest networks: weighted undirected region graphs built from user
co-visitation, with self-loops and deterministic top-weight edge filtering.

Edge weights count distinct users who reviewed venues in both endpoint
regions; a region's self-loop counts users with at least two reviews there.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .ingest import Interaction

logger = logging.getLogger(__name__)

# hyperactive-user guard: pairwise expansion is quadratic in distinct regions
DEFAULT_REGION_CAP = 500


@dataclass
class UserRegionCounts:
    user_id: str
    counts: dict[str, int]
    first_seen: dict[str, int] = field(default_factory=dict)  # region -> earliest ts


@dataclass
class INet:
    level: str
    platform: str
    nodes: set[str] = field(default_factory=set)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    self_loops: dict[str, int] = field(default_factory=dict)

    def edge_weight(self, a: str, b: str) -> int:
        if a == b:
            return self.self_loops.get(a, 0)
        return self.edges.get(edge_key(a, b), 0)


def edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


def build_user_counts(interactions: list[Interaction], venue_region_map: dict[str, str]) -> list[UserRegionCounts]:
    """Per-user review counts per region (interactions at unmapped venues are
    ignored). Output is sorted by user id, independent of input order."""
    per_user: dict[str, dict[str, int]] = {}
    first_seen: dict[str, dict[str, int]] = {}
    for it in interactions:
        region = venue_region_map.get(it.venue_id)
        if region is None:
            continue
        counts = per_user.setdefault(it.user_id, {})
        counts[region] = counts.get(region, 0) + 1
        seen = first_seen.setdefault(it.user_id, {})
        if region not in seen or it.ts < seen[region]:
            seen[region] = it.ts
    return [
        UserRegionCounts(
            user_id=uid,
            counts=dict(sorted(per_user[uid].items())),
            first_seen=dict(sorted(first_seen[uid].items())),
        )
        for uid in sorted(per_user)
    ]


def aggregate(
    user_counts: list[UserRegionCounts],
    level: str,
    platform: str,
    region_cap: int = DEFAULT_REGION_CAP,
) -> INet:
    """Aggregate individual interest profiles into one network.

    edge{a,b} = number of users who reviewed both a and b;
    self_loop(a) = number of users with >= 2 reviews in a.
    """
    net = INet(level=level, platform=platform)
    for uc in user_counts:
        regions = sorted(uc.counts)
        if len(regions) > region_cap:
            logger.warning(
                "user %s spans %d regions, over the %d cap; truncating pair expansion",
                uc.user_id, len(regions), region_cap,
            )
            regions = regions[:region_cap]
        net.nodes.update(regions)
        for i, a in enumerate(regions):
            if uc.counts[a] >= 2:
                net.self_loops[a] = net.self_loops.get(a, 0) + 1
            for b in regions[i + 1:]:
                key = (a, b)
                net.edges[key] = net.edges.get(key, 0) + 1
    return net


def filter_top_edges(net: INet, keep_fraction: float) -> INet:
    """Keep the strongest ceil(keep_fraction * |E|) edges.

    Edges are ordered by weight descending, ties broken by the lexicographic
    order of the (smaller, larger) node-id pair, so the kept subset is the
    same on every run. Self-loops and isolated nodes are untouched.
    """
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    if not net.edges:
        logger.warning("filter_top_edges on a network with no edges is a no-op")
        return INet(
            level=net.level, platform=net.platform,
            nodes=set(net.nodes), edges={}, self_loops=dict(net.self_loops),
        )
    ranked = sorted(net.edges.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = math.ceil(keep_fraction * len(ranked))
    kept = dict(sorted(ranked[:keep]))
    return INet(
        level=net.level, platform=net.platform,
        nodes=set(net.nodes), edges=kept, self_loops=dict(net.self_loops),
    )


@dataclass(frozen=True)
class NetStats:
    n_nodes: int
    n_edges: int
    n_self_loops: int
    total_weight: int


def net_stats(net: INet) -> NetStats:
    return NetStats(
        n_nodes=len(net.nodes),
        n_edges=len(net.edges),
        n_self_loops=sum(1 for w in net.self_loops.values() if w > 0),
        total_weight=sum(net.edges.values()) + sum(net.self_loops.values()),
    )


def save_inet(net: INet, path, meta: dict | None = None) -> None:
    """CSV edge list (self-loops as src == dst) plus a JSON sidecar with
    level/platform and any extra metadata (e.g. grid parameters)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "weight"])
        for (a, b), w in sorted(net.edges.items()):
            writer.writerow([a, b, w])
        for a, w in sorted(net.self_loops.items()):
            if w > 0:
                writer.writerow([a, a, w])
    sidecar = {"level": net.level, "platform": net.platform, "nodes": sorted(net.nodes)}
    if meta:
        sidecar.update(meta)
    path.with_suffix(path.suffix + ".meta.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_inet(path) -> tuple[INet, dict]:
    path = Path(path)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    net = INet(level=meta.get("level", "unknown"), platform=meta.get("platform", "OTHER"))
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            a, b, w = row["src"], row["dst"], int(row["weight"])
            net.nodes.update((a, b))
            if a == b:
                net.self_loops[a] = w
            else:
                net.edges[edge_key(a, b)] = w
    for node in meta.get("nodes", []):
        net.nodes.add(node)
    return net, meta
