"""Urban preference zones: Leiden communities on fine-grained interest
networks, TF-IDF category profiles, and cross-platform zone alignment."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import community
from .inet import INet
from .ingest import Venue
from .metrics import nmi, rand_index

logger = logging.getLogger(__name__)


@dataclass
class UPZoneSet:
    level: str
    zones: dict[str, int]  # cell id -> zone label
    modularity: float
    gamma: float
    seed: int
    quality_trace: list[float] = field(default_factory=list)

    def n_zones(self) -> int:
        return len(set(self.zones.values()))

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for cell, zone in self.zones.items():
            out.setdefault(zone, []).append(cell)
        return {z: sorted(cells) for z, cells in sorted(out.items())}


def leiden(net: INet, gamma: float = 1.0, seed: int = 0) -> UPZoneSet:
    """Detect zones by running Leiden to convergence on the interest network."""
    zones, q, trace = community.leiden_partition(net, gamma=gamma, seed=seed)
    return UPZoneSet(level=net.level, zones=zones, modularity=q, gamma=gamma,
                     seed=seed, quality_trace=trace)


modularity = community.modularity


@dataclass
class ZoneProfile:
    zone_id: int
    tfidf: dict[str, float]
    top_terms: list[str]
    empty: bool = False


def profile_zones(zones: UPZoneSet, venues: list[Venue], venue_region_map: dict[str, str]) -> list[ZoneProfile]:
    """TF-IDF over venue categories with zones as documents.

    tf is the raw category count inside the zone; idf uses the smoothed form
    ln((1+N)/(1+df)) + 1 so categories present everywhere keep weight 1.
    """
    counts: dict[int, dict[str, int]] = {z: {} for z in set(zones.zones.values())}
    for venue in venues:
        cell = venue_region_map.get(venue.venue_id)
        if cell is None or cell not in zones.zones:
            continue
        zone = zones.zones[cell]
        counts[zone][venue.category] = counts[zone].get(venue.category, 0) + 1

    n_zones = len(counts)
    df: dict[str, int] = {}
    for zone_counts in counts.values():
        for cat in zone_counts:
            df[cat] = df.get(cat, 0) + 1

    profiles = []
    for zone in sorted(counts):
        zone_counts = counts[zone]
        if not zone_counts:
            logger.warning("zone %d has no venues; empty profile", zone)
            profiles.append(ZoneProfile(zone_id=zone, tfidf={}, top_terms=[], empty=True))
            continue
        tfidf = {
            cat: tf * (math.log((1 + n_zones) / (1 + df[cat])) + 1.0)
            for cat, tf in zone_counts.items()
        }
        top = sorted(tfidf, key=lambda c: (-tfidf[c], c))
        profiles.append(ZoneProfile(zone_id=zone, tfidf=tfidf, top_terms=top))
    return profiles


def solve_assignment(cost: np.ndarray) -> list[int]:
    """Minimum-cost assignment (Hungarian with potentials), rows <= cols.

    Returns col index assigned to each row. Exact for integer-valued costs.
    """
    n, m = cost.shape
    if n > m:
        raise ValueError("needs rows <= cols; pad first")
    INF = float("inf")
    a = np.zeros((n + 1, m + 1))
    a[1:, 1:] = cost
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=int)  # p[j] = row matched to column j
    way = np.zeros(m + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = a[i0, :] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, INF)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assigned = [-1] * n
    for j in range(1, m + 1):
        if p[j] != 0:
            assigned[p[j] - 1] = j - 1
    return assigned


@dataclass
class ZoneAlignment:
    matching: dict[int, int | None]  # zone label in A -> zone label in B
    total_overlap: int
    n_shared_cells: int


def hungarian_align(zones_a: UPZoneSet, zones_b: UPZoneSet) -> ZoneAlignment:
    """Match zones across platforms by maximizing total shared-cell overlap."""
    shared = sorted(set(zones_a.zones) & set(zones_b.zones))
    if not shared:
        raise ValueError("zone sets share no cells")
    labels_a = sorted(set(zones_a.zones.values()))
    labels_b = sorted(set(zones_b.zones.values()))
    ia = {z: i for i, z in enumerate(labels_a)}
    ib = {z: i for i, z in enumerate(labels_b)}
    overlap = np.zeros((len(labels_a), len(labels_b)))
    for cell in shared:
        overlap[ia[zones_a.zones[cell]], ib[zones_b.zones[cell]]] += 1

    # maximize: negate; pad with zero-overlap dummy columns/rows to square
    size = max(len(labels_a), len(labels_b))
    padded = np.zeros((size, size))
    padded[: len(labels_a), : len(labels_b)] = -overlap
    cols = solve_assignment(padded)

    matching: dict[int, int | None] = {}
    total = 0
    for i, za in enumerate(labels_a):
        j = cols[i]
        if j < len(labels_b) and overlap[i, j] > 0:
            matching[za] = labels_b[j]
            total += int(overlap[i, j])
        else:
            matching[za] = None
    return ZoneAlignment(matching=matching, total_overlap=total, n_shared_cells=len(shared))


def zone_similarity(zones_a: UPZoneSet, zones_b: UPZoneSet) -> dict[str, float]:
    """NMI / Rand / adjusted Rand over the cells present in both zone sets."""
    shared = set(zones_a.zones) & set(zones_b.zones)
    if not shared:
        raise ValueError("zone sets share no cells")
    pa = {c: zones_a.zones[c] for c in shared}
    pb = {c: zones_b.zones[c] for c in shared}
    out = {"nmi": nmi(pa, pb)}
    out.update(rand_index(pa, pb))
    return out


def spatially_connected_fraction(zones: UPZoneSet) -> float | None:
    """Fraction of zones whose hex cells form one connected patch; None when
    cell ids are not hex-grid ids."""
    from .hexgrid import _NEIGHBOR_OFFSETS, parse_cell_id

    try:
        coords = {cell: parse_cell_id(cell)[1:] for cell in zones.zones}
    except ValueError:
        return None
    members = zones.members()
    connected = 0
    for cells in members.values():
        cell_set = set(cells)
        seen = {cells[0]}
        stack = [cells[0]]
        by_qr = {coords[c]: c for c in cells}
        while stack:
            q, r = coords[stack.pop()]
            for dq, dr in _NEIGHBOR_OFFSETS:
                nbr = by_qr.get((q + dq, r + dr))
                if nbr is not None and nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        if len(seen) == len(cell_set):
            connected += 1
    return connected / len(members)
