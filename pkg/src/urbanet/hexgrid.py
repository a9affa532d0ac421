"""Flat-top hexagonal tessellation of a projected boundary at the four named
resolutions (h6-h9) plus custom target areas.

Cells live on an axial (q, r) lattice anchored at the boundary bounding-box
minimum corner, so cell ids are stable for a given dataset. Hexes at
different resolutions do not nest; parent lookup is by center containment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import shapely
from shapely.geometry import MultiPolygon, Point, Polygon

from .geo import Projection
from .ingest import ContextProfile, Region

NAMED_AREAS_KM2 = {"h6": 36.12, "h7": 5.16, "h8": 0.74, "h9": 0.11}

# axial neighbors of a flat-top hex
_NEIGHBOR_OFFSETS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


@dataclass(frozen=True)
class GridResolution:
    name: str
    target_area_km2: float

    def __post_init__(self):
        if self.target_area_km2 <= 0:
            raise ValueError("target area must be positive")
        if self.name in NAMED_AREAS_KM2 and self.target_area_km2 != NAMED_AREAS_KM2[self.name]:
            raise ValueError(f"{self.name} must carry area {NAMED_AREAS_KM2[self.name]} km^2")
        if self.name not in NAMED_AREAS_KM2 and self.name != "custom":
            raise ValueError(f"unknown resolution name {self.name!r}")

    @classmethod
    def named(cls, name: str) -> "GridResolution":
        return cls(name=name, target_area_km2=NAMED_AREAS_KM2[name])

    @classmethod
    def custom(cls, target_area_km2: float) -> "GridResolution":
        return cls(name="custom", target_area_km2=target_area_km2)

    @property
    def target_area_m2(self) -> float:
        return self.target_area_km2 * 1e6

    @property
    def circumradius_m(self) -> float:
        # regular hexagon area = (3*sqrt(3)/2) * R^2
        return math.sqrt(self.target_area_m2 * 2.0 / (3.0 * math.sqrt(3.0)))


@dataclass(frozen=True)
class HexCell:
    cell_id: str
    center: tuple[float, float]
    vertices: tuple[tuple[float, float], ...]

    def polygon(self) -> Polygon:
        return Polygon(self.vertices)


def parse_cell_id(cell_id: str) -> tuple[str, int, int]:
    name, q, r = cell_id.split(":")
    return name, int(q), int(r)


@dataclass(frozen=True)
class HexGrid:
    res: GridResolution
    origin: tuple[float, float]

    def cell_id(self, q: int, r: int) -> str:
        return f"{self.res.name}:{q}:{r}"

    def cell_center(self, q: int, r: int) -> tuple[float, float]:
        R = self.res.circumradius_m
        return (
            self.origin[0] + 1.5 * R * q,
            self.origin[1] + math.sqrt(3.0) * R * (r + q / 2.0),
        )

    def cell_vertices(self, q: int, r: int) -> tuple[tuple[float, float], ...]:
        cx, cy = self.cell_center(q, r)
        R = self.res.circumradius_m
        return tuple(
            (cx + R * math.cos(math.pi / 3.0 * k), cy + R * math.sin(math.pi / 3.0 * k))
            for k in range(6)
        )

    def cell(self, q: int, r: int) -> HexCell:
        return HexCell(cell_id=self.cell_id(q, r), center=self.cell_center(q, r), vertices=self.cell_vertices(q, r))

    def _contains(self, q: int, r: int, x: float, y: float, eps: float) -> bool:
        cx, cy = self.cell_center(q, r)
        dx, dy = x - cx, y - cy
        R = self.res.circumradius_m
        s3 = math.sqrt(3.0)
        half_height = s3 / 2.0 * R
        return max(abs(dy), abs(s3 * dx + dy) / 2.0, abs(s3 * dx - dy) / 2.0) <= half_height + eps

    def locate_xy(self, x: float, y: float) -> str:
        """Cell id of the hex containing a projected point; points on a cell
        boundary resolve to the lexicographically smallest id."""
        R = self.res.circumradius_m
        px, py = x - self.origin[0], y - self.origin[1]
        qf = (2.0 / 3.0) * px / R
        rf = (-1.0 / 3.0 * px + math.sqrt(3.0) / 3.0 * py) / R
        q, r = _axial_round(qf, rf)
        eps = 1e-9 * R
        hits = [
            self.cell_id(q + dq, r + dr)
            for dq, dr in ((0, 0),) + _NEIGHBOR_OFFSETS
            if self._contains(q + dq, r + dr, x, y, eps)
        ]
        if not hits:  # numeric fringe: fall back to the rounded cell
            return self.cell_id(q, r)
        return min(hits)

    def locate(self, lat: float, lon: float, projection: Projection) -> str:
        return self.locate_xy(*projection.forward(lat, lon))


def _axial_round(qf: float, rf: float) -> tuple[int, int]:
    # cube rounding with the largest-error coordinate recomputed
    xf, zf = qf, rf
    yf = -xf - zf
    x, y, z = round(xf), round(yf), round(zf)
    dx, dy, dz = abs(x - xf), abs(y - yf), abs(z - zf)
    if dx > dy and dx > dz:
        x = -y - z
    elif dy > dz:
        y = -x - z
    else:
        z = -x - y
    return int(x), int(z)


def grid_for(boundary: Polygon | MultiPolygon, res: GridResolution) -> HexGrid:
    minx, miny, _, _ = boundary.bounds
    return HexGrid(res=res, origin=(minx, miny))


def tessellate(
    boundary: Polygon | MultiPolygon,
    res: GridResolution,
    inclusion: str = "center",
) -> list[HexCell]:
    """Cover a boundary polygon (projected meters) with hex cells.

    inclusion="center" keeps cells whose center lies in the boundary;
    inclusion="overlap" keeps any cell whose hexagon intersects it.
    """
    if inclusion not in ("center", "overlap"):
        raise ValueError(f"unknown inclusion mode {inclusion!r}")
    if boundary.is_empty or boundary.area <= 0.0:
        return []
    grid = grid_for(boundary, res)
    R = res.circumradius_m
    s3 = math.sqrt(3.0)
    minx, miny, maxx, maxy = boundary.bounds
    x0, y0 = grid.origin
    pad = R if inclusion == "center" else 2 * R

    shapely.prepare(boundary)
    cells: list[HexCell] = []
    q_lo = math.floor((minx - pad - x0) / (1.5 * R))
    q_hi = math.ceil((maxx + pad - x0) / (1.5 * R))
    for q in range(q_lo, q_hi + 1):
        r_lo = math.floor((miny - pad - y0) / (s3 * R) - q / 2.0)
        r_hi = math.ceil((maxy + pad - y0) / (s3 * R) - q / 2.0)
        for r in range(r_lo, r_hi + 1):
            cell = grid.cell(q, r)
            if inclusion == "center":
                keep = boundary.covers(Point(cell.center))
            else:
                keep = boundary.intersects(cell.polygon())
            if keep:
                cells.append(cell)
    return cells


def cells_to_regions(cells: list[HexCell], projection: Projection, res: GridResolution) -> list[Region]:
    """Bridge grid cells into the canonical Region model; boundaries are
    unprojected so they live in the same space as loaded regions."""
    regions = []
    for cell in cells:
        ring = [projection.inverse(x, y) for x, y in cell.vertices]
        ring.append(ring[0])
        regions.append(
            Region(
                region_id=cell.cell_id,
                level=res.name,
                centroid=cell.center,
                boundary=[[(lon, lat) for lat, lon in ring]],
                context=ContextProfile(),
            )
        )
    return regions
