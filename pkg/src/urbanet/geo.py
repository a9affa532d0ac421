"""Local projection and small polygon helpers shared by ingest, hexgrid and metrics.

All projected coordinates are meters on a plane. A single azimuthal
equidistant projection centered on the dataset bounding box keeps every
pairwise-distance ranking stable at city scale, which is all the
downstream rank statistics need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from shapely.geometry import MultiPolygon, Polygon

EARTH_RADIUS_M = 6_371_008.8


@dataclass(frozen=True)
class Projection:
    """Azimuthal equidistant projection centered at (lat0, lon0), with an
    optional rotation/scale so alternative grid conventions can be expressed
    as distinct projections."""

    lat0: float
    lon0: float
    rotation_deg: float = 0.0
    scale: float = 1.0

    @classmethod
    def for_bbox(cls, min_lat: float, min_lon: float, max_lat: float, max_lon: float) -> "Projection":
        return cls(lat0=(min_lat + max_lat) / 2.0, lon0=(min_lon + max_lon) / 2.0)

    @classmethod
    def for_points(cls, latlons) -> "Projection":
        lats = [p[0] for p in latlons]
        lons = [p[1] for p in latlons]
        return cls.for_bbox(min(lats), min(lons), max(lats), max(lons))

    def forward(self, lat: float, lon: float) -> tuple[float, float]:
        phi0 = math.radians(self.lat0)
        phi = math.radians(lat)
        dlam = math.radians(lon - self.lon0)
        cos_c = math.sin(phi0) * math.sin(phi) + math.cos(phi0) * math.cos(phi) * math.cos(dlam)
        cos_c = min(1.0, max(-1.0, cos_c))
        c = math.acos(cos_c)
        if c < 1e-12:
            k = 1.0
        else:
            k = c / math.sin(c)
        x = EARTH_RADIUS_M * k * math.cos(phi) * math.sin(dlam)
        y = EARTH_RADIUS_M * k * (
            math.cos(phi0) * math.sin(phi) - math.sin(phi0) * math.cos(phi) * math.cos(dlam)
        )
        if self.rotation_deg or self.scale != 1.0:
            th = math.radians(self.rotation_deg)
            x, y = (
                self.scale * (x * math.cos(th) - y * math.sin(th)),
                self.scale * (x * math.sin(th) + y * math.cos(th)),
            )
        return x, y

    def inverse(self, x: float, y: float) -> tuple[float, float]:
        if self.rotation_deg or self.scale != 1.0:
            th = math.radians(self.rotation_deg)
            x, y = x / self.scale, y / self.scale
            x, y = x * math.cos(th) + y * math.sin(th), -x * math.sin(th) + y * math.cos(th)
        rho = math.hypot(x, y)
        if rho < 1e-9:
            return self.lat0, self.lon0
        c = rho / EARTH_RADIUS_M
        phi0 = math.radians(self.lat0)
        phi = math.asin(math.cos(c) * math.sin(phi0) + (y / rho) * math.sin(c) * math.cos(phi0))
        lam = math.radians(self.lon0) + math.atan2(
            x * math.sin(c),
            rho * math.cos(phi0) * math.cos(c) - y * math.sin(phi0) * math.sin(c),
        )
        return math.degrees(phi), math.degrees(lam)


def rings_to_polygon(rings: list[list[tuple[float, float]]]) -> Polygon:
    """Rings are (lon, lat) sequences, exterior first."""
    if not rings:
        raise ValueError("polygon needs at least an exterior ring")
    return Polygon(rings[0], rings[1:])


def polygon_lonlat_centroid(geom: Polygon | MultiPolygon) -> tuple[float, float]:
    """Area-weighted centroid in (lat, lon), computed in degree space."""
    c = geom.centroid
    return c.y, c.x


def vertex_mean(geom: Polygon | MultiPolygon) -> tuple[float, float]:
    """Fallback centroid for invalid polygons: plain mean of exterior vertices."""
    if isinstance(geom, MultiPolygon):
        pts = [p for g in geom.geoms for p in g.exterior.coords[:-1]]
    else:
        pts = list(geom.exterior.coords[:-1])
    lat = sum(p[1] for p in pts) / len(pts)
    lon = sum(p[0] for p in pts) / len(pts)
    return lat, lon
