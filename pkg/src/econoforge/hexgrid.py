"""Hexagonal binning on a pointy-top axial lattice over the Web-Mercator plane.

The lattice is anchored at Web-Mercator (0, 0). Hexagon edge length starts at
2^21 m for resolution 0 and halves per level up to resolution 12 (512 m), so
bin geometry is a fixed, reproducible function of the resolution index: the
zoom level a client maps to a resolution is purely a UI policy.

Each (lat, lon) inside the Mercator domain maps to exactly one bin per
resolution (nearest hex center via cube rounding), independent of input
order, which is what makes per-bin aggregates cacheable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

R_MAX = 12
BASE_EDGE_M = 2.0 ** 21  # resolution-0 hexagon edge length in meters
_EARTH_RADIUS_M = 6378137.0
_MAX_LAT = 85.05112878  # Web-Mercator domain limit
_SQRT3 = math.sqrt(3.0)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class HexIndex:
    """Axial coordinates (q, r) of one bin at one resolution."""

    resolution: int
    q: int
    r: int

    def __post_init__(self) -> None:
        if not 0 <= self.resolution <= R_MAX:
            raise GridError(f"resolution {self.resolution} outside 0..{R_MAX}")


def edge_length_m(resolution: int) -> float:
    if not 0 <= resolution <= R_MAX:
        raise GridError(f"resolution {resolution} outside 0..{R_MAX}")
    return BASE_EDGE_M / (2 ** resolution)


def project(lat: float, lon: float) -> tuple[float, float]:
    """WGS84 degrees -> Web-Mercator meters."""
    if not -_MAX_LAT <= lat <= _MAX_LAT:
        raise GridError(f"latitude {lat} outside Web-Mercator domain ±{_MAX_LAT}")
    if not -180.0 <= lon <= 180.0:
        raise GridError(f"longitude {lon} outside [-180, 180]")
    x = _EARTH_RADIUS_M * math.radians(lon)
    y = _EARTH_RADIUS_M * math.log(math.tan(math.pi / 4 + math.radians(lat) / 2))
    return x, y


def unproject(x: float, y: float) -> tuple[float, float]:
    """Web-Mercator meters -> WGS84 degrees."""
    lon = math.degrees(x / _EARTH_RADIUS_M)
    lat = math.degrees(2 * math.atan(math.exp(y / _EARTH_RADIUS_M)) - math.pi / 2)
    return lat, lon


def _cube_round(qf: float, rf: float) -> tuple[int, int]:
    sf = -qf - rf
    q, r, s = round(qf), round(rf), round(sf)
    dq, dr, ds = abs(q - qf), abs(r - rf), abs(s - sf)
    if dq > dr and dq > ds:
        q = -r - s
    elif dr > ds:
        r = -q - s
    return int(q), int(r)


def bin_point(lat: float, lon: float, resolution: int) -> HexIndex:
    """Deterministically assign a coordinate to its nearest hex center."""
    x, y = project(lat, lon)
    edge = edge_length_m(resolution)
    qf = (_SQRT3 / 3 * x - y / 3) / edge
    rf = (2.0 / 3 * y) / edge
    q, r = _cube_round(qf, rf)
    return HexIndex(resolution, q, r)


def bin_center(index: HexIndex) -> tuple[float, float]:
    """Center of a bin as (lat, lon)."""
    edge = edge_length_m(index.resolution)
    x = edge * _SQRT3 * (index.q + index.r / 2.0)
    y = edge * 1.5 * index.r
    return unproject(x, y)


def bin_center_xy(index: HexIndex) -> tuple[float, float]:
    """Center of a bin in Web-Mercator meters (for geometric tests/clients)."""
    edge = edge_length_m(index.resolution)
    return edge * _SQRT3 * (index.q + index.r / 2.0), edge * 1.5 * index.r


_NEIGHBOR_STEPS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


def neighbors(index: HexIndex) -> tuple[HexIndex, ...]:
    return tuple(HexIndex(index.resolution, index.q + dq, index.r + dr) for dq, dr in _NEIGHBOR_STEPS)
