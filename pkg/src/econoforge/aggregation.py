"""Spatial and administrative aggregation of firm data, with temporal deltas.

Layers are pure functions of (firms, year, resolution, metric): binning is
independent of input order, bin counts are non-decreasing in resolution, and
per-year totals are conserved (firms without coordinates are excluded from
bins but reported in the layer's ``excluded_firm_count``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .core import DomainError, FirmRecord
from .hexgrid import HexIndex, bin_point

METRICS = ("firm_count", "cash_flow")


def _metric_of(count: int, cash: int, metric: str) -> int:
    if metric == "firm_count":
        return count
    if metric == "cash_flow":
        return cash
    raise DomainError(f"unknown metric {metric!r} (expected one of {METRICS})")


@dataclass(frozen=True)
class BinMetrics:
    firm_count: int
    cash_flow_cents: int
    sector_breakdown: Mapping[str, float]  # percent of the layer metric per sector

    def value(self, metric: str) -> int:
        return _metric_of(self.firm_count, self.cash_flow_cents, metric)


@dataclass(frozen=True)
class HexBinLayer:
    year: int
    resolution: int
    metric: str
    bins: Mapping[HexIndex, BinMetrics]
    excluded_firm_count: int  # firms without coordinates, still in dataset totals

    def total(self) -> int:
        return sum(b.value(self.metric) for b in self.bins.values())


@dataclass(frozen=True)
class DeltaLayer:
    year: int
    previous_year: int
    resolution: int
    metric: str
    deltas: Mapping[HexIndex, int]  # signed; sign drives blue/red, |delta| drives height


@dataclass(frozen=True)
class RegionMetrics:
    region_code: str
    firm_count: int
    cash_flow_cents: int
    sector_breakdown: Mapping[str, float]
    area_km2: float | None
    normalized: float | None  # metric value / area_km2 when normalization requested

    def value(self, metric: str) -> int:
        return _metric_of(self.firm_count, self.cash_flow_cents, metric)


@dataclass(frozen=True)
class RegionInfo:
    code: str
    level: int
    name: str
    area_km2: float
    centroid_lat: float
    centroid_lon: float


def _breakdown(per_sector: dict[str, int], total: int) -> dict[str, float]:
    if total == 0:
        return {s: 0.0 for s in sorted(per_sector)}
    return {s: 100.0 * per_sector[s] / total for s in sorted(per_sector)}


def aggregate_bins(
    firms: Iterable[FirmRecord],
    year: int,
    resolution: int,
    metric: str,
) -> HexBinLayer:
    """Group the year's firms into hex bins and aggregate both metrics per bin."""
    _metric_of(0, 0, metric)  # validate metric name early
    counts: dict[HexIndex, int] = {}
    cash: dict[HexIndex, int] = {}
    sectors: dict[HexIndex, dict[str, int]] = {}
    excluded = 0
    for f in firms:
        if f.year != year:
            continue
        if not f.has_location:
            excluded += 1
            continue
        idx = bin_point(f.lat, f.lon, resolution)  # type: ignore[arg-type]
        counts[idx] = counts.get(idx, 0) + 1
        cash[idx] = cash.get(idx, 0) + f.cash_flow_cents
        per = sectors.setdefault(idx, {})
        per[f.sector] = per.get(f.sector, 0) + _metric_of(1, f.cash_flow_cents, metric)

    bins = {}
    for idx in sorted(counts, key=lambda h: (h.q, h.r)):
        total = _metric_of(counts[idx], cash[idx], metric)
        bins[idx] = BinMetrics(
            firm_count=counts[idx],
            cash_flow_cents=cash[idx],
            sector_breakdown=_breakdown(sectors[idx], total),
        )
    return HexBinLayer(year=year, resolution=resolution, metric=metric, bins=bins,
                       excluded_firm_count=excluded)


def temporal_delta(layer_t: HexBinLayer, layer_prev: HexBinLayer, metric: str) -> DeltaLayer:
    """Per-bin ``value(t) - value(t-1)``; bins absent in one year count as 0."""
    if layer_t.resolution != layer_prev.resolution:
        raise DomainError(
            f"resolution mismatch: {layer_t.resolution} vs {layer_prev.resolution}"
        )
    keys = set(layer_t.bins) | set(layer_prev.bins)
    deltas = {}
    for idx in sorted(keys, key=lambda h: (h.q, h.r)):
        now = layer_t.bins[idx].value(metric) if idx in layer_t.bins else 0
        before = layer_prev.bins[idx].value(metric) if idx in layer_prev.bins else 0
        deltas[idx] = now - before
    return DeltaLayer(
        year=layer_t.year,
        previous_year=layer_prev.year,
        resolution=layer_t.resolution,
        metric=metric,
        deltas=deltas,
    )


def interpolate_keyframes(
    layer_prev: HexBinLayer,
    layer_t: HexBinLayer,
    alpha: float,
    metric: str,
) -> dict[HexIndex, float]:
    """Linear blend (1-alpha)*v(t-1) + alpha*v(t) per bin; endpoints are exact."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha {alpha} outside [0, 1]")
    if layer_t.resolution != layer_prev.resolution:
        raise DomainError("keyframe layers must share a resolution")
    keys = set(layer_t.bins) | set(layer_prev.bins)
    out: dict[HexIndex, float] = {}
    for idx in sorted(keys, key=lambda h: (h.q, h.r)):
        before = layer_prev.bins[idx].value(metric) if idx in layer_prev.bins else 0
        now = layer_t.bins[idx].value(metric) if idx in layer_t.bins else 0
        if alpha == 0.0:
            out[idx] = before
        elif alpha == 1.0:
            out[idx] = now
        else:
            out[idx] = (1.0 - alpha) * before + alpha * now
    return out


def region_prefix(region_code: str, level: int) -> str:
    parts = region_code.split("/")
    if level < 1:
        raise DomainError(f"region level must be >= 1, got {level}")
    return "/".join(parts[:level])


def aggregate_regions(
    firms: Iterable[FirmRecord],
    year: int,
    level: int,
    metric: str,
    normalize: bool,
    region_table: Mapping[str, RegionInfo],
) -> list[RegionMetrics]:
    """Group firms by region-code prefix at ``level``; optionally per-km² normalize."""
    _metric_of(0, 0, metric)
    if level < 1 or not any(info.level == level for info in region_table.values()):
        raise DomainError(f"region level {level} not present in the region table")
    counts: dict[str, int] = {}
    cash: dict[str, int] = {}
    sectors: dict[str, dict[str, int]] = {}
    for f in firms:
        if f.year != year:
            continue
        code = region_prefix(f.region_code, level)
        counts[code] = counts.get(code, 0) + 1
        cash[code] = cash.get(code, 0) + f.cash_flow_cents
        per = sectors.setdefault(code, {})
        per[f.sector] = per.get(f.sector, 0) + _metric_of(1, f.cash_flow_cents, metric)

    out = []
    for code in sorted(counts):
        info = region_table.get(code)
        area = info.area_km2 if info is not None else None
        value = _metric_of(counts[code], cash[code], metric)
        if normalize:
            if area is None or area <= 0:
                raise DomainError(f"region {code!r} has no usable area for normalization")
            normalized = value / area
        else:
            normalized = None
        out.append(RegionMetrics(
            region_code=code,
            firm_count=counts[code],
            cash_flow_cents=cash[code],
            sector_breakdown=_breakdown(sectors[code], value),
            area_km2=area,
            normalized=normalized,
        ))
    return out
