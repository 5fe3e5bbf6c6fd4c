"""Deterministic synthetic datasets (stand-in for proprietary firm registries).

Everything is a pure function of (spec, seed): firm roster, coordinates,
financials, regional growth/decline trends, and IO tables derived from the
firms' own aggregates (each sector's outflow budget is 70% of its firms'
expenses, so default constraint sets are always feasible). The manifest
records exact counts, totals and the planted per-region trends so tests and
clients can audit every aggregate against it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .aggregation import RegionInfo
from .core import FirmRecord, IOTable, SectorRegistry
from .store import Dataset

SECTOR_NAMES = {
    "A": "Agriculture",
    "B": "Mining",
    "C": "Manufacturing",
    "D": "Energy supply",
    "E": "Water and waste",
    "F": "Construction",
    "G": "Trade",
    "H": "Transport",
    "I": "Accommodation",
    "J": "Information",
    "K": "Finance",
    "L": "Real estate",
}

_GROW_RATE = 0.12
_DECLINE_RATE = -0.12
_NOISE = 0.03
_IO_BUDGET_SHARE = 0.7


@dataclass(frozen=True)
class SyntheticSpec:
    n_firms: int = 500
    n_sectors: int = 8
    n_regions: int = 6  # states under one country, two districts each
    years: tuple[int, ...] = (2013, 2014)
    seed: int = 7
    dataset_id: str | None = None

    def resolved_id(self) -> str:
        return self.dataset_id or f"synth-{self.seed}-{self.n_firms}"

    def __post_init__(self) -> None:
        if self.n_firms < 1 or self.n_regions < 1 or not self.years:
            raise ValueError("spec needs at least one firm, one region and one year")
        if not 2 <= self.n_sectors <= len(SECTOR_NAMES):
            raise ValueError(f"n_sectors must be in 2..{len(SECTOR_NAMES)}")
        if self.n_firms < self.n_sectors:
            raise ValueError("need at least one firm per sector for feasible IO targets")
        if tuple(sorted(self.years)) != self.years:
            raise ValueError("years must be sorted ascending")


def _largest_remainder(total: int, weights: list[float]) -> list[int]:
    s = sum(weights)
    if s <= 0 or total <= 0:
        return [0] * len(weights)
    raw = [total * w / s for w in weights]
    out = [int(v) for v in raw]
    order = sorted(range(len(raw)), key=lambda k: -(raw[k] - out[k]))
    for k in order[: total - sum(out)]:
        out[k] += 1
    return out


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = random.Random(spec.seed)
    sectors = sorted(SECTOR_NAMES)[: spec.n_sectors]
    registry = SectorRegistry({code: SECTOR_NAMES[code] for code in sectors})

    # region tree: one country, n states, two districts per state
    regions: dict[str, RegionInfo] = {}
    trends: dict[str, str] = {}
    districts: list[str] = []
    country_area = 0.0
    state_centroids = {}
    for i in range(1, spec.n_regions + 1):
        state = f"AT/{i}"
        lat = round(rng.uniform(46.6, 48.8), 6)
        lon = round(rng.uniform(9.8, 16.8), 6)
        state_centroids[state] = (lat, lon)
        trends[state] = rng.choice(("grow", "decline"))
        state_area = 0.0
        for j in (1, 2):
            code = f"{state}/{j}"
            d_lat = round(lat + rng.uniform(-0.3, 0.3), 6)
            d_lon = round(lon + rng.uniform(-0.3, 0.3), 6)
            area = round(rng.uniform(400.0, 4000.0), 1)
            regions[code] = RegionInfo(code, 3, f"District {i}.{j}", area, d_lat, d_lon)
            districts.append(code)
            state_area += area
        regions[state] = RegionInfo(state, 2, f"State {i}", round(state_area, 1), lat, lon)
        country_area += state_area
    regions["AT"] = RegionInfo("AT", 1, "Country", round(country_area, 1), 47.7, 13.3)
    if spec.n_regions >= 2 and len(set(trends.values())) == 1:
        flip = f"AT/{spec.n_regions}"  # plant at least one grower and one decliner
        trends[flip] = "grow" if trends[flip] == "decline" else "decline"

    # firm roster with per-year financial evolution
    firms_by_year: dict[int, list[FirmRecord]] = {y: [] for y in spec.years}
    for n in range(1, spec.n_firms + 1):
        firm_id = f"F{n:04d}"
        sector = sectors[(n - 1) % spec.n_sectors] if n <= spec.n_sectors else rng.choice(sectors)
        district = rng.choice(districts)
        info = regions[district]
        lat = round(min(max(info.centroid_lat + rng.uniform(-0.25, 0.25), -85.0), 85.0), 6)
        lon = round(info.centroid_lon + rng.uniform(-0.25, 0.25), 6)
        revenue = int(rng.lognormvariate(11.0, 0.8) * 100) + 100
        expense_ratio = rng.uniform(0.55, 0.95)
        employee_ratio = rng.uniform(0.2, 0.6)
        state = "/".join(district.split("/")[:2])
        rate = _GROW_RATE if trends[state] == "grow" else _DECLINE_RATE
        for year in spec.years:
            expenses = int(revenue * expense_ratio)
            employee = int(expenses * employee_ratio)
            firms_by_year[year].append(FirmRecord(
                firm_id=firm_id,
                name=f"Firm {n:04d}",
                lat=lat,
                lon=lon,
                sector=sector,
                region_code=district,
                year=year,
                revenue_cents=revenue,
                expenses_cents=expenses,
                employee_expenses_cents=employee,
                cash_flow_cents=revenue + expenses,
            ))
            revenue = max(int(revenue * (1.0 + rate + rng.uniform(-_NOISE, _NOISE))), 100)

    # IO tables from each year's sectoral aggregates
    io_tables: dict[int, IOTable] = {}
    for year in spec.years:
        expenses_by_sector = {s: 0 for s in sectors}
        for f in firms_by_year[year]:
            expenses_by_sector[f.sector] += f.expenses_cents
        entries: dict[tuple[str, str], int] = {}
        for src in sectors:
            budget = int(expenses_by_sector[src] * _IO_BUDGET_SHARE)
            weights = [rng.random() if rng.random() < 0.8 else 0.0 for _ in sectors]
            if sum(weights) == 0:
                weights[sectors.index(src) - 1] = 1.0
            for dst, amount in zip(sectors, _largest_remainder(budget, weights)):
                if amount > 0 and dst != src:
                    entries[(src, dst)] = amount
        io_tables[year] = IOTable(year=year, entries=entries)

    region_cash = {
        year: {
            state: sum(f.cash_flow_cents for f in firms_by_year[year]
                       if f.region_code.startswith(state + "/"))
            for state in sorted(trends)
        }
        for year in spec.years
    }
    manifest = {
        "dataset_id": spec.resolved_id(),
        "generator": {
            "n_firms": spec.n_firms,
            "n_sectors": spec.n_sectors,
            "n_regions": spec.n_regions,
            "years": list(spec.years),
            "seed": spec.seed,
        },
        "sectors": {code: SECTOR_NAMES[code] for code in sectors},
        "years": list(spec.years),
        "firm_counts": {str(y): len(firms_by_year[y]) for y in spec.years},
        "cash_flow_cents": {str(y): sum(f.cash_flow_cents for f in firms_by_year[y])
                            for y in spec.years},
        "io_total_cents": {str(y): io_tables[y].total_cents() for y in spec.years},
        "region_trends": dict(sorted(trends.items())),
        "region_cash_flow_cents": {str(y): region_cash[y] for y in spec.years},
    }
    return Dataset(
        dataset_id=spec.resolved_id(),
        firms_by_year={y: tuple(firms_by_year[y]) for y in spec.years},
        io_tables=io_tables,
        regions=regions,
        registry=registry,
        manifest=manifest,
    )
