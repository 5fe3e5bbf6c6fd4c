"""Dataset persistence: CSV ingest, directory-per-dataset storage, model JSON.

File schemas (documented bit-exactly in docs/file-formats.md):

* firms.csv      firm_id,name,lat,lon,sector,region_code,year,revenue_cents,
                 expenses_cents,employee_expenses_cents,cash_flow_cents
* io_tables.csv  year,from_sector,to_sector,amount_cents
* regions.csv    region_code,level,name,area_km2,centroid_lat,centroid_lon
* manifest.json  counts/totals/registry written by the generator or ingest
* models/*.json  schema-versioned model documents (``"schema": 1``)

Ingest is partial-accept: invalid rows are collected with their line numbers
while valid rows are kept. Writes go through a temp file + atomic rename, so
concurrent readers only ever see fully written files.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .aggregation import RegionInfo
from .core import (
    ConstraintStatus,
    DatasetSummary,
    DomainError,
    Edge,
    FirmRecord,
    IOTable,
    Provenance,
    ResidualReport,
    SectorRegistry,
    TransactionModel,
    dataset_summary,
)

FIRM_FIELDS = [
    "firm_id", "name", "lat", "lon", "sector", "region_code", "year",
    "revenue_cents", "expenses_cents", "employee_expenses_cents", "cash_flow_cents",
]
IO_FIELDS = ["year", "from_sector", "to_sector", "amount_cents"]
REGION_FIELDS = ["region_code", "level", "name", "area_km2", "centroid_lat", "centroid_lon"]

MODEL_SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class IngestIssue:
    line: int
    message: str


@dataclass(frozen=True)
class IngestReport:
    accepted: int
    issues: tuple[IngestIssue, ...]


@dataclass(frozen=True)
class Dataset:
    """One fully loaded dataset; immutable, safe for concurrent readers."""

    dataset_id: str
    firms_by_year: Mapping[int, tuple[FirmRecord, ...]]
    io_tables: Mapping[int, IOTable]
    regions: Mapping[str, RegionInfo]
    registry: SectorRegistry
    manifest: Mapping[str, object]

    def __post_init__(self) -> None:
        for year, firms in self.firms_by_year.items():
            for f in firms:
                if f.sector not in self.registry:
                    raise DomainError(f"firm {f.firm_id} ({year}) uses unregistered sector {f.sector!r}")
                if self.regions and f.region_code not in self.regions:
                    raise DomainError(f"firm {f.firm_id} ({year}) uses unknown region {f.region_code!r}")
        for table in self.io_tables.values():
            table.check_registry(self.registry)

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted(self.firms_by_year))

    def firms(self, year: int) -> tuple[FirmRecord, ...]:
        if year not in self.firms_by_year:
            raise DomainError(f"dataset {self.dataset_id} has no year {year}")
        return self.firms_by_year[year]

    def firm_ids(self, year: int) -> set[str]:
        return {f.firm_id for f in self.firms(year)}

    def summary(self) -> DatasetSummary:
        return dataset_summary(self.firms_by_year, self.registry)


# ---------------------------------------------------------------------------
# CSV ingest

def _parse_int(raw: str, what: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{what} must be an integer, got {raw!r}") from None


def ingest_firms(text: str) -> tuple[list[FirmRecord], IngestReport]:
    """Parse a firm CSV; keeps valid rows, reports bad ones by line number."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("firm CSV is empty (missing header row)") from None
    if header != FIRM_FIELDS:
        raise SchemaError(f"firm CSV header mismatch: expected {FIRM_FIELDS}, got {header}")

    records: list[FirmRecord] = []
    issues: list[IngestIssue] = []
    seen: set[tuple[str, int]] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != len(FIRM_FIELDS):
                raise ValueError(f"expected {len(FIRM_FIELDS)} columns, got {len(row)}")
            (firm_id, name, lat_s, lon_s, sector, region_code, year_s,
             revenue_s, expenses_s, employee_s, cash_s) = row
            year = _parse_int(year_s, "year")
            if (firm_id, year) in seen:
                raise ValueError(f"duplicate (firm_id, year) = ({firm_id}, {year})")
            lat = float(lat_s) if lat_s else None
            lon = float(lon_s) if lon_s else None
            revenue = _parse_int(revenue_s, "revenue_cents")
            expenses = _parse_int(expenses_s, "expenses_cents")
            employee = _parse_int(employee_s, "employee_expenses_cents")
            cash = _parse_int(cash_s, "cash_flow_cents") if cash_s else revenue + expenses
            record = FirmRecord(
                firm_id=firm_id, name=name, lat=lat, lon=lon, sector=sector,
                region_code=region_code, year=year, revenue_cents=revenue,
                expenses_cents=expenses, employee_expenses_cents=employee,
                cash_flow_cents=cash,
            )
        except (ValueError, DomainError) as e:
            issues.append(IngestIssue(lineno, str(e)))
            continue
        seen.add((firm_id, year))
        records.append(record)
    return records, IngestReport(accepted=len(records), issues=tuple(issues))


def ingest_io_tables(text: str) -> tuple[dict[int, IOTable], IngestReport]:
    """Parse an IO-table CSV into per-year tables; duplicate pairs are rejected rows."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("IO CSV is empty (missing header row)") from None
    if header != IO_FIELDS:
        raise SchemaError(f"IO CSV header mismatch: expected {IO_FIELDS}, got {header}")

    entries: dict[int, dict[tuple[str, str], int]] = {}
    issues: list[IngestIssue] = []
    accepted = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != len(IO_FIELDS):
                raise ValueError(f"expected {len(IO_FIELDS)} columns, got {len(row)}")
            year = _parse_int(row[0], "year")
            src, dst = row[1], row[2]
            amount = _parse_int(row[3], "amount_cents")
            if amount < 0:
                raise ValueError(f"amount_cents may not be negative ({amount})")
            if (src, dst) in entries.get(year, {}):
                raise ValueError(f"duplicate sector pair ({src}, {dst}) for year {year}")
        except ValueError as e:
            issues.append(IngestIssue(lineno, str(e)))
            continue
        entries.setdefault(year, {})[(src, dst)] = amount
        accepted += 1
    tables = {year: IOTable(year=year, entries=pairs) for year, pairs in sorted(entries.items())}
    return tables, IngestReport(accepted=accepted, issues=tuple(issues))


def load_region_table(text: str) -> dict[str, RegionInfo]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("region CSV is empty (missing header row)") from None
    if header != REGION_FIELDS:
        raise SchemaError(f"region CSV header mismatch: expected {REGION_FIELDS}, got {header}")
    out: dict[str, RegionInfo] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(REGION_FIELDS):
            raise SchemaError(f"line {lineno}: expected {len(REGION_FIELDS)} columns")
        code, level_s, name, area_s, clat_s, clon_s = row
        if code in out:
            raise SchemaError(f"line {lineno}: duplicate region code {code!r}")
        out[code] = RegionInfo(code, int(level_s), name, float(area_s), float(clat_s), float(clon_s))
    return out


# ---------------------------------------------------------------------------
# dataset directory storage

def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def firms_csv_text(firms: Sequence[FirmRecord]) -> str:
    rows = []
    for f in sorted(firms, key=lambda f: (f.year, f.firm_id)):
        rows.append([
            f.firm_id, f.name,
            "" if f.lat is None else repr(f.lat),
            "" if f.lon is None else repr(f.lon),
            f.sector, f.region_code, f.year,
            f.revenue_cents, f.expenses_cents, f.employee_expenses_cents, f.cash_flow_cents,
        ])
    return _csv_text(FIRM_FIELDS, rows)


def io_csv_text(tables: Mapping[int, IOTable]) -> str:
    rows = []
    for year in sorted(tables):
        for (src, dst) in sorted(tables[year].entries):
            rows.append([year, src, dst, tables[year].entries[(src, dst)]])
    return _csv_text(IO_FIELDS, rows)


def regions_csv_text(regions: Mapping[str, RegionInfo]) -> str:
    rows = []
    for code in sorted(regions):
        r = regions[code]
        rows.append([r.code, r.level, r.name, repr(r.area_km2),
                     repr(r.centroid_lat), repr(r.centroid_lon)])
    return _csv_text(REGION_FIELDS, rows)


def save_dataset(ds: Dataset, root: Path) -> Path:
    """Write a dataset directory under ``root``; returns the dataset path."""
    path = Path(root) / ds.dataset_id
    path.mkdir(parents=True, exist_ok=True)
    (path / "models").mkdir(exist_ok=True)
    (path / "rules").mkdir(exist_ok=True)
    all_firms = [f for year in sorted(ds.firms_by_year) for f in ds.firms_by_year[year]]
    _atomic_write(path / "firms.csv", firms_csv_text(all_firms))
    _atomic_write(path / "io_tables.csv", io_csv_text(ds.io_tables))
    _atomic_write(path / "regions.csv", regions_csv_text(ds.regions))
    _atomic_write(path / "manifest.json",
                  json.dumps(ds.manifest, sort_keys=True, indent=2) + "\n")
    return path


def load_dataset(path: Path) -> Dataset:
    """Load a dataset directory; verifies manifest counts and totals."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    firms, report = ingest_firms((path / "firms.csv").read_text(encoding="utf-8"))
    if report.issues:
        first = report.issues[0]
        raise DomainError(f"stored firms.csv has invalid rows (line {first.line}: {first.message})")
    tables, io_report = ingest_io_tables((path / "io_tables.csv").read_text(encoding="utf-8"))
    if io_report.issues:
        first = io_report.issues[0]
        raise DomainError(f"stored io_tables.csv has invalid rows (line {first.line}: {first.message})")
    regions_file = path / "regions.csv"
    regions = load_region_table(regions_file.read_text(encoding="utf-8")) if regions_file.exists() else {}

    firms_by_year: dict[int, list[FirmRecord]] = {}
    for f in firms:
        firms_by_year.setdefault(f.year, []).append(f)
    sectors = manifest.get("sectors")
    if not isinstance(sectors, dict) or not sectors:
        codes = {f.sector for f in firms} | {s for t in tables.values() for pair in t.entries for s in pair}
        sectors = {code: code for code in sorted(codes)}
    ds = Dataset(
        dataset_id=str(manifest.get("dataset_id", path.name)),
        firms_by_year={y: tuple(v) for y, v in sorted(firms_by_year.items())},
        io_tables=tables,
        regions=regions,
        registry=SectorRegistry(sectors),
        manifest=manifest,
    )
    _verify_manifest(ds)
    return ds


def _verify_manifest(ds: Dataset) -> None:
    counts = ds.manifest.get("firm_counts")
    totals = ds.manifest.get("cash_flow_cents")
    summary = ds.summary()
    if isinstance(counts, dict):
        for year_s, n in counts.items():
            if summary.firm_counts.get(int(year_s)) != n:
                raise DomainError(f"manifest firm count for {year_s} does not match the stored rows")
    if isinstance(totals, dict):
        for year_s, total in totals.items():
            if summary.cash_flow_cents.get(int(year_s)) != total:
                raise DomainError(f"manifest cash-flow total for {year_s} does not match the stored rows")


# ---------------------------------------------------------------------------
# model JSON

def _residuals_to_json(r: ResidualReport | None):
    if r is None:
        return None
    return {
        "sector_pairs": {f"{s}->{t}": v for (s, t), v in r.sector_pair_residuals.items()},
        "constraints": {
            cid: {"satisfied": st.satisfied, "violation_magnitude": st.violation_magnitude}
            for cid, st in r.constraint_status.items()
        },
        "max_relative_residual": r.max_relative_residual,
    }


def _residuals_from_json(obj) -> ResidualReport | None:
    if obj is None:
        return None
    pairs = {}
    for key, v in obj.get("sector_pairs", {}).items():
        s, t = key.split("->", 1)
        pairs[(s, t)] = v
    status = {
        cid: ConstraintStatus(entry["satisfied"], entry["violation_magnitude"])
        for cid, entry in obj.get("constraints", {}).items()
    }
    return ResidualReport(pairs, status, obj.get("max_relative_residual", 0.0))


def model_to_json(model: TransactionModel) -> dict:
    return {
        "schema": MODEL_SCHEMA_VERSION,
        "model_id": model.model_id,
        "dataset_id": model.dataset_id,
        "year": model.year,
        "constraint_set_id": model.constraint_set_id,
        "provenance": model.provenance.value,
        "edges": [[e.src, e.dst, e.amount_cents] for e in sorted(model.edges, key=lambda e: (e.src, e.dst))],
        "residuals": _residuals_to_json(model.residuals),
    }


def model_from_json(obj: dict) -> TransactionModel:
    schema = obj.get("schema")
    if schema != MODEL_SCHEMA_VERSION:
        raise SchemaError(f"unsupported model schema version {schema!r} (expected {MODEL_SCHEMA_VERSION})")
    try:
        return TransactionModel(
            model_id=obj["model_id"],
            dataset_id=obj["dataset_id"],
            year=obj["year"],
            constraint_set_id=obj.get("constraint_set_id", ""),
            edges=tuple(Edge(src, dst, amount) for src, dst, amount in obj["edges"]),
            provenance=Provenance(obj.get("provenance", "imported")),
            residuals=_residuals_from_json(obj.get("residuals")),
        )
    except (KeyError, TypeError) as e:
        raise SchemaError(f"malformed model document: {e}") from e


def model_json_text(model: TransactionModel) -> str:
    return json.dumps(model_to_json(model), sort_keys=True, indent=2) + "\n"


def save_model(model: TransactionModel, path: Path) -> None:
    _atomic_write(Path(path), model_json_text(model))


def load_model(path: Path) -> TransactionModel:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
