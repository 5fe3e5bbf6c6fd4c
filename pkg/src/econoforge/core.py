"""Shared domain types: firm micro-data, sector IO tables, transaction models.

All monetary values are integer euro-cents end-to-end. Constructors validate
their invariants, so malformed values cannot exist past the ingest boundary.
Every type here is immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence


class DomainError(ValueError):
    """A domain invariant was violated while constructing or combining types."""


class Provenance(str, Enum):
    """How a transaction model came to exist."""

    HEURISTIC_SOLVER = "heuristic-solver"
    EXTERNAL_SMT = "external-smt"
    IMPORTED = "imported"


@dataclass(frozen=True)
class SectorRegistry:
    """Closed, dataset-scoped set of sector codes (ÖNACE-style sections)."""

    names: Mapping[str, str]  # code -> human-readable name

    def __post_init__(self) -> None:
        for code in self.names:
            if not code or not code.isupper():
                raise DomainError(f"sector code must be a non-empty uppercase string: {code!r}")

    def __contains__(self, code: str) -> bool:
        return code in self.names

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(sorted(self.names))

    def require(self, code: str) -> str:
        if code not in self.names:
            raise DomainError(f"unknown sector code {code!r} (registry has {sorted(self.names)})")
        return code


@dataclass(frozen=True)
class FirmRecord:
    """One firm-year observation.

    ``lat``/``lon`` may be None for firms without usable coordinates; such
    firms are excluded from spatial layers but still count toward dataset
    totals. Expenses are stored as non-negative spent magnitudes, and
    ``cash_flow_cents`` is their sum with revenue (money earned plus money
    spent).
    """

    firm_id: str
    name: str
    lat: float | None
    lon: float | None
    sector: str
    region_code: str
    year: int
    revenue_cents: int
    expenses_cents: int
    employee_expenses_cents: int
    cash_flow_cents: int

    def __post_init__(self) -> None:
        if not self.firm_id:
            raise DomainError("firm_id must be non-empty")
        if (self.lat is None) != (self.lon is None):
            raise DomainError(f"firm {self.firm_id}: lat and lon must be both set or both missing")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"firm {self.firm_id}: lat {self.lat} outside [-90, 90]")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"firm {self.firm_id}: lon {self.lon} outside [-180, 180]")
        if self.employee_expenses_cents < 0:
            raise DomainError(
                f"firm {self.firm_id}: employee expenses may not be negative "
                f"(got {self.employee_expenses_cents})"
            )
        if self.revenue_cents < 0 or self.expenses_cents < 0:
            raise DomainError(f"firm {self.firm_id}: revenue/expenses magnitudes may not be negative")
        if self.cash_flow_cents != self.revenue_cents + self.expenses_cents:
            raise DomainError(
                f"firm {self.firm_id}: cash_flow_cents must equal revenue + expenses "
                f"({self.cash_flow_cents} != {self.revenue_cents} + {self.expenses_cents})"
            )

    @property
    def has_location(self) -> bool:
        return self.lat is not None


@dataclass(frozen=True)
class IOTable:
    """Sector-to-sector monetary flow totals for one year (the macro ground truth)."""

    year: int
    entries: Mapping[tuple[str, str], int]  # (from_sector, to_sector) -> amount_cents

    def __post_init__(self) -> None:
        for (src, dst), amount in self.entries.items():
            if amount < 0:
                raise DomainError(f"IO entry {src}->{dst} in {self.year} is negative: {amount}")

    def check_registry(self, registry: SectorRegistry) -> None:
        for src, dst in self.entries:
            registry.require(src)
            registry.require(dst)

    def total_cents(self) -> int:
        return sum(self.entries.values())


@dataclass(frozen=True)
class Edge:
    """One inferred monetary outflow src_firm -> dst_firm."""

    src: str
    dst: str
    amount_cents: int


@dataclass(frozen=True)
class ConstraintStatus:
    satisfied: bool
    violation_magnitude: int


@dataclass(frozen=True)
class ResidualReport:
    """How far a model is from exactly meeting its constraint set.

    ``max_relative_residual`` is the max over sector pairs with target > 0 of
    |achieved - target| / target; it is 0 exactly when every constraint holds
    exactly.
    """

    sector_pair_residuals: Mapping[tuple[str, str], int]
    constraint_status: Mapping[str, ConstraintStatus]
    max_relative_residual: float

    @property
    def all_satisfied(self) -> bool:
        return all(s.satisfied for s in self.constraint_status.values())


@dataclass(frozen=True)
class TransactionModel:
    """Inferred weighted directed firm-to-firm graph.

    Zero-weight pairs are simply absent; stored amounts are strictly positive.
    """

    model_id: str
    dataset_id: str
    year: int
    constraint_set_id: str
    edges: tuple[Edge, ...]
    provenance: Provenance
    residuals: ResidualReport | None = None

    def __post_init__(self) -> None:
        seen: set[tuple[str, str]] = set()
        for e in self.edges:
            if e.src == e.dst:
                raise DomainError(f"model {self.model_id}: self-edge on {e.src}")
            if e.amount_cents <= 0:
                raise DomainError(
                    f"model {self.model_id}: edge {e.src}->{e.dst} has non-positive amount {e.amount_cents}"
                )
            pair = (e.src, e.dst)
            if pair in seen:
                raise DomainError(f"model {self.model_id}: duplicate edge {e.src}->{e.dst}")
            seen.add(pair)

    def check_endpoints(self, firm_ids: Iterable[str]) -> None:
        """Raise if any edge endpoint is not among ``firm_ids``."""
        known = set(firm_ids)
        for e in self.edges:
            for endpoint in (e.src, e.dst):
                if endpoint not in known:
                    raise DomainError(
                        f"model {self.model_id}: edge endpoint {endpoint!r} not in dataset"
                    )

    def edge_map(self) -> dict[tuple[str, str], int]:
        return {(e.src, e.dst): e.amount_cents for e in self.edges}


@dataclass(frozen=True)
class DatasetSummary:
    years: tuple[int, ...]
    sectors: tuple[str, ...]
    firm_counts: Mapping[int, int]
    cash_flow_cents: Mapping[int, int]


def dataset_summary(
    firms_by_year: Mapping[int, Sequence[FirmRecord]],
    registry: SectorRegistry,
) -> DatasetSummary:
    """Tally a dataset: sorted years, registry codes, per-year counts and cash-flow totals."""
    years = tuple(sorted(firms_by_year))
    counts = {y: len(firms_by_year[y]) for y in years}
    totals = {y: sum(f.cash_flow_cents for f in firms_by_year[y]) for y in years}
    return DatasetSummary(
        years=years,
        sectors=registry.codes,
        firm_counts=counts,
        cash_flow_cents=totals,
    )


def check_unique_firm_years(firms: Iterable[FirmRecord]) -> None:
    """Enforce the (firm_id, year) uniqueness invariant over a collection."""
    seen: set[tuple[str, int]] = set()
    for f in firms:
        key = (f.firm_id, f.year)
        if key in seen:
            raise DomainError(f"duplicate firm-year ({f.firm_id}, {f.year})")
        seen.add(key)
