import dataclasses
import hashlib
import json
from pathlib import Path

import pytest

from econoforge.core import DomainError, Edge, Provenance, TransactionModel
from econoforge.solver import solve_heuristic
from econoforge.store import (
    FIRM_FIELDS,
    SchemaError,
    ingest_firms,
    ingest_io_tables,
    io_csv_text,
    load_dataset,
    load_model,
    load_region_table,
    model_from_json,
    model_json_text,
    model_to_json,
    save_dataset,
    save_model,
)
from econoforge.synthetic import SyntheticSpec, generate_synthetic

HEADER = ",".join(FIRM_FIELDS)


def test_empty_firm_csv_with_header():
    records, report = ingest_firms(HEADER + "\n")
    assert records == [] and report.accepted == 0 and report.issues == ()


def test_missing_or_wrong_header():
    with pytest.raises(SchemaError):
        ingest_firms("")
    with pytest.raises(SchemaError):
        ingest_firms("a,b,c\n1,2,3\n")


def test_negative_employee_expenses_row_rejected_with_reason():
    row = "f1,Firm,47.0,15.0,C,AT/1/1,2014,100,50,-1,150"
    records, report = ingest_firms(HEADER + "\n" + row + "\n")
    assert records == []
    assert report.issues[0].line == 2
    assert "may not be negative" in report.issues[0].message


def test_partial_accept_keeps_valid_rows():
    rows = [
        "f1,Firm,47.0,15.0,C,AT/1/1,2014,100,50,10,150",
        "f2,Firm,47.0,15.0,C,AT/1/1,2014,100,50,10,999",  # cash flow mismatch
        "f3,Firm,,,C,AT/1/1,2014,100,50,10,",  # no coordinates, computed cash flow
        "f1,Firm,47.0,15.0,C,AT/1/1,2014,100,50,10,150",  # duplicate firm-year
    ]
    records, report = ingest_firms(HEADER + "\n" + "\n".join(rows) + "\n")
    assert [r.firm_id for r in records] == ["f1", "f3"]
    assert records[1].cash_flow_cents == 150 and records[1].lat is None
    assert [i.line for i in report.issues] == [3, 5]


def test_ingest_is_idempotent():
    text = HEADER + "\nf1,Firm,47.0,15.0,C,AT/1/1,2014,100,50,10,150\n"
    first, _ = ingest_firms(text)
    second, _ = ingest_firms(text)
    assert first == second


def test_io_table_ingest_and_roundtrip():
    empty, report = ingest_io_tables("year,from_sector,to_sector,amount_cents\n")
    assert empty == {} and report.accepted == 0
    # the 32-billion-euro flow, in cents
    tables, _ = ingest_io_tables(
        "year,from_sector,to_sector,amount_cents\n2014,C,A,3200000000000\n")
    assert tables[2014].entries[("C", "A")] == 3_200_000_000_000

    multi = ("year,from_sector,to_sector,amount_cents\n"
             "2013,C,A,5\n2013,A,C,9\n2014,C,A,6\n")
    tables, _ = ingest_io_tables(multi)
    assert io_csv_text(tables) == multi.replace("2013,C,A,5\n2013,A,C,9", "2013,A,C,9\n2013,C,A,5")
    reparsed, _ = ingest_io_tables(io_csv_text(tables))
    assert {y: dict(t.entries) for y, t in reparsed.items()} == {
        y: dict(t.entries) for y, t in tables.items()}


def test_io_duplicate_pair_rejected():
    text = "year,from_sector,to_sector,amount_cents\n2014,C,A,5\n2014,C,A,6\n"
    tables, report = ingest_io_tables(text)
    assert tables[2014].entries[("C", "A")] == 5
    assert report.issues[0].line == 3


def test_region_table_parsing():
    text = ("region_code,level,name,area_km2,centroid_lat,centroid_lon\n"
            "AT,1,Country,83879.0,47.7,13.3\nAT/1,2,State,11982.0,48.1,16.2\n")
    table = load_region_table(text)
    assert table["AT/1"].area_km2 == 11982.0
    with pytest.raises(SchemaError):
        load_region_table(text + "AT,1,Dup,1.0,1.0,1.0\n")


def _dir_digest(path: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(path.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(path).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_generator_determinism_and_roundtrip(tmp_path):
    spec = SyntheticSpec(n_firms=60, n_sectors=4, n_regions=3, years=(2013, 2014), seed=9)
    ds1 = generate_synthetic(spec)
    ds2 = generate_synthetic(spec)
    assert ds1 == ds2
    save_dataset(ds1, tmp_path / "one")
    save_dataset(ds2, tmp_path / "two")
    assert _dir_digest(tmp_path / "one") == _dir_digest(tmp_path / "two")

    loaded = load_dataset(tmp_path / "one" / ds1.dataset_id)
    assert loaded.firms_by_year == ds1.firms_by_year
    assert {y: dict(t.entries) for y, t in loaded.io_tables.items()} == {
        y: dict(t.entries) for y, t in ds1.io_tables.items()}
    assert loaded.regions == ds1.regions


def test_generator_manifest_counts(fixture_dataset):
    manifest = fixture_dataset.manifest
    assert manifest["generator"]["n_firms"] == 500
    for year in fixture_dataset.years:
        assert manifest["firm_counts"][str(year)] == 500
    trends = set(manifest["region_trends"].values())
    assert trends <= {"grow", "decline"} and len(trends) == 2


def test_io_targets_within_sector_expense_budgets(fixture_dataset):
    # feasibility audit: total outflow of a sector never exceeds what its
    # firms actually spend
    for year in fixture_dataset.years:
        spent: dict = {}
        for f in fixture_dataset.firms(year):
            spent[f.sector] = spent.get(f.sector, 0) + f.expenses_cents
        outflow: dict = {}
        for (src, dst), amount in fixture_dataset.io_tables[year].entries.items():
            outflow[src] = outflow.get(src, 0) + amount
        for sector, total in outflow.items():
            assert total <= spent[sector]


def test_manifest_verification_detects_tampering(tmp_path):
    ds = generate_synthetic(SyntheticSpec(n_firms=12, n_sectors=3, n_regions=2,
                                          years=(2014,), seed=1))
    path = save_dataset(ds, tmp_path)
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["firm_counts"]["2014"] = 999
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(DomainError):
        load_dataset(path)


def test_model_json_roundtrip(tmp_path):
    model = TransactionModel(
        "m-1", "d", 2014, "cs-x",
        (Edge("a", "b", 10), Edge("b", "c", 2 ** 55)),  # beyond double precision
        Provenance.HEURISTIC_SOLVER,
    )
    path = tmp_path / "m.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded == model
    assert model_json_text(loaded) == model_json_text(model)

    empty = TransactionModel("m-2", "d", 2014, "", (), Provenance.IMPORTED)
    save_model(empty, path)
    assert load_model(path) == empty


def test_model_schema_version_checked():
    obj = model_to_json(TransactionModel("m", "d", 2014, "", (), Provenance.IMPORTED))
    obj["schema"] = 2
    with pytest.raises(SchemaError):
        model_from_json(obj)


def test_large_model_hash_stable(fixture_dataset):
    from econoforge.rules import ConstraintSet, NonNegativity, io_table_to_constraints
    year = fixture_dataset.years[0]
    firms = fixture_dataset.firms(year)[:150]
    cs = ConstraintSet(tuple([NonNegativity()]
                             + io_table_to_constraints(fixture_dataset.io_tables[year])))
    model, report = solve_heuristic(firms, cs, dataset_id=fixture_dataset.dataset_id, year=year)
    model = dataclasses.replace(model, residuals=report.residuals)
    assert len(model.edges) > 10_000
    text1 = model_json_text(model)
    text2 = model_json_text(load_model_from_text(text1))
    assert hashlib.sha256(text1.encode()).hexdigest() == hashlib.sha256(text2.encode()).hexdigest()


def load_model_from_text(text: str):
    return model_from_json(json.loads(text))
