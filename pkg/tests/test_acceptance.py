"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Every tolerance is pinned here; nothing is deferred to later calibration.
"""

import itertools
import json
import random
import sys
import time
from contextlib import contextmanager

import pytest
from fastapi.testclient import TestClient

from econoforge.aggregation import aggregate_bins, aggregate_regions, interpolate_keyframes, temporal_delta
from econoforge.api import create_app
from econoforge.core import Edge, Provenance, TransactionModel
from econoforge.hexgrid import R_MAX, bin_point
from econoforge.rules import ConstraintSet, NonNegativity, io_table_to_constraints, parse_rules
from econoforge.smtlib import admissible_pairs, check_wellformed, emit_smtlib, parse_smt_model, render_assignment
from econoforge.solver import SolveStatus, SolverParams, solve_heuristic
from econoforge.store import save_dataset
from econoforge.synthetic import SyntheticSpec, generate_synthetic
from econoforge.validator import is_satisfied, validate

from conftest import make_firm
from naive_checker import naive_check


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL", file=sys.stderr, flush=True)
        raise
    print(f"[ACCEPTANCE] {name}: PASS", file=sys.stderr, flush=True)


def _model_of(edges, year=2014):
    return TransactionModel(
        "m", "d", year, "cs",
        tuple(Edge(s, d, a) for (s, d), a in sorted(edges.items()) if a > 0),
        Provenance.IMPORTED,
    )


# -- 1. validator / naive-oracle equivalence ---------------------------------

ENUM_FIRMS_A = [make_firm("c1", "C"), make_firm("c2", "C"), make_firm("a1", "A"),
                make_firm("b1", "B"), make_firm("d1", "D")]
ENUM_PAIRS_A = [("c1", "a1"), ("c2", "a1"), ("a1", "b1")]  # sector pairs C->A and A->B

ENUM_FIRMS_B = [make_firm("c1", "C"), make_firm("c2", "C"),
                make_firm("a1", "A"), make_firm("a2", "A"), make_firm("b1", "B")]
ENUM_PAIRS_B = [("c1", "a1"), ("c1", "a2"), ("c2", "a1"), ("c2", "a2")]  # sector pair C->A

BATTERY_A = [
    "sector_total C -> A = 10 tol 0\nsector_total A -> B = 4 tol 0",
    "sector_total C -> A = 10 tol 2",
    "fix c1 -> a1 = 3\nsector_total C -> A = 9 tol 0",
    'cap out for firm(sector == "C") to firm(sector == "A") <= 1',
    'cap in for firm(sector == "A") from firm(sector == "C") <= 1\nsector_total A -> B = 2 tol 1',
    'bound from firm(sector == "C") to firm(sector == "A") in [0, 4]',
    'bound from firm(sector == "A") to firm(sector == "B") in [1, 9]',
    'forbid from firm(firm_id == "c2") to firm(sector == "A")',
    "fix a1 -> b1 = 0",
    "sector_total C -> A = 0 tol 0",
]

BATTERY_B = [
    "sector_total C -> A = 10 tol 0",
    "sector_total C -> A = 10 tol 3",
    'cap out for firm(sector == "C") to firm(sector == "A") <= 1\nsector_total C -> A = 8 tol 0',
    'cap in for firm(sector == "A") from firm(sector == "C") <= 1',
    "fix c1 -> a2 = 5\nfix c2 -> a1 = 5\nsector_total C -> A = 10 tol 0",
    'bound from firm(sector == "C") to firm(sector == "A") in [2, 8]',
    'forbid from firm(firm_id == "c1") to firm(firm_id == "a1")\nsector_total C -> A = 6 tol 1',
]


def test_criterion_validator_oracle_equivalence():
    """Exhaustive: <=5 firms, <=2 sector pairs, every integer weight vector <=10."""
    with criterion("validator/oracle equivalence (exhaustive, exact)"):
        start = time.perf_counter()
        checked = 0
        for firms, pairs, battery in (
            (ENUM_FIRMS_A, ENUM_PAIRS_A, BATTERY_A),
            (ENUM_FIRMS_B, ENUM_PAIRS_B, BATTERY_B),
        ):
            sets = [parse_rules(text) for text in battery]
            for combo in itertools.product(range(11), repeat=len(pairs)):
                edges = dict(zip(pairs, combo))
                model = _model_of(edges)
                for cs in sets:
                    report = validate(model, firms, cs)
                    oracle = naive_check(edges, firms, cs)
                    got = {cid: report.constraint_status[cid].satisfied for cid in oracle}
                    assert got == oracle, (edges, cs)
                    checked += 1
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"enumeration took {elapsed:.1f}s"
        assert checked == 11 ** 3 * len(BATTERY_A) + 11 ** 4 * len(BATTERY_B)


# -- 2. heuristic satisfaction on seeded instances ----------------------------

def _random_expert_rules(ds, year, seed):
    rng = random.Random(seed)
    firms = ds.firms(year)
    sectors = list(ds.registry.codes)
    table = ds.io_tables[year]
    lines = []
    for _ in range(3):
        direction = rng.choice(["out", "in"])
        subject, counter = rng.sample(sectors, 2)
        link = "to" if direction == "out" else "from"
        cap = rng.randint(4, 9)
        lines.append(
            f'cap {direction} for firm(sector == "{subject}") {link} '
            f'firm(sector == "{counter}") <= {cap}'
        )
    pairs_with_targets = sorted(table.entries)
    for _ in range(2):
        src_sector, dst_sector = rng.choice(pairs_with_targets)
        src = rng.choice([f for f in firms if f.sector == src_sector])
        dst = rng.choice([f for f in firms if f.sector == dst_sector])
        if src.firm_id == dst.firm_id:
            continue
        amount = max(1, table.entries[(src_sector, dst_sector)] // rng.randint(50, 500))
        lines.append(f"fix {src.firm_id} -> {dst.firm_id} = {amount}")
    return "\n".join(lines)


def test_criterion_heuristic_satisfaction():
    """50 seeded 100-firm instances: >=45 satisfied, statuses honest, <1s each."""
    with criterion("heuristic satisfaction (>=45/50 exact, <1s per instance)"):
        satisfied = 0
        for k in range(50):
            ds = generate_synthetic(SyntheticSpec(
                n_firms=100, n_sectors=5, n_regions=4, years=(2014,), seed=9000 + k))
            year = 2014
            cs = parse_rules(_random_expert_rules(ds, year, seed=77 * k), ds.registry)
            cs = cs.merged_with(ConstraintSet(
                tuple([NonNegativity()] + io_table_to_constraints(ds.io_tables[year]))))
            t0 = time.perf_counter()
            model, report = solve_heuristic(ds.firms(year), cs,
                                            dataset_id=ds.dataset_id, year=year)
            elapsed = time.perf_counter() - t0
            assert elapsed < 1.0, f"instance {k} took {elapsed:.2f}s"
            check = validate(model, ds.firms(year), cs)
            assert (report.status is SolveStatus.SATISFIED) == is_satisfied(check)
            assert report.status is not SolveStatus.INFEASIBLE or report.infeasible_witnesses
            if report.status is SolveStatus.SATISFIED:
                assert check.max_relative_residual == 0.0
                satisfied += 1
        assert satisfied >= 45, f"only {satisfied}/50 satisfied"


# -- 3. gravity formula --------------------------------------------------------

def test_criterion_gravity_hand_oracle():
    with criterion("gravity formula 2x1 hand oracle (exact cents)"):
        firms = [
            make_firm("f1", "C", revenue=1, expenses=1),
            make_firm("f2", "C", revenue=1, expenses=3),
            make_firm("g1", "A", revenue=1, expenses=1),
        ]
        cs = parse_rules("sector_total C -> A = 100 tol 0")
        model, report = solve_heuristic(firms, cs)
        assert {(e.src, e.dst): e.amount_cents for e in model.edges} == {
            ("f1", "g1"): 25, ("f2", "g1"): 75}
        assert report.status is SolveStatus.SATISFIED


# -- 4. paper-scale sanity ------------------------------------------------------

def _expected_assert_count(firms, cs):
    """Analytic assertion count: pairs + sector totals + cap implications +
    per-firm cap cardinalities (no forbids/fixed/bounds in this instance)."""
    n = len(firms)
    pairs = n * (n - 1)
    totals = len(cs.sector_totals)
    capped_edges = set()
    cardinalities = 0
    for cap in cs.degree_caps:
        subjects = [f for f in firms if cap.firm_predicate.matches(f)]
        counters = [f for f in firms if cap.counterparty_predicate.matches(f)]
        counter_ids = {f.firm_id for f in counters}
        for f in subjects:
            edges = 0
            for other in counter_ids:
                if other == f.firm_id:
                    continue
                pair = (f.firm_id, other) if cap.direction == "out" else (other, f.firm_id)
                capped_edges.add(pair)
                edges += 1
            if edges:
                cardinalities += 1
    return pairs + totals + len(capped_edges) + cardinalities


def test_criterion_paper_scale_sanity(fixture_dataset):
    """500 firms: heuristic <30s and satisfied; emission <10s, well-formed,
    assertion count exactly as computed analytically. (The exact-SMT runtime
    reported for this scale is intentionally not reproduced: no solver is
    bundled; the encoding is exported instead.)"""
    with criterion("paper-scale sanity (500 firms: solve <30s, emit <10s, counts exact)"):
        ds = fixture_dataset
        year = ds.years[1]
        rules_text = "\n".join([
            'cap out for firm(sector == "C") to firm(sector == "A") <= 12',
            'cap in for firm(sector == "B") from firm(sector == "D") <= 9',
        ])
        cs = parse_rules(rules_text, ds.registry).merged_with(ConstraintSet(
            tuple([NonNegativity()] + io_table_to_constraints(ds.io_tables[year]))))

        t0 = time.perf_counter()
        model, report = solve_heuristic(ds.firms(year), cs, dataset_id=ds.dataset_id, year=year)
        solve_s = time.perf_counter() - t0
        assert solve_s < 30.0, f"solve took {solve_s:.1f}s"
        assert report.status is SolveStatus.SATISFIED
        assert is_satisfied(validate(model, ds.firms(year), cs))

        t0 = time.perf_counter()
        doc = emit_smtlib(ds.firms(year), cs)
        emit_s = time.perf_counter() - t0
        assert emit_s < 10.0, f"emission took {emit_s:.1f}s"
        stats = check_wellformed(doc)
        assert stats.asserts == _expected_assert_count(ds.firms(year), cs)


# -- 5. SMT round-trip -----------------------------------------------------------

def test_criterion_smt_roundtrip():
    with criterion("SMT round-trip on 10 seeded small instances (exact)"):
        for k in range(10):
            ds = generate_synthetic(SyntheticSpec(
                n_firms=8, n_sectors=3, n_regions=2, years=(2014,), seed=400 + k))
            year = 2014
            cs = ConstraintSet(tuple([NonNegativity()]
                                     + io_table_to_constraints(ds.io_tables[year])))
            firms = ds.firms(year)
            model, report = solve_heuristic(firms, cs, dataset_id=ds.dataset_id, year=year)
            assert report.status is SolveStatus.SATISFIED
            doc = emit_smtlib(firms, cs)
            check_wellformed(doc)
            # stand-in for an external solver: its own exact assignment
            text = render_assignment(model.edge_map(), admissible_pairs(firms, cs))
            parsed = parse_smt_model(text, firms, dataset_id=ds.dataset_id, year=year,
                                     constraint_set_id=cs.set_id)
            assert parsed is not None
            assert parsed.provenance is Provenance.EXTERNAL_SMT
            result = validate(parsed, firms, cs)
            assert is_satisfied(result)


# -- 6. conservation -----------------------------------------------------------

def test_criterion_conservation(fixture_dataset):
    with criterion("conservation at resolutions 0..12 and region/hex equality (exact)"):
        ds = fixture_dataset
        for year in ds.years:
            firms = ds.firms(year)
            located = [f for f in firms if f.has_location]
            cash_total = sum(f.cash_flow_cents for f in located)
            for res in range(R_MAX + 1):
                cash_layer = aggregate_bins(firms, year, res, "cash_flow")
                count_layer = aggregate_bins(firms, year, res, "firm_count")
                assert cash_layer.total() == cash_total
                assert count_layer.total() == len(located)
            for level in (1, 2, 3):
                regions = aggregate_regions(firms, year, level, "cash_flow", False, ds.regions)
                assert sum(r.cash_flow_cents for r in regions) == cash_total
                assert sum(r.firm_count for r in regions) == len(located)


# -- 7. temporal properties ------------------------------------------------------

def test_criterion_temporal_properties(fixture_dataset):
    with criterion("temporal: endpoints bit-exact, naive deltas, planted trends (exact)"):
        ds = fixture_dataset
        y0, y1 = ds.years
        a = aggregate_bins(ds.firms(y0), y0, 6, "cash_flow")
        b = aggregate_bins(ds.firms(y1), y1, 6, "cash_flow")

        at0 = interpolate_keyframes(a, b, 0.0, "cash_flow")
        at1 = interpolate_keyframes(a, b, 1.0, "cash_flow")
        for idx in set(a.bins) | set(b.bins):
            assert at0[idx] == (a.bins[idx].cash_flow_cents if idx in a.bins else 0)
            assert at1[idx] == (b.bins[idx].cash_flow_cents if idx in b.bins else 0)

        delta = temporal_delta(b, a, "cash_flow")
        for idx in set(a.bins) | set(b.bins):
            before = a.bins[idx].cash_flow_cents if idx in a.bins else 0
            now = b.bins[idx].cash_flow_cents if idx in b.bins else 0
            assert delta.deltas[idx] == now - before

        # planted growth/decline per state region, via the aggregation path
        trends = ds.manifest["region_trends"]
        regions_prev = {r.region_code: r for r in
                        aggregate_regions(ds.firms(y0), y0, 2, "cash_flow", False, ds.regions)}
        regions_now = {r.region_code: r for r in
                       aggregate_regions(ds.firms(y1), y1, 2, "cash_flow", False, ds.regions)}
        for state, trend in trends.items():
            change = regions_now[state].cash_flow_cents - regions_prev[state].cash_flow_cents
            assert (change > 0) == (trend == "grow"), (state, trend, change)


# -- 8. flow stats ---------------------------------------------------------------

@pytest.fixture(scope="module")
def fixture_model(fixture_dataset):
    year = fixture_dataset.years[1]
    cs = ConstraintSet(tuple([NonNegativity()]
                             + io_table_to_constraints(fixture_dataset.io_tables[year])))
    model, report = solve_heuristic(fixture_dataset.firms(year), cs,
                                    dataset_id=fixture_dataset.dataset_id, year=year)
    assert report.status is SolveStatus.SATISFIED
    return model


def test_criterion_flow_stats(fixture_dataset, fixture_model):
    with criterion("flow stats on 100 random selections (exact)"):
        from econoforge.flows import flows_for_selection
        ds = fixture_dataset
        year = ds.years[1]
        firms = ds.firms(year)
        rng = random.Random(123)
        located = [f for f in firms if f.has_location]
        resolution = 7
        for _ in range(100):
            anchor = rng.choice(located)
            selection = bin_point(anchor.lat, anchor.lon, resolution)
            arcs, stats = flows_for_selection(fixture_model, firms, selection, resolution)
            out_sum = sum(a.amount_cents for a in arcs if a.direction == "out-of-selection")
            in_sum = sum(a.amount_cents for a in arcs if a.direction == "into-selection")
            assert out_sum == stats.outflow_cents
            assert in_sum == stats.inflow_cents
            assert stats.overall_flow_cents == stats.inflow_cents + stats.outflow_cents
            if stats.overall_flow_cents > 0:
                assert stats.pct_inward + stats.pct_outward == 100.0
            else:
                assert stats.pct_inward == stats.pct_outward == 0.0
            if arcs:
                assert max(a.relative_weight for a in arcs) == 1.0


# -- 9. API determinism ------------------------------------------------------------

def test_criterion_api_determinism(fixture_dataset, tmp_path, capsys):
    with criterion("API determinism and CLI/API byte equality (exact)"):
        from econoforge.cli import main as cli_main
        save_dataset(fixture_dataset, tmp_path)
        app = create_app(tmp_path)
        queries = [
            {"year": fixture_dataset.years[1], "resolution": 6, "metric": "cash_flow",
             "mode": "absolute"},
            {"year": fixture_dataset.years[1], "resolution": 4, "metric": "firm_count",
             "mode": "delta"},
        ]
        with TestClient(app) as client:
            for params in queries:
                url = f"/datasets/{fixture_dataset.dataset_id}/bins"
                first = client.get(url, params=params).content
                second = client.get(url, params=params).content
                assert first == second
                code = cli_main([
                    "bins", "--data-dir", str(tmp_path),
                    "--dataset", fixture_dataset.dataset_id,
                    "--year", str(params["year"]),
                    "--resolution", str(params["resolution"]),
                    "--metric", params["metric"], "--mode", params["mode"],
                ])
                assert code == 0
                cli_bytes = capsys.readouterr().out.encode()
                assert cli_bytes == first
            summary = client.get(f"/datasets/{fixture_dataset.dataset_id}/summary")
            assert summary.content == client.get(
                f"/datasets/{fixture_dataset.dataset_id}/summary").content
