"""
Flow maps, selection statistics and model comparison
====================================================

Clicking a hexagon asks: where does this cluster's money go, and where does
it come from? Edges incident to the selected bin are aggregated into
bin-to-bin arcs (never drawn per firm, to keep occlusion and payloads
bounded); the details panel gets exact integer sums and percentages.
"""

from econoforge.flows import compare_models, flows_for_selection, model_membership
from econoforge.hexgrid import bin_point
from econoforge.rules import ConstraintSet, NonNegativity, io_table_to_constraints, parse_rules
from econoforge.solver import solve_heuristic
from econoforge.synthetic import SyntheticSpec, generate_synthetic

ds = generate_synthetic(SyntheticSpec(n_firms=150, n_sectors=5, n_regions=4,
                                      years=(2014,), seed=13))
firms = ds.firms(2014)
cs = ConstraintSet(tuple([NonNegativity()] + io_table_to_constraints(ds.io_tables[2014])))
model, _ = solve_heuristic(firms, cs, dataset_id=ds.dataset_id, year=2014)

# Select the bin of the first firm at resolution 6.
anchor = firms[0]
selection = bin_point(anchor.lat, anchor.lon, 6)
arcs, stats = flows_for_selection(model, firms, selection)

print(f"selection ({selection.q}, {selection.r}) at resolution 6: {len(arcs)} arcs")
print(f"  inflow  {stats.inflow_cents / 100:14,.2f} EUR ({stats.pct_inward:.1f}%)")
print(f"  outflow {stats.outflow_cents / 100:14,.2f} EUR ({stats.pct_outward:.1f}%)")
print(f"  overall {stats.overall_flow_cents / 100:14,.2f} EUR")

# relative_weight drives color saturation; the heaviest arc is exactly 1.0.
heaviest = max(arcs, key=lambda a: a.relative_weight)
print(f"heaviest arc: ({heaviest.from_bin.q},{heaviest.from_bin.r}) -> "
      f"({heaviest.to_bin.q},{heaviest.to_bin.r}), "
      f"{heaviest.amount_cents / 100:,.2f} EUR, weight {heaviest.relative_weight}")

# A model need not span every firm; hiding unrepresented firms uses this set.
members = model_membership(model, firms)
print(f"\n{len(members)} of {len(firms)} firms are represented in the model")

# Comparing models (T4): solve again with an extra restriction and diff.
restricted_rules = parse_rules(
    f'forbid from firm(sector == "{firms[0].sector}") to firm(sector == "{firms[1].sector}")',
    ds.registry)
cs2 = restricted_rules.merged_with(cs)
model2, _ = solve_heuristic(firms, cs2, dataset_id=ds.dataset_id, year=2014)
diff = compare_models(model, model2, firms)
print(f"\ndiff vs restricted model: +{len(diff.additions)} edges, "
      f"-{len(diff.removals)} edges, {len(diff.amount_deltas)} amount changes")
for (s, t), change in sorted(diff.sector_pair_deltas.items())[:4]:
    print(f"  {s} -> {t}: {change / 100:+,.2f} EUR")
