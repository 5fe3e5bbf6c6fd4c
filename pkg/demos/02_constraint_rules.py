"""
Writing constraint rules
========================

Domain knowledge enters the workbench as plain-text rules (one per line).
Three layers mirror how analysts actually build models: universal bounds are
implicit, macro flows come from IO tables, and expert knowledge is added
incrementally on top.
"""

from econoforge.rules import io_table_to_constraints, parse_rules, pretty_print
from econoforge.synthetic import SyntheticSpec, generate_synthetic

# A sector-to-sector flow that is publicly known: say manufacturing firms paid
# agriculture 32 billion EUR in 2014. Amounts are integer cents.
source = """
# macro ground truth
sector_total C -> A = 3200000000000 tol 0

# expert knowledge: small firms in one state trade with at most 10 firms elsewhere
cap out for firm(region == "AT/1/1" and employee_expenses < 10000000) to firm(region == "AT/2/1") <= 10

# a transaction whose value is known exactly
fix F0001 -> F0002 = 125000 as "reported-invoice"
"""

cs = parse_rules(source)
print(f"parsed {len(cs.constraints)} constraints (set id {cs.set_id}):")
for c in cs.constraints:
    print(f"  {c.id:28s} {c.kind}")

# Rules have stable, content-derived ids: printing and re-parsing is lossless.
assert parse_rules(pretty_print(cs)) == cs
print("\ncanonical form:")
print(pretty_print(cs))

# The whole IO table of a dataset becomes one sector_total per entry.
ds = generate_synthetic(SyntheticSpec(n_firms=60, n_sectors=4, n_regions=2,
                                      years=(2014,), seed=5))
totals = io_table_to_constraints(ds.io_tables[2014])
print(f"IO table for {ds.dataset_id} expands to {len(totals)} sector_total rules, e.g.")
print(f"  {totals[0].from_sector} -> {totals[0].to_sector} = {totals[0].amount_cents}")

# Concatenating rule files is a union: ids are disjoint unless rules repeat.
extra = parse_rules('forbid from firm(sector == "A") to firm(sector == "A")')
merged = cs.merged_with(extra)
print(f"\nafter merging an extra rule: {len(merged.constraints)} constraints")
