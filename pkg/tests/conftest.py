import pytest

from econoforge.core import FirmRecord
from econoforge.synthetic import SyntheticSpec, generate_synthetic


def make_firm(firm_id, sector, revenue=100, expenses=100, employee=10,
              lat=47.0, lon=15.0, region="AT/1/1", year=2014, name=None):
    return FirmRecord(
        firm_id=firm_id,
        name=name or firm_id,
        lat=lat,
        lon=lon,
        sector=sector,
        region_code=region,
        year=year,
        revenue_cents=revenue,
        expenses_cents=expenses,
        employee_expenses_cents=employee,
        cash_flow_cents=revenue + expenses,
    )


@pytest.fixture(scope="session")
def fixture_dataset():
    """The 500-firm, 8-sector, 2-year synthetic dataset used across suites."""
    return generate_synthetic(SyntheticSpec(n_firms=500, n_sectors=8, n_regions=6,
                                            years=(2013, 2014), seed=7))


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SyntheticSpec(n_firms=40, n_sectors=4, n_regions=3,
                                            years=(2013, 2014), seed=11, dataset_id="small"))
