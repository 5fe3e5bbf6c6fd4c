"""econoforge: firm-to-firm transaction network inference and exploration services."""

from .aggregation import (
    BinMetrics,
    DeltaLayer,
    HexBinLayer,
    RegionInfo,
    RegionMetrics,
    aggregate_bins,
    aggregate_regions,
    interpolate_keyframes,
    temporal_delta,
)
from .core import (
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
from .flows import FlowArc, ModelDiff, SelectionStats, compare_models, flows_for_selection, model_membership
from .hexgrid import R_MAX, HexIndex, bin_center, bin_point, edge_length_m
from .rules import (
    ConstraintSet,
    RuleSyntaxError,
    eval_predicate,
    io_table_to_constraints,
    parse_rules,
    pretty_print,
)
from .smtlib import check_wellformed, emit_smtlib, parse_smt_model
from .solver import SolveReport, SolverParams, SolveStatus, solve_heuristic
from .store import Dataset, ingest_firms, ingest_io_tables, load_dataset, load_model, save_dataset, save_model
from .synthetic import SyntheticSpec, generate_synthetic
from .validator import is_satisfied, validate

__version__ = "0.1.0"
