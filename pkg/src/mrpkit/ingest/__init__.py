from mrpkit.ingest.config import SchemaConfig, age_bin_labels, age_group_of
from mrpkit.ingest.records import ParseResult, impute_missing, parse_records
from mrpkit.ingest.cells import aggregate_to_cells, default_week_origin, filter_geography
from mrpkit.ingest.geo import (
    GeoPredictorTable,
    destandardize,
    link_zip_predictors,
    standardize_predictors,
    validate_crosswalk,
)
from mrpkit.ingest.poststrat_table import build_poststrat_table

__all__ = [
    "SchemaConfig",
    "age_bin_labels",
    "age_group_of",
    "ParseResult",
    "parse_records",
    "impute_missing",
    "aggregate_to_cells",
    "default_week_origin",
    "filter_geography",
    "GeoPredictorTable",
    "link_zip_predictors",
    "standardize_predictors",
    "destandardize",
    "validate_crosswalk",
    "build_poststrat_table",
]
