"""File ingestion, option filtering, configuration and report orchestration."""

from .config import Config, load_config, parse_config
from .filtering import FilterAudit, FilterPolicy, FilterResult, OptionRow, filter_options, read_option_csv
from .ingest import IngestAudit, SchemaError, TickIngest, ingest_ticks, load_ticks, split_sessions
from .pipeline import COMMANDS, ReportBundle, run_pipeline

__all__ = [
    "Config",
    "load_config",
    "parse_config",
    "FilterAudit",
    "FilterPolicy",
    "FilterResult",
    "OptionRow",
    "filter_options",
    "read_option_csv",
    "IngestAudit",
    "SchemaError",
    "TickIngest",
    "ingest_ticks",
    "load_ticks",
    "split_sessions",
    "COMMANDS",
    "ReportBundle",
    "run_pipeline",
]
