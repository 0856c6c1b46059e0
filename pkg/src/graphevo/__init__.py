"""Evolutionary seed selection on graphs with checked, repairable operator backends."""

from .engine import RunConfig, RunReport, run
from .errors import (
    ComparisonError,
    ConfigError,
    ContractError,
    GraphEvoError,
    InstanceError,
    ParseError,
    TransportError,
)
from .evo import fitness, rank_and_filter_candidates
from .graph import Graph, Partition, from_edges, load_edge_list
from .repair import Outcome, RepairBudget, check_and_repair
from .validation import Phase, Thresholds, checklist_for

__version__ = "0.1.0"

__all__ = [
    "ComparisonError",
    "ConfigError",
    "ContractError",
    "Graph",
    "GraphEvoError",
    "InstanceError",
    "Outcome",
    "ParseError",
    "Partition",
    "Phase",
    "RepairBudget",
    "RunConfig",
    "RunReport",
    "Thresholds",
    "TransportError",
    "check_and_repair",
    "checklist_for",
    "fitness",
    "from_edges",
    "load_edge_list",
    "rank_and_filter_candidates",
    "run",
]
