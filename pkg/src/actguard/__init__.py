"""Guardrail-constrained weight selection for multi-objective ranking."""

__version__ = "0.1.0"

from .domain import (
    GridSpec,
    GuardrailConfig,
    Item,
    PairDataset,
    RandomPair,
    WeightVector,
    validate_dataset,
)
from .estimator import MetricEstimate, estimate_metrics, estimate_with_ci, pair_winner
from .ranking import FormulaExport, export_formula, parse_formula, rank_slate, score_item
from .selector import SelectionResult, act_select, grid_points, joint_brute_force, select_group_weights

__all__ = [
    "FormulaExport",
    "GridSpec",
    "GuardrailConfig",
    "Item",
    "MetricEstimate",
    "PairDataset",
    "RandomPair",
    "SelectionResult",
    "WeightVector",
    "act_select",
    "estimate_metrics",
    "estimate_with_ci",
    "export_formula",
    "grid_points",
    "joint_brute_force",
    "pair_winner",
    "parse_formula",
    "rank_slate",
    "score_item",
    "select_group_weights",
    "validate_dataset",
]
