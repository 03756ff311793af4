"""Minimum-norm weight selection under guardrails.

:func:`act_select` is the grouped (block coordinate) grid search: starting
from ``W = 0`` it visits the groups of the partition in order, grid-searches
each group's weights jointly while the other weights stay fixed, keeps the
candidates whose group metrics all clear their thresholds and writes back
the valid candidate of smallest L2 norm. :func:`joint_brute_force`
enumerates the full product grid over every grouped weight and serves as
the reference the grouped search is tested against.

Among equal-norm valid candidates the lexicographically smallest sub-vector
wins, which makes every result independent of evaluation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

from .domain import GuardrailConfig, PairDataset, WeightVector, grid_product, squared_norm
from .errors import ConfigError, GridTooLargeError, InfeasibleError, ShapeError
from .estimator import MetricEstimate, estimate_metrics, exact_mean, winner_labels

logger = logging.getLogger(__name__)

DEFAULT_JOINT_CAP = 10**6


@dataclass(frozen=True)
class GroupSelection:
    """Diagnostics for one group visit.

    ``candidates`` and ``valid`` are sub-vectors aligned with ``group``
    (indices in ascending order); ``chosen`` is ``None`` when no candidate
    was valid.
    """

    group: tuple[int, ...]
    candidates: tuple[tuple[float, ...], ...]
    valid: tuple[tuple[float, ...], ...]
    chosen: tuple[float, ...] | None
    best_margins: dict[int, float] = field(default_factory=dict)
    pass_index: int = 0

    @property
    def feasible(self) -> bool:
        return self.chosen is not None

    def to_dict(self) -> dict:
        return {
            "group": list(self.group),
            "pass": self.pass_index,
            "grid_size": len(self.candidates),
            "valid_count": len(self.valid),
            "chosen": None if self.chosen is None else list(self.chosen),
            "best_margins": {str(k): v for k, v in self.best_margins.items()},
        }


@dataclass(frozen=True)
class SelectionResult:
    weights: WeightVector
    per_group: tuple[GroupSelection, ...]
    achieved: MetricEstimate
    feasible: bool
    infeasible_groups: tuple[tuple[int, ...], ...] = ()
    violations: tuple[int, ...] = ()

    def raise_if_infeasible(self) -> "SelectionResult":
        if self.feasible:
            return self
        if self.infeasible_groups:
            g = next(s for s in self.per_group if s.group == self.infeasible_groups[0] and not s.feasible)
            raise InfeasibleError(g.group, g.best_margins)
        raise InfeasibleError(self.violations, {})

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights.weights),
            "feasible": self.feasible,
            "achieved": self.achieved.to_dict(),
            "infeasible_groups": [list(g) for g in self.infeasible_groups],
            "violations": list(self.violations),
            "per_group": [g.to_dict() for g in self.per_group],
        }


def grid_points(config: GuardrailConfig, group: Sequence[int]) -> list[tuple[float, ...]]:
    """Candidate sub-vectors for ``group``, indices taken in ascending order."""
    indices = sorted(group)
    missing = [i for i in indices if i not in config.grids]
    if missing:
        raise ConfigError(f"no grid spec for metric(s) {missing}")
    return list(grid_product(config, indices))


def _check_dims(dataset: PairDataset, config: GuardrailConfig):
    if dataset.n_metrics != config.n_metrics:
        raise ShapeError(f"config has {config.n_metrics} thresholds, dataset has {dataset.n_metrics} metrics")


def _search(dataset, base_w: WeightVector, indices, config, candidates):
    """Evaluate candidates for ``indices``; returns (valid, best_margins)."""
    thresholds = config.thresholds
    valid = []
    best_worst, best_margins = None, {}
    for cand in candidates:
        labels = winner_labels(dataset, base_w.with_values(indices, cand))
        values = {i: exact_mean(labels[:, i]) for i in indices}
        margins = {i: values[i] - thresholds[i] for i in indices}
        worst = min(margins.values())
        if all(values[i] >= thresholds[i] for i in indices):
            valid.append(cand)
        elif not valid and (best_worst is None or worst > best_worst):
            best_worst, best_margins = worst, margins
    return valid, best_margins


def _argmin_norm(valid):
    return min(valid, key=lambda v: (squared_norm(v), v))


def select_group_weights(
    dataset: PairDataset,
    current_w,
    group: Sequence[int],
    config: GuardrailConfig,
    pass_index: int = 0,
) -> GroupSelection:
    """Grid-search one group with every other weight held at ``current_w``.

    Raises:
        InfeasibleError: no candidate satisfies all of the group's guardrails.
    """
    _check_dims(dataset, config)
    current_w = WeightVector.coerce(current_w)
    indices = tuple(sorted(group))
    candidates = grid_points(config, indices)
    valid, best_margins = _search(dataset, current_w, indices, config, candidates)
    if not valid:
        raise InfeasibleError(indices, best_margins)
    return GroupSelection(
        group=indices,
        candidates=tuple(candidates),
        valid=tuple(valid),
        chosen=_argmin_norm(valid),
        pass_index=pass_index,
    )


def _finish(dataset, config, w, per_group, infeasible) -> SelectionResult:
    achieved = estimate_metrics(dataset, w)
    violations = tuple(i for i in config.grouped_indices if achieved.values[i] < config.thresholds[i])
    if violations and not infeasible:
        logger.info("guardrails re-violated by later groups: %s", violations)
    return SelectionResult(
        weights=w,
        per_group=tuple(per_group),
        achieved=achieved,
        feasible=not infeasible and not violations,
        infeasible_groups=tuple(infeasible),
        violations=violations,
    )


def act_select(dataset: PairDataset, config: GuardrailConfig) -> SelectionResult:
    """Grouped grid search for the minimum-norm guardrail-satisfying weights.

    An infeasible group keeps zero weights and is listed in
    ``infeasible_groups``; later groups still run so the diagnostics are
    complete. ``feasible`` additionally requires every grouped guardrail to
    hold at the final weights.
    """
    _check_dims(dataset, config)
    w = WeightVector.zeros(config.n_metrics)
    per_group: list[GroupSelection] = []
    infeasible: list[tuple[int, ...]] = []
    for p in range(config.passes):
        infeasible.clear()
        for group in config.partition:
            try:
                sel = select_group_weights(dataset, w, group, config, pass_index=p)
            except InfeasibleError as e:
                logger.warning("%s", e)
                indices = tuple(sorted(group))
                w = w.with_values(indices, [0.0] * len(indices))
                per_group.append(
                    GroupSelection(indices, tuple(grid_points(config, indices)), (), None, e.best_margins, p)
                )
                infeasible.append(indices)
                continue
            w = w.with_values(sel.group, sel.chosen)
            per_group.append(sel)
    return _finish(dataset, config, w, per_group, infeasible)


def joint_brute_force(
    dataset: PairDataset,
    config: GuardrailConfig,
    cap: int = DEFAULT_JOINT_CAP,
) -> SelectionResult:
    """Exhaustive search over the product grid of all grouped weights.

    Raises:
        GridTooLargeError: the product grid has more than ``cap`` points.
        InfeasibleError: no point of the product grid satisfies every
            grouped guardrail.
    """
    _check_dims(dataset, config)
    indices = config.grouped_indices
    size = config.joint_grid_size(indices)
    if size > cap:
        raise GridTooLargeError(size, cap)
    zero = WeightVector.zeros(config.n_metrics)
    candidates, valid = [], []
    best, best_margins = None, {}
    for cand in grid_product(config, indices):
        candidates.append(cand)
        est = estimate_metrics(dataset, zero.with_values(indices, cand)).values
        margins = {i: est[i] - config.thresholds[i] for i in indices}
        if all(est[i] >= config.thresholds[i] for i in indices):
            valid.append(cand)
        elif best is None or min(margins.values()) > best:
            best, best_margins = min(margins.values()), margins
    if not valid:
        raise InfeasibleError(indices, best_margins)
    chosen = valid[0]
    for cand in valid[1:]:
        if (squared_norm(cand), cand) < (squared_norm(chosen), chosen):
            chosen = cand
    sel = GroupSelection(indices, tuple(candidates), tuple(valid), chosen)
    return _finish(dataset, config, zero.with_values(indices, chosen), [sel], [])
