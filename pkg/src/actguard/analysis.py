"""Validation studies run on the synthetic platform.

* :func:`guardrail_experiment` - the 2x2 {prod, decrease} x {fixed, ACT}
  experiment: does ACT pull a depressed metric back toward baseline?
* :func:`path_independence_check` - does the order in which groups are
  tuned change the selected weights?
* :func:`correlation_study` - do offline pairwise deltas predict simulated
  online deltas across many weight vectors?

Online arms share one simulation seed (common random numbers), so all arms
are scored on the same sequence of impressions and their differences
reflect only changed winners. Likewise the prod and decrease arms log
their offline pairs with one shared seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import GuardrailConfig, PairDataset, WeightVector
from .errors import ParameterError, UndefinedCorrelationError
from .estimator import estimate_metrics
from .selector import act_select
from .simulator import (
    Corpus,
    log_random_pairs,
    make_decrease_variant,
    online_winner_labels,
    simulate_online_metric,
)

logger = logging.getLogger(__name__)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ParameterError(f"inputs must be 1-D with equal lengths, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise ParameterError("need at least two points")
    dx = x - math.fsum(x.tolist()) / x.size
    dy = y - math.fsum(y.tolist()) / y.size
    sxx = math.fsum((dx * dx).tolist())
    syy = math.fsum((dy * dy).tolist())
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    sxy = math.fsum((dx * dy).tolist())
    r = sxy / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent 63-bit child seeds of ``seed``."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(s >> np.uint64(1)) for s in state]


# -- correlation study ------------------------------------------------------


@dataclass(frozen=True)
class CorrelationRow:
    variant_id: str
    weights: tuple[float, ...]
    offline_delta: tuple[float, ...]
    online_delta: tuple[float, ...]


@dataclass(frozen=True)
class CorrelationReport:
    rows: tuple[CorrelationRow, ...]
    metric_index: int
    pearson_r: float
    offline_baseline: tuple[float, ...]
    online_baseline: tuple[float, ...]
    pair_count: int
    impressions: int

    @property
    def sample_count(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        return {
            "metric_index": self.metric_index,
            "pearson_r": self.pearson_r,
            "sample_count": self.sample_count,
            "pair_count": self.pair_count,
            "impressions": self.impressions,
            "offline_baseline": list(self.offline_baseline),
            "online_baseline": list(self.online_baseline),
            "rows": [
                {
                    "variant_id": r.variant_id,
                    "weights": list(r.weights),
                    "offline_delta": list(r.offline_delta),
                    "online_delta": list(r.online_delta),
                }
                for r in self.rows
            ],
        }

    def table(self) -> tuple[list[str], list[list]]:
        """Flat rows for plotting: offline vs online delta of the studied metric."""
        header = ["variant_id", "offline_delta", "online_delta"]
        header += [f"w{i}" for i in range(len(self.rows[0].weights))] if self.rows else []
        body = [
            [r.variant_id, r.offline_delta[self.metric_index], r.online_delta[self.metric_index], *r.weights]
            for r in self.rows
        ]
        return header, body


def default_variants(n_metrics: int, count: int = 30, max_weight: float = 4.0, seed: int = 0) -> list[WeightVector]:
    """Geometric sweep of each single weight followed by random joint vectors.

    Half of ``count`` (split evenly across metrics) goes to the sweeps, the
    rest to vectors drawn uniformly from ``[0, max_weight]^n``.
    """
    per_metric = max(1, (count // 2) // n_metrics)
    out = []
    for i in range(n_metrics):
        for v in np.geomspace(max_weight / 2 ** (per_metric - 1), max_weight, per_metric):
            w = [0.0] * n_metrics
            w[i] = float(v)
            out.append(WeightVector(w))
    rng = np.random.default_rng(seed)
    while len(out) < count:
        out.append(WeightVector(rng.uniform(0.0, max_weight, size=n_metrics).tolist()))
    return out[:count] if len(out) > count else out


def correlation_study(
    corpus: Corpus,
    variants: Sequence,
    pair_count: int,
    impressions: int,
    seeds: tuple[int, int] = (0, 1),
    metric_index: int = 0,
) -> CorrelationReport:
    """Offline vs online deltas (against ``W = 0``) for each weight variant.

    ``seeds`` is ``(offline_seed, online_seed)``. The offline side is one
    logged dataset shared by every variant; the online side is a fresh
    simulation under ``online_seed``. Deltas are absolute differences.
    """
    variants = [WeightVector.coerce(v) for v in variants]
    if len(variants) < 2:
        raise ParameterError(f"need at least 2 variants, got {len(variants)}")
    if len(variants) < 10:
        logger.warning("only %d variants; the correlation coefficient is not meaningful", len(variants))
    if not 0 <= metric_index < corpus.n_metrics:
        raise ParameterError(f"metric_index {metric_index} outside 0..{corpus.n_metrics - 1}")
    offline_seed, online_seed = seeds
    dataset = log_random_pairs(corpus, pair_count, offline_seed)
    zero = WeightVector.zeros(corpus.n_metrics)
    off0 = estimate_metrics(dataset, zero).values
    on0 = simulate_online_metric(corpus, zero, impressions, online_seed).values
    rows = []
    for k, w in enumerate(variants):
        off = estimate_metrics(dataset, w).values
        on = simulate_online_metric(corpus, w, impressions, online_seed).values
        rows.append(
            CorrelationRow(
                variant_id=f"v{k:03d}",
                weights=w.weights,
                offline_delta=tuple(a - b for a, b in zip(off, off0)),
                online_delta=tuple(a - b for a, b in zip(on, on0)),
            )
        )
    r = pearson([row.offline_delta[metric_index] for row in rows], [row.online_delta[metric_index] for row in rows])
    return CorrelationReport(tuple(rows), metric_index, r, off0, on0, pair_count, impressions)


# -- path independence ------------------------------------------------------


@dataclass(frozen=True)
class PathIndependenceReport:
    orderings: tuple[tuple[tuple[int, ...], ...], ...]
    weights: tuple[WeightVector, ...]
    identical: bool
    identical_by_metric: tuple[bool, ...]

    def to_dict(self) -> dict:
        return {
            "orderings": [[list(g) for g in o] for o in self.orderings],
            "weights": [list(w.weights) for w in self.weights],
            "identical": self.identical,
            "identical_by_metric": list(self.identical_by_metric),
        }


def _same_bits(a: float, b: float) -> bool:
    return a.hex() == b.hex()


def path_independence_check(
    dataset: PairDataset,
    config: GuardrailConfig,
    group_orderings: Sequence[Sequence[Sequence[int]]],
) -> PathIndependenceReport:
    """Run :func:`act_select` once per group ordering and compare the weights bit for bit."""
    if len(group_orderings) < 2:
        raise ParameterError("need at least two orderings")
    reference = sorted(tuple(sorted(g)) for g in config.partition)
    orderings = []
    for o in group_orderings:
        o = tuple(tuple(int(i) for i in g) for g in o)
        if sorted(tuple(sorted(g)) for g in o) != reference:
            raise ParameterError(f"ordering {o} is not a permutation of the partition {config.partition}")
        orderings.append(o)
    results = [act_select(dataset, config.with_partition(o)).weights for o in orderings]
    n = config.n_metrics
    by_metric = tuple(all(_same_bits(w[i], results[0][i]) for w in results) for i in range(n))
    return PathIndependenceReport(tuple(orderings), tuple(results), all(by_metric), by_metric)


# -- guardrail experiment ---------------------------------------------------


@dataclass(frozen=True)
class DecreaseSpec:
    metric_index: int
    magnitude: float
    seed: int = 0


@dataclass(frozen=True)
class ExperimentSimConfig:
    """Sample sizes and seeds for :func:`guardrail_experiment`.

    With ``guardrails_from_baseline`` the thresholds of every grouped metric
    are replaced by the offline estimate of the prod/fixed arm, i.e. the
    guardrail is "no worse than production". ``baseline_slack`` relaxes
    metric ``i`` to ``(1 - slack[i])`` times that estimate; an empty tuple
    means no slack anywhere.
    """

    pair_count: int = 20_000
    impressions: int = 50_000
    seed: int = 0
    confidence: float = 0.95
    resamples: int = 500
    guardrails_from_baseline: bool = True
    baseline_slack: tuple[float, ...] = ()


@dataclass(frozen=True)
class ArmResult:
    variant: str
    method: str
    weights: tuple[float, ...]
    feasible: bool
    offline: tuple[float, ...]
    online: tuple[float, ...]
    delta: tuple[float, ...]
    delta_ci: tuple[tuple[float, float], ...]

    @property
    def arm_id(self) -> str:
        return f"{self.variant}/{self.method}"


@dataclass(frozen=True)
class GuardrailExperimentReport:
    """Relative online deltas of every arm against the prod/fixed arm.

    ``guardrail_delta[i]`` is the threshold expressed on the same relative
    scale: ``threshold_i / online_prod_fixed_i - 1``.
    """

    rows: tuple[ArmResult, ...]
    thresholds: tuple[float, ...]
    guardrail_delta: tuple[float, ...]
    confidence: float
    pair_count: int
    impressions: int
    notes: tuple[str, ...] = field(default=())

    def arm(self, variant: str, method: str) -> ArmResult:
        for r in self.rows:
            if r.variant == variant and r.method == method:
                return r
        raise KeyError(f"{variant}/{method}")

    def ci_half_width(self, variant: str, method: str, metric: int) -> float:
        lo, hi = self.arm(variant, method).delta_ci[metric]
        return (hi - lo) / 2

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "guardrail_delta": list(self.guardrail_delta),
            "confidence": self.confidence,
            "pair_count": self.pair_count,
            "impressions": self.impressions,
            "notes": list(self.notes),
            "arms": [
                {
                    "variant": r.variant,
                    "method": r.method,
                    "weights": list(r.weights),
                    "feasible": r.feasible,
                    "offline": list(r.offline),
                    "online": list(r.online),
                    "delta": list(r.delta),
                    "delta_ci": [list(c) for c in r.delta_ci],
                }
                for r in self.rows
            ],
        }

    def table(self) -> tuple[list[str], list[list]]:
        n = len(self.thresholds)
        header = ["variant", "method", "feasible"]
        for i in range(n):
            header += [f"w{i}", f"delta{i}", f"delta{i}_lo", f"delta{i}_hi"]
        body = []
        for r in self.rows:
            row = [r.variant, r.method, r.feasible]
            for i in range(n):
                row += [r.weights[i], r.delta[i], *r.delta_ci[i]]
            body.append(row)
        return header, body


def _relative_delta_ci(arm_labels, base_labels, confidence, resamples, seed):
    """Paired percentile bootstrap of ``mean(arm) / mean(base) - 1`` per metric.

    ``arm_labels`` is a list of ``(m, n)`` arrays; every resample reuses one
    set of impression indices for all arms and the baseline.
    """
    m, n = base_labels.shape
    stacked = np.hstack([base_labels, *arm_labels])
    rng = np.random.default_rng(seed)
    means = np.empty((resamples, stacked.shape[1]))
    for b in range(resamples):
        counts = np.bincount(rng.integers(0, m, size=m), minlength=m)
        means[b] = counts @ stacked / m
    base = means[:, :n]
    alpha = 1.0 - confidence
    out = []
    for k in range(len(arm_labels)):
        with np.errstate(divide="ignore", invalid="ignore"):
            stats = means[:, n * (k + 1) : n * (k + 2)] / base - 1.0
        lo = np.quantile(stats, alpha / 2, axis=0)
        hi = np.quantile(stats, 1 - alpha / 2, axis=0)
        out.append(tuple((float(a), float(c)) for a, c in zip(lo, hi)))
    return out


def guardrail_experiment(
    corpus: Corpus,
    decrease: DecreaseSpec,
    fixed_weight,
    act_config: GuardrailConfig,
    sim: ExperimentSimConfig = ExperimentSimConfig(),
) -> GuardrailExperimentReport:
    """Reproduce the fixed-weight vs ACT comparison on prod and decrease corpora."""
    fixed_weight = WeightVector.coerce(fixed_weight)
    n = corpus.n_metrics
    if len(fixed_weight) != n or act_config.n_metrics != n:
        raise ParameterError("fixed weights and guardrail config must match the corpus metric count")
    pair_seed, online_seed, boot_seed = derive_seeds(sim.seed, 3)
    variants = {"prod": corpus, "decrease": make_decrease_variant(corpus, decrease.metric_index, decrease.magnitude, decrease.seed)}
    logs = {k: log_random_pairs(c, sim.pair_count, pair_seed, treatment_id=k) for k, c in variants.items()}

    config = act_config
    if sim.guardrails_from_baseline:
        prod_fixed = estimate_metrics(logs["prod"], fixed_weight).values
        slack = tuple(sim.baseline_slack) or (0.0,) * n
        if len(slack) != n:
            raise ParameterError(f"baseline_slack needs {n} entries, got {len(slack)}")
        grouped = set(config.grouped_indices)
        config = config.with_thresholds(
            [prod_fixed[i] * (1.0 - slack[i]) if i in grouped else t for i, t in enumerate(config.thresholds)]
        )

    notes = []
    arms = []
    for variant, c in variants.items():
        arms.append((variant, "fixed", fixed_weight, True))
        sel = act_select(logs[variant], config)
        if not sel.feasible:
            notes.append(f"{variant}/act infeasible: groups {sel.infeasible_groups}, violations {sel.violations}")
        arms.append((variant, "act", sel.weights, sel.feasible))

    online = {
        (v, meth): online_winner_labels(variants[v], w, sim.impressions, online_seed) for v, meth, w, _ in arms
    }
    base_labels = online[("prod", "fixed")]
    base_mean = base_labels.mean(axis=0)

    cis = _relative_delta_ci([online[(v, meth)] for v, meth, _, _ in arms], base_labels, sim.confidence, sim.resamples, boot_seed)
    rows = []
    for (v, meth, w, feasible), ci in zip(arms, cis):
        labels = online[(v, meth)]
        mean = labels.mean(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = mean / base_mean - 1.0
        rows.append(
            ArmResult(
                variant=v,
                method=meth,
                weights=w.weights,
                feasible=feasible,
                offline=estimate_metrics(logs[v], w).values,
                online=tuple(float(x) for x in mean),
                delta=tuple(float(x) for x in delta),
                delta_ci=ci,
            )
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        guard = tuple(float(t / b - 1.0) for t, b in zip(config.thresholds, base_mean))
    return GuardrailExperimentReport(
        rows=tuple(rows),
        thresholds=config.thresholds,
        guardrail_delta=guard,
        confidence=sim.confidence,
        pair_count=sim.pair_count,
        impressions=sim.impressions,
        notes=tuple(notes),
    )
