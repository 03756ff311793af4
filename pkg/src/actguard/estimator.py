"""Offline pairwise estimator over logged random pairs.

For every pair the higher-scored item wins; a tie goes to item B. The
estimate of metric ``i`` is the mean of ``s_i`` over the winners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .domain import PairDataset, RandomPair, WeightVector
from .errors import EmptyInputError, ParameterError, ShapeError
from .ranking import score_arrays, score_item

Winner = Literal["A", "B"]


@dataclass(frozen=True)
class MetricEstimate:
    """Per-metric estimates ``S_hat_i(W)``, optionally with intervals."""

    values: tuple[float, ...]
    pair_count: int
    ci: tuple[tuple[float, float], ...] | None = None
    confidence: float | None = None

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        d = {"values": list(self.values), "pair_count": self.pair_count}
        if self.ci is not None:
            d["ci"] = [list(c) for c in self.ci]
            d["confidence"] = self.confidence
        return d


def pair_winner(pair: RandomPair, w) -> Winner:
    r_a = score_item(pair.item_a, w)
    r_b = score_item(pair.item_b, w)
    return "A" if r_a > r_b else "B"


def exact_mean(column: np.ndarray) -> float:
    """Mean whose value does not depend on element order.

    ``math.fsum`` is correctly rounded, so permuting the input gives a
    bit-identical result. The quotient is clamped into the column's range to
    absorb the final division's rounding.
    """
    m = column.shape[0]
    mean = math.fsum(column.tolist()) / m
    return min(max(mean, float(column.min())), float(column.max()))


def winner_labels(dataset: PairDataset, w) -> np.ndarray:
    """Labels of the winning item of every pair, shape ``(m, n)``."""
    if len(dataset) == 0:
        raise EmptyInputError("cannot estimate on an empty dataset")
    w = WeightVector.coerce(w)
    if len(w) != dataset.n_metrics:
        raise ShapeError(f"weights have {len(w)} entries, dataset has {dataset.n_metrics} metrics")
    arr = dataset.arrays
    a_wins = score_arrays(arr.base_a, arr.terms_a, w) > score_arrays(arr.base_b, arr.terms_b, w)
    return np.where(a_wins[:, None], arr.labels_a, arr.labels_b)


def estimate_metrics(dataset: PairDataset, w) -> MetricEstimate:
    labels = winner_labels(dataset, w)
    values = tuple(exact_mean(labels[:, i]) for i in range(labels.shape[1]))
    return MetricEstimate(values=values, pair_count=labels.shape[0])


def bootstrap_ci(
    samples: np.ndarray,
    confidence: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> tuple[tuple[float, float], ...]:
    """Percentile bootstrap interval of the column means of ``samples``."""
    if not 0.0 < confidence < 1.0:
        raise ParameterError(f"confidence must lie in (0, 1), got {confidence}")
    if resamples < 100:
        raise ParameterError(f"need at least 100 resamples, got {resamples}")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    m = samples.shape[0]
    if m == 0:
        raise EmptyInputError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    means = np.empty((resamples, samples.shape[1]))
    for b in range(resamples):
        counts = np.bincount(rng.integers(0, m, size=m), minlength=m)
        means[b] = counts @ samples / m
    alpha = 1.0 - confidence
    lo = np.quantile(means, alpha / 2, axis=0)
    hi = np.quantile(means, 1 - alpha / 2, axis=0)
    return tuple((float(a), float(b)) for a, b in zip(lo, hi))


def estimate_with_ci(
    dataset: PairDataset,
    w,
    confidence: float = 0.95,
    resamples: int = 1000,
    seed: int = 0,
) -> MetricEstimate:
    """Point estimate plus a seeded percentile-bootstrap interval over pairs.

    The interval is widened, if needed, to contain the point estimate.
    """
    if not 0.0 < confidence < 1.0:
        raise ParameterError(f"confidence must lie in (0, 1), got {confidence}")
    labels = winner_labels(dataset, w)
    point = tuple(exact_mean(labels[:, i]) for i in range(labels.shape[1]))
    raw = bootstrap_ci(labels, confidence, resamples, seed)
    ci = tuple((min(lo, p), max(hi, p)) for (lo, hi), p in zip(raw, point))
    return MetricEstimate(values=point, pair_count=labels.shape[0], ci=ci, confidence=confidence)
