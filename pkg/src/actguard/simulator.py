"""Synthetic recommender platform.

Each item has a latent quality ``q ~ N(0, 1)``, a base score, one formula
term per metric and one Bernoulli label per metric. The label probability
for metric ``i`` is

    sigmoid(intercept_i + term_coef_i * t_i + sum_j cross_coefs_i[j] * t_j
            + quality_coef_i * q)

Labels are drawn once per item, so an item's outcome is a fixed property
and the online process below is exactly the two-arm bandit that the
offline pairwise estimator replays.

Offline logging and online simulation draw pairs with the same routine, so
a shared seed reproduces the same sequence of pairs on both sides.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .domain import Item, PairDataset, RandomPair, WeightVector, canonical_hash
from .errors import ConfigError, EmptyInputError, ParameterError, ShapeError
from .estimator import exact_mean
from .ranking import score_arrays


@dataclass(frozen=True)
class MetricModel:
    """Generative parameters of one secondary metric."""

    name: str
    term_mean: float = 0.0
    term_spread: float = 1.0
    intercept: float = 0.0
    term_coef: float = 1.0
    quality_coef: float = 0.0
    cross_coefs: Mapping[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cross_coefs"] = {str(k): float(v) for k, v in sorted(self.cross_coefs.items())}
        return d


@dataclass(frozen=True)
class SimCorpusConfig:
    item_count: int
    metrics: tuple[MetricModel, ...]
    base_mean: float = 0.0
    base_spread: float = 1.0
    base_quality_coef: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.item_count < 2:
            raise ConfigError(f"item_count must be >= 2, got {self.item_count}")
        if not self.metrics:
            raise ConfigError("at least one metric model is required")
        n = len(self.metrics)
        for m in self.metrics:
            if m.term_spread < 0 or self.base_spread < 0:
                raise ConfigError("spreads must be non-negative")
            for j in m.cross_coefs:
                if not 0 <= int(j) < n:
                    raise ConfigError(f"cross_coefs of {m.name} references metric {j}")

    @property
    def n_metrics(self) -> int:
        return len(self.metrics)

    @property
    def metric_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.metrics)

    def to_dict(self) -> dict:
        return {
            "item_count": self.item_count,
            "metrics": [m.to_dict() for m in self.metrics],
            "base_mean": self.base_mean,
            "base_spread": self.base_spread,
            "base_quality_coef": self.base_quality_coef,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SimCorpusConfig":
        try:
            metrics = []
            for k, m in enumerate(d["metrics"]):
                m = dict(m)
                m.setdefault("name", f"s{k + 1}")
                m["cross_coefs"] = {int(j): float(c) for j, c in dict(m.get("cross_coefs", {})).items()}
                metrics.append(MetricModel(**m))
            rest = {k: v for k, v in d.items() if k != "metrics"}
            return cls(metrics=tuple(metrics), **rest)
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed simulator config: {e!r}") from e

    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


@dataclass(frozen=True)
class Corpus:
    """A pool of candidate items with their fixed labels."""

    items: tuple[Item, ...]
    metric_names: tuple[str, ...]
    config_hash: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_metrics(self) -> int:
        return len(self.metric_names)

    @cached_property
    def base(self) -> np.ndarray:
        a = np.array([it.base_score for it in self.items], dtype=np.float64)
        a.setflags(write=False)
        return a

    @cached_property
    def terms(self) -> np.ndarray:
        a = np.array([it.terms for it in self.items], dtype=np.float64).reshape(len(self.items), self.n_metrics)
        a.setflags(write=False)
        return a

    @cached_property
    def labels(self) -> np.ndarray:
        a = np.array([it.labels for it in self.items], dtype=np.float64).reshape(len(self.items), self.n_metrics)
        a.setflags(write=False)
        return a


@dataclass(frozen=True)
class OnlineOutcome:
    values: tuple[float, ...]
    impressions: int
    seed: int

    def __getitem__(self, i: int) -> float:
        return self.values[i]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def generate_corpus(config: SimCorpusConfig) -> Corpus:
    """Sample a corpus; identical for identical ``config`` (seed included)."""
    rng = np.random.default_rng(config.seed)
    N, n = config.item_count, config.n_metrics
    quality = rng.standard_normal(N)
    base = config.base_mean + config.base_spread * rng.standard_normal(N) + config.base_quality_coef * quality
    means = np.array([m.term_mean for m in config.metrics])
    spreads = np.array([m.term_spread for m in config.metrics])
    terms = means + spreads * rng.standard_normal((N, n))

    logits = np.empty((N, n))
    for i, m in enumerate(config.metrics):
        z = m.intercept + m.term_coef * terms[:, i] + m.quality_coef * quality
        for j, c in m.cross_coefs.items():
            z = z + c * terms[:, int(j)]
        logits[:, i] = z
    probs = _sigmoid(logits)
    labels = (rng.random((N, n)) < probs).astype(np.float64)

    notes = []
    if (
        config.base_spread == 0
        and config.base_quality_coef == 0
        and np.all(spreads == 0)
        and np.all(labels == labels[0])
    ):
        notes.append("degenerate corpus: all items are identical")
        warnings.warn(notes[-1], stacklevel=2)

    width = max(6, len(str(N - 1)))
    items = tuple(
        Item(f"item{j:0{width}d}", base[j], terms[j].tolist(), labels[j].tolist()) for j in range(N)
    )
    return Corpus(items, config.metric_names, config.config_hash(), tuple(notes))


def draw_pair_indices(rng: np.random.Generator, pool_size: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ordered pairs of distinct indices (so A/B roles are random)."""
    a = rng.integers(0, pool_size, size=count)
    b = rng.integers(0, pool_size - 1, size=count)
    b = b + (b >= a)
    return a, b


def log_random_pairs(corpus: Corpus, m: int, seed: int, treatment_id: str = "default") -> PairDataset:
    if len(corpus) < 2:
        raise EmptyInputError("need at least two items to form a pair")
    if m < 1:
        raise ParameterError(f"pair count must be >= 1, got {m}")
    a, b = draw_pair_indices(np.random.default_rng(seed), len(corpus), m)
    items = corpus.items
    width = len(str(m - 1))
    pairs = tuple(
        RandomPair(items[i], items[j], f"{treatment_id}-{k:0{width}d}")
        for k, (i, j) in enumerate(zip(a.tolist(), b.tolist()))
    )
    return PairDataset(pairs, corpus.n_metrics, corpus.metric_names, treatment_id)


def online_winner_labels(corpus: Corpus, w, impressions: int, seed: int) -> np.ndarray:
    """Per-impression labels of the shown winner, shape ``(impressions, n)``."""
    if len(corpus) < 2:
        raise EmptyInputError("need at least two items to form a pair")
    if impressions < 1:
        raise EmptyInputError("impressions must be >= 1")
    w = WeightVector.coerce(w)
    if len(w) != corpus.n_metrics:
        raise ShapeError(f"weights have {len(w)} entries, corpus has {corpus.n_metrics} metrics")
    scores = score_arrays(corpus.base, corpus.terms, w)
    a, b = draw_pair_indices(np.random.default_rng(seed), len(corpus), impressions)
    winner = np.where(scores[a] > scores[b], a, b)
    return corpus.labels[winner]


def simulate_online_metric(corpus: Corpus, w, impressions: int, seed: int) -> OnlineOutcome:
    """Show the winner of ``impressions`` fresh random pairs and average its labels."""
    labels = online_winner_labels(corpus, w, impressions, seed)
    values = tuple(exact_mean(labels[:, i]) for i in range(labels.shape[1]))
    return OnlineOutcome(values, impressions, seed)


def make_decrease_variant(corpus: Corpus, metric_index: int, magnitude: float, seed: int) -> Corpus:
    """Shift base scores against items that score well on one metric.

    Each item's base score moves by ``-magnitude * u * (s_i - mean(s_i))``
    with ``u ~ Uniform(0.5, 1.5)`` drawn per item from ``seed``, so ranking
    by base score alone depresses metric ``metric_index``. Terms and labels
    are untouched.
    """
    if not 0 <= metric_index < corpus.n_metrics:
        raise ParameterError(f"metric_index {metric_index} outside 0..{corpus.n_metrics - 1}")
    if not magnitude > 0:
        raise ParameterError(f"magnitude must be > 0, got {magnitude}")
    rng = np.random.default_rng(seed)
    s = corpus.labels[:, metric_index]
    u = rng.uniform(0.5, 1.5, size=len(corpus))
    shifted = corpus.base - magnitude * u * (s - s.mean())
    items = tuple(
        Item(it.item_id, shifted[j], it.terms, it.labels) for j, it in enumerate(corpus.items)
    )
    tag = canonical_hash({"parent": corpus.config_hash, "metric": metric_index, "magnitude": magnitude, "seed": seed})
    return Corpus(items, corpus.metric_names, tag)


def independent_metrics_config(
    n_metrics: int = 2,
    item_count: int = 2000,
    seed: int = 0,
    term_coef: float | Sequence[float] = 1.5,
    intercept: float | Sequence[float] = -0.5,
) -> SimCorpusConfig:
    """Convenience config whose metrics have independent label processes."""
    coefs = [term_coef] * n_metrics if np.isscalar(term_coef) else list(term_coef)
    icpts = [intercept] * n_metrics if np.isscalar(intercept) else list(intercept)
    metrics = tuple(
        MetricModel(name=f"s{i + 1}", intercept=icpts[i], term_coef=coefs[i]) for i in range(n_metrics)
    )
    return SimCorpusConfig(item_count=item_count, metrics=metrics, seed=seed)
