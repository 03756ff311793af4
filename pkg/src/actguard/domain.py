"""Core data types: items, logged random pairs, weights and guardrail configs.

All types are frozen; vectors are stored as tuples of floats and every
vector is aligned to the dataset's ``metric_names`` order. Metric indices
are 0-based throughout the package.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, EmptyInputError, ShapeError

# Relative slack (in units of ``step``) used when snapping grid values onto 0
# and onto the declared maximum.
GRID_SNAP_TOL = 1e-9


def _float_tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def canonical_hash(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Item:
    """A ranked candidate.

    Attributes:
        item_id: opaque identifier.
        base_score: score from the primary objective alone.
        terms: per-metric ranking-formula terms.
        labels: per-metric item-level outcomes in [0, 1].
    """

    item_id: str
    base_score: float
    terms: tuple[float, ...]
    labels: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "item_id", str(self.item_id))
        object.__setattr__(self, "base_score", float(self.base_score))
        object.__setattr__(self, "terms", _float_tuple(self.terms))
        object.__setattr__(self, "labels", _float_tuple(self.labels))


@dataclass(frozen=True)
class RandomPair:
    """One logged trial: two candidates drawn uniformly from the pool."""

    item_a: Item
    item_b: Item
    pair_id: str

    def __post_init__(self):
        object.__setattr__(self, "pair_id", str(self.pair_id))


class PairArrays(NamedTuple):
    base_a: np.ndarray
    base_b: np.ndarray
    terms_a: np.ndarray
    terms_b: np.ndarray
    labels_a: np.ndarray
    labels_b: np.ndarray


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PairDataset:
    """The ``m`` annotated random pairs logged for one treatment."""

    pairs: tuple[RandomPair, ...]
    n_metrics: int
    metric_names: tuple[str, ...]
    treatment_id: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "n_metrics", int(self.n_metrics))
        object.__setattr__(self, "metric_names", tuple(str(n) for n in self.metric_names))
        object.__setattr__(self, "treatment_id", str(self.treatment_id))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[RandomPair]:
        return iter(self.pairs)

    @cached_property
    def arrays(self) -> PairArrays:
        """Column view of the pairs, built once and shared by every estimate."""
        if not self.pairs:
            raise EmptyInputError("dataset has no pairs")
        n = self.n_metrics

        def col(attr, side):
            rows = [getattr(getattr(p, side), attr) for p in self.pairs]
            arr = np.array(rows, dtype=np.float64)
            if arr.shape != (len(self.pairs), n):
                raise ShapeError(f"{side}.{attr} does not have {n} entries on every pair")
            return _readonly(arr)

        base_a = np.fromiter((p.item_a.base_score for p in self.pairs), dtype=np.float64)
        base_b = np.fromiter((p.item_b.base_score for p in self.pairs), dtype=np.float64)
        return PairArrays(
            _readonly(base_a),
            _readonly(base_b),
            col("terms", "item_a"),
            col("terms", "item_b"),
            col("labels", "item_a"),
            col("labels", "item_b"),
        )


@dataclass(frozen=True)
class WeightVector:
    """Hyperparameters ``(w_1, ..., w_n)``, one per secondary metric."""

    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", _float_tuple(self.weights))

    @classmethod
    def zeros(cls, n: int) -> "WeightVector":
        return cls((0.0,) * n)

    @classmethod
    def coerce(cls, w) -> "WeightVector":
        return w if isinstance(w, WeightVector) else cls(tuple(w))

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self) -> Iterator[float]:
        return iter(self.weights)

    def __getitem__(self, i):
        return self.weights[i]

    def with_values(self, indices: Sequence[int], values: Sequence[float]) -> "WeightVector":
        w = list(self.weights)
        for i, v in zip(indices, values):
            w[i] = float(v)
        return WeightVector(tuple(w))

    def norm2(self) -> float:
        return squared_norm(self.weights)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.weights)


def squared_norm(values: Iterable[float]) -> float:
    """Exactly rounded sum of squares (independent of summation order)."""
    return math.fsum(v * v for v in values)


@dataclass(frozen=True)
class GridSpec:
    """Arithmetic sequence ``min, min + step, ...`` not exceeding ``max``."""

    min: float
    max: float
    step: float

    def __post_init__(self):
        for name in ("min", "max", "step"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigError(f"grid {name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.step <= 0:
            raise ConfigError(f"grid step must be > 0, got {self.step}")
        if self.min > self.max:
            raise ConfigError(f"grid min {self.min} exceeds max {self.max}")

    def values(self) -> tuple[float, ...]:
        """Grid values generated as ``min + j * step``.

        A value within ``GRID_SNAP_TOL * step`` of zero is emitted as exactly
        0.0, and a last value within the same slack of ``max`` is emitted as
        ``max``, so both the origin and the declared endpoint are hit exactly.
        """
        tol = GRID_SNAP_TOL * self.step
        count = int(math.floor((self.max - self.min) / self.step + GRID_SNAP_TOL)) + 1
        out = []
        for j in range(count):
            v = self.min + j * self.step
            if abs(v) <= tol:
                v = 0.0
            elif j == count - 1 and abs(v - self.max) <= tol:
                v = self.max
            out.append(v)
        return tuple(out)

    def contains_zero(self) -> bool:
        return 0.0 in self.values()

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "step": self.step}


@dataclass(frozen=True)
class GuardrailConfig:
    """Thresholds, objective partition and per-weight candidate grids.

    Indices not covered by ``partition`` keep weight 0 and their thresholds
    are not enforced. ``passes`` > 1 re-runs the group loop starting from
    the previous pass's weights (experimental; the default single pass is
    the algorithm as published).
    """

    thresholds: tuple[float, ...]
    partition: tuple[tuple[int, ...], ...]
    grids: Mapping[int, GridSpec]
    passes: int = 1
    metric_names: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "thresholds", _float_tuple(self.thresholds))
        object.__setattr__(self, "partition", tuple(tuple(int(i) for i in g) for g in self.partition))
        grids = {}
        for k, g in dict(self.grids).items():
            grids[int(k)] = g if isinstance(g, GridSpec) else GridSpec(**g)
        object.__setattr__(self, "grids", dict(sorted(grids.items())))
        if self.metric_names is not None:
            object.__setattr__(self, "metric_names", tuple(self.metric_names))
        self._check()

    def _check(self):
        n = len(self.thresholds)
        if n == 0:
            raise ConfigError("thresholds must not be empty")
        if not all(math.isfinite(t) for t in self.thresholds):
            raise ConfigError("thresholds must be finite")
        if self.metric_names is not None and len(self.metric_names) != n:
            raise ConfigError(f"{len(self.metric_names)} metric names for {n} thresholds")
        if not isinstance(self.passes, int) or self.passes < 1:
            raise ConfigError(f"passes must be a positive integer, got {self.passes!r}")
        seen: set[int] = set()
        for g in self.partition:
            if not g:
                raise ConfigError("partition contains an empty group")
            for i in g:
                if not 0 <= i < n:
                    raise ConfigError(f"group index {i} outside 0..{n - 1}")
                if i in seen:
                    raise ConfigError(f"metric {i} appears in more than one group")
                seen.add(i)
                if i not in self.grids:
                    raise ConfigError(f"metric {i} is grouped but has no grid spec")
        for i, g in self.grids.items():
            if not 0 <= i < n:
                raise ConfigError(f"grid index {i} outside 0..{n - 1}")
            if not g.contains_zero():
                raise ConfigError(f"grid for metric {i} does not contain 0")

    @property
    def n_metrics(self) -> int:
        return len(self.thresholds)

    @property
    def grouped_indices(self) -> tuple[int, ...]:
        return tuple(sorted(i for g in self.partition for i in g))

    def with_partition(self, partition) -> "GuardrailConfig":
        return GuardrailConfig(self.thresholds, partition, self.grids, self.passes, self.metric_names)

    def with_thresholds(self, thresholds) -> "GuardrailConfig":
        return GuardrailConfig(thresholds, self.partition, self.grids, self.passes, self.metric_names)

    def joint_grid_size(self, indices: Iterable[int] | None = None) -> int:
        indices = self.grouped_indices if indices is None else indices
        return math.prod(len(self.grids[i].values()) for i in indices)

    def to_dict(self) -> dict:
        d = {
            "thresholds": list(self.thresholds),
            "partition": [list(g) for g in self.partition],
            "grids": {str(i): g.to_dict() for i, g in self.grids.items()},
            "passes": self.passes,
        }
        if self.metric_names is not None:
            d["metric_names"] = list(self.metric_names)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "GuardrailConfig":
        """Build from a decoded JSON document (see README for the schema).

        ``grids`` may map an index to a spec, or the key ``"*"`` may give a
        default spec for every grouped index.
        """
        try:
            thresholds = d["thresholds"]
            partition = d.get("partition")
            if partition is None:
                partition = [[i] for i in range(len(thresholds))]
            raw_grids = dict(d.get("grids", {}))
            default = raw_grids.pop("*", None)
            grids = {int(k): GridSpec(**v) for k, v in raw_grids.items()}
            if default is not None:
                for g in partition:
                    for i in g:
                        grids.setdefault(int(i), GridSpec(**default))
            return cls(
                thresholds=thresholds,
                partition=partition,
                grids=grids,
                passes=int(d.get("passes", 1)),
                metric_names=d.get("metric_names"),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed guardrail config: {e!r}") from e

    def config_hash(self) -> str:
        return canonical_hash(self.to_dict())


def grid_product(config: GuardrailConfig, indices: Sequence[int]) -> Iterator[tuple[float, ...]]:
    """Cartesian product of the grids of ``indices`` (in the given order)."""
    return itertools.product(*(config.grids[i].values() for i in indices))


@dataclass(frozen=True)
class Violation:
    pair_id: str | None
    field: str
    message: str

    def __str__(self) -> str:
        where = f"pair {self.pair_id}" if self.pair_id is not None else "dataset"
        return f"{where}: {self.field}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _check_item(item: Item, side: str, n: int, pair_id: str) -> list[Violation]:
    out = []
    if not math.isfinite(item.base_score):
        out.append(Violation(pair_id, f"{side}.base_score", "not finite"))
    if len(item.terms) != n:
        out.append(Violation(pair_id, f"{side}.terms", f"has {len(item.terms)} entries, expected {n}"))
    if len(item.labels) != n:
        out.append(Violation(pair_id, f"{side}.labels", f"has {len(item.labels)} entries, expected {n}"))
    if not all(math.isfinite(t) for t in item.terms):
        out.append(Violation(pair_id, f"{side}.terms", "not finite"))
    for k, s in enumerate(item.labels):
        if not math.isfinite(s):
            out.append(Violation(pair_id, f"{side}.labels[{k}]", "not finite"))
        elif not 0.0 <= s <= 1.0:
            out.append(Violation(pair_id, f"{side}.labels[{k}]", f"label out of [0,1]: {s}"))
    return out


def validate_dataset(dataset: PairDataset) -> ValidationReport:
    """Check every item, pair and dataset invariant; never raises."""
    out: list[Violation] = []
    n = dataset.n_metrics
    if n < 1:
        out.append(Violation(None, "n_metrics", f"must be >= 1, got {n}"))
    if len(dataset.metric_names) != n:
        out.append(Violation(None, "metric_names", f"has {len(dataset.metric_names)} names, expected {n}"))
    if not dataset.pairs:
        out.append(Violation(None, "pairs", "dataset is empty"))
    for p in dataset.pairs:
        if p.item_a.item_id == p.item_b.item_id:
            out.append(Violation(p.pair_id, "item_b.item_id", f"same item on both sides ({p.item_a.item_id})"))
        out.extend(_check_item(p.item_a, "item_a", n, p.pair_id))
        out.extend(_check_item(p.item_b, "item_b", n, p.pair_id))
    return ValidationReport(tuple(out))
