"""Additive ranking formula and the exported formula document.

The formula is ``r = base_score + sum_i w_i * t_i``. Terms are accumulated
left to right in metric order both here and in the vectorized
:func:`score_arrays`, so a scalar score and its array counterpart are
bit-identical and tie decisions agree everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping, Sequence

import numpy as np

from .domain import Item, WeightVector
from .errors import EmptyInputError, NonFiniteError, ParseError, ShapeError, UnsupportedVersionError

FORMULA_KIND = "additive_linear_v1"


def score_item(item: Item, w) -> float:
    w = WeightVector.coerce(w)
    if len(item.terms) != len(w):
        raise ShapeError(f"item {item.item_id} has {len(item.terms)} terms, weights have {len(w)}")
    r = item.base_score
    for wi, ti in zip(w.weights, item.terms):
        r = r + wi * ti
    return r


def score_arrays(base: np.ndarray, terms: np.ndarray, w) -> np.ndarray:
    """Vectorized :func:`score_item` over rows of ``terms`` (shape ``(m, n)``)."""
    w = WeightVector.coerce(w)
    if terms.ndim != 2 or terms.shape[1] != len(w):
        raise ShapeError(f"terms have shape {terms.shape}, weights have {len(w)} entries")
    r = np.array(base, dtype=np.float64, copy=True)
    for i, wi in enumerate(w.weights):
        r = r + wi * terms[:, i]
    return r


def rank_slate(items: Sequence[Item], w) -> tuple[list[float], list[int]]:
    """Score a slate and order it.

    Returns:
        ``(scores, order)`` where ``scores[j]`` belongs to ``items[j]`` and
        ``order`` lists item positions by descending score, ties broken by
        ascending ``item_id``.
    """
    if not items:
        raise EmptyInputError("cannot rank an empty slate")
    n = len(items[0].terms)
    if any(len(it.terms) != n for it in items):
        raise ShapeError("items disagree on the number of terms")
    scores = [score_item(it, w) for it in items]
    order = sorted(range(len(items)), key=lambda j: (-scores[j], items[j].item_id))
    return scores, order


@dataclass(frozen=True)
class FormulaExport:
    """A guardrailed ranking formula ready for serving."""

    treatment_id: str
    metric_names: tuple[str, ...]
    weights: WeightVector
    created_at: str
    provenance: Mapping[str, str] = field(default_factory=dict)
    formula_kind: str = FORMULA_KIND

    def to_dict(self) -> dict:
        return {
            "formula_kind": self.formula_kind,
            "treatment_id": self.treatment_id,
            "metric_names": list(self.metric_names),
            "weights": list(self.weights.weights),
            "created_at": self.created_at,
            "provenance": dict(self.provenance),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def score(self, item: Item) -> float:
        return score_item(item, self.weights)


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def export_formula(
    w,
    treatment_id: str,
    metric_names: Sequence[str],
    provenance: Mapping[str, str] | None = None,
    created_at: str | None = None,
) -> FormulaExport:
    w = WeightVector.coerce(w)
    if not w.is_finite():
        raise NonFiniteError(f"refusing to export non-finite weights {w.weights}")
    if len(metric_names) != len(w):
        raise ShapeError(f"{len(metric_names)} metric names for {len(w)} weights")
    return FormulaExport(
        treatment_id=str(treatment_id),
        metric_names=tuple(metric_names),
        weights=w,
        created_at=created_at or utc_now(),
        provenance=dict(provenance or {}),
    )


def _require(d: Mapping, key: str, kind):
    if key not in d:
        raise ParseError(f"missing key {key!r}", location=key)
    v = d[key]
    if not isinstance(v, kind):
        raise ParseError(f"key {key!r} has type {type(v).__name__}", location=key)
    return v


def parse_formula(document: str | bytes | Mapping) -> FormulaExport:
    """Inverse of :meth:`FormulaExport.dumps`.

    Raises:
        ParseError: malformed JSON or a missing/mistyped field; ``location``
            is a ``line:col`` string or the offending key.
        UnsupportedVersionError: ``formula_kind`` is not ``additive_linear_v1``.
    """
    if isinstance(document, (str, bytes)):
        try:
            d = json.loads(document)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid formula document: {e.msg}", location=f"{e.lineno}:{e.colno}") from e
    else:
        d = document
    if not isinstance(d, Mapping):
        raise ParseError("formula document must be an object", location="$")

    kind = _require(d, "formula_kind", str)
    if kind != FORMULA_KIND:
        raise UnsupportedVersionError(f"unsupported formula_kind {kind!r}", location="formula_kind")
    names = _require(d, "metric_names", list)
    raw = _require(d, "weights", list)
    for k, v in enumerate(raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(f"weight {k} is not a finite number: {v!r}", location=f"weights[{k}]")
    if len(names) != len(raw):
        raise ParseError(f"{len(names)} metric names for {len(raw)} weights", location="weights")
    provenance = d.get("provenance", {})
    if not isinstance(provenance, Mapping):
        raise ParseError("provenance must be an object", location="provenance")
    return FormulaExport(
        treatment_id=_require(d, "treatment_id", str),
        metric_names=tuple(str(n) for n in names),
        weights=WeightVector(tuple(float(v) for v in raw)),
        created_at=_require(d, "created_at", str),
        provenance=dict(provenance),
        formula_kind=kind,
    )
