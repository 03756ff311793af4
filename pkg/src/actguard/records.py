"""Line-delimited JSON record files for corpora and pair datasets.

Every file starts with a header record::

    {"record": "header", "format": "act-pairs-v1", "n_metrics": 2,
     "metric_names": ["s1", "s2"], "treatment_id": "prod", "config_hash": "..."}

followed by one record per pair (``"record": "pair"``) or per item
(``"record": "item"``, format ``act-corpus-v1``). Floats are written with
``repr`` precision, so a write/read cycle is lossless.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterator

from .domain import Item, PairDataset, RandomPair
from .errors import EmptyInputError, ParseError, UnsupportedVersionError
from .simulator import Corpus

PAIRS_FORMAT = "act-pairs-v1"
CORPUS_FORMAT = "act-corpus-v1"


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def item_record(item: Item) -> dict:
    return {
        "item_id": item.item_id,
        "base_score": item.base_score,
        "terms": list(item.terms),
        "labels": list(item.labels),
    }


def write_pairs(dataset: PairDataset, path, config_hash: str = "") -> Path:
    path = Path(path)
    header = {
        "record": "header",
        "format": PAIRS_FORMAT,
        "n_metrics": dataset.n_metrics,
        "metric_names": list(dataset.metric_names),
        "treatment_id": dataset.treatment_id,
        "config_hash": config_hash,
    }
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps(header) + "\n")
        for p in dataset.pairs:
            rec = {"record": "pair", "pair_id": p.pair_id, "a": item_record(p.item_a), "b": item_record(p.item_b)}
            f.write(_dumps(rec) + "\n")
    return path


def write_corpus(corpus: Corpus, path) -> Path:
    path = Path(path)
    header = {
        "record": "header",
        "format": CORPUS_FORMAT,
        "n_metrics": corpus.n_metrics,
        "metric_names": list(corpus.metric_names),
        "config_hash": corpus.config_hash,
    }
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(_dumps(header) + "\n")
        for it in corpus.items:
            f.write(_dumps({"record": "item", **item_record(it)}) + "\n")
    return path


def _lines(path: Path) -> Iterator[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: invalid JSON: {e.msg}", location=lineno) from e
            if not isinstance(rec, dict):
                raise ParseError(f"{path}: record is not an object", location=lineno)
            yield lineno, rec


def _read_header(path: Path, records, expected_format: str) -> dict:
    try:
        lineno, header = next(records)
    except StopIteration:
        raise EmptyInputError(f"{path} is empty") from None
    if header.get("record") != "header":
        raise ParseError(f"{path}: first record must be a header", location=lineno)
    fmt = header.get("format")
    if fmt != expected_format:
        raise UnsupportedVersionError(f"{path}: expected format {expected_format!r}, got {fmt!r}", location=lineno)
    n = header.get("n_metrics")
    names = header.get("metric_names")
    if not isinstance(n, int) or not isinstance(names, list) or len(names) != n:
        raise ParseError(f"{path}: header needs n_metrics and that many metric_names", location=lineno)
    return header


def _parse_item(raw, n: int, path: Path, lineno: int, where: str) -> Item:
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: {where} is not an object", location=lineno)
    try:
        terms, labels = raw["terms"], raw["labels"]
        base = raw["base_score"]
        item_id = raw["item_id"]
    except KeyError as e:
        raise ParseError(f"{path}: {where} is missing {e.args[0]!r}", location=lineno) from None
    if not isinstance(terms, list) or not isinstance(labels, list):
        raise ParseError(f"{path}: {where} terms/labels must be lists", location=lineno)
    if len(terms) != n or len(labels) != n:
        raise ParseError(
            f"{path}: {where} has {len(terms)} terms and {len(labels)} labels, header says n_metrics={n}",
            location=lineno,
        )
    for v in (base, *terms, *labels):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{path}: {where} has a non-numeric value {v!r}", location=lineno)
    return Item(item_id, base, terms, labels)


def read_pairs(path) -> PairDataset:
    """Parse a pairs file without semantic validation (see ``ingest_dataset``)."""
    path = Path(path)
    records = _lines(path)
    header = _read_header(path, records, PAIRS_FORMAT)
    n = header["n_metrics"]
    pairs = []
    for lineno, rec in records:
        if rec.get("record") != "pair":
            raise ParseError(f"{path}: expected a pair record, got {rec.get('record')!r}", location=lineno)
        if "pair_id" not in rec:
            raise ParseError(f"{path}: pair record without pair_id", location=lineno)
        a = _parse_item(rec.get("a"), n, path, lineno, "item a")
        b = _parse_item(rec.get("b"), n, path, lineno, "item b")
        pairs.append(RandomPair(a, b, rec["pair_id"]))
    return PairDataset(tuple(pairs), n, tuple(header["metric_names"]), header.get("treatment_id", "default"))


def read_corpus(path) -> Corpus:
    path = Path(path)
    records = _lines(path)
    header = _read_header(path, records, CORPUS_FORMAT)
    n = header["n_metrics"]
    items = []
    for lineno, rec in records:
        if rec.get("record") != "item":
            raise ParseError(f"{path}: expected an item record, got {rec.get('record')!r}", location=lineno)
        items.append(_parse_item(rec, n, path, lineno, "item"))
    if any(not math.isfinite(x) for it in items for x in (it.base_score, *it.terms, *it.labels)):
        raise ParseError(f"{path}: corpus contains non-finite values")
    return Corpus(tuple(items), tuple(header["metric_names"]), header.get("config_hash", ""))
