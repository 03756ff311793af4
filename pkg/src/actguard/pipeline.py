"""One recurring tick: ingest each treatment's pairs, select weights, export formulas.

Scheduling (e.g. daily) is left to an external scheduler; a tick is
idempotent and its outputs depend only on the input files and the config.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .domain import GuardrailConfig, PairDataset, canonical_hash, validate_dataset
from .errors import ActError, ConfigError, DataError
from .ranking import export_formula, utc_now
from .records import read_pairs
from .selector import act_select

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 3  # at least one treatment infeasible, none errored
EXIT_ERROR = 4  # at least one treatment failed with an error

STATUS_FEASIBLE = "feasible"
STATUS_INFEASIBLE = "infeasible"
STATUS_ERROR = "error"


def ingest_dataset(path) -> PairDataset:
    """Read and validate a pairs file.

    Raises:
        FileNotFoundError: ``path`` does not exist.
        ParseError: a record is malformed (``location`` is the line number).
        EmptyInputError: the file is empty.
        DataError: the dataset parsed but violates an invariant.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such dataset: {path}")
    dataset = read_pairs(path)
    report = validate_dataset(dataset)
    if not report.ok:
        raise DataError(report.violations)
    return dataset


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class TreatmentSpec:
    treatment_id: str
    dataset: Path
    guardrails: GuardrailConfig | None = None


@dataclass(frozen=True)
class RunConfig:
    """A pipeline tick: treatments, guardrails, output directory and seed.

    Relative dataset paths in a config file are resolved against the
    file's directory.
    """

    treatments: tuple[TreatmentSpec, ...]
    output_dir: Path
    guardrails: GuardrailConfig | None = None
    seed: int = 0

    def __post_init__(self):
        ids = [t.treatment_id for t in self.treatments]
        if not ids:
            raise ConfigError("run config lists no treatments")
        if len(set(ids)) != len(ids):
            raise ConfigError(f"treatment ids are not unique: {ids}")
        for t in self.treatments:
            if t.guardrails is None and self.guardrails is None:
                raise ConfigError(f"treatment {t.treatment_id} has no guardrail config")

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Path = Path(".")) -> "RunConfig":
        try:
            shared = d.get("guardrails")
            treatments = []
            for t in d["treatments"]:
                own = t.get("guardrails")
                treatments.append(
                    TreatmentSpec(
                        treatment_id=str(t["treatment_id"]),
                        dataset=base_dir / t["dataset"],
                        guardrails=GuardrailConfig.from_dict(own) if own is not None else None,
                    )
                )
            return cls(
                treatments=tuple(treatments),
                output_dir=base_dir / d.get("output_dir", "out"),
                guardrails=GuardrailConfig.from_dict(shared) if shared is not None else None,
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed run config: {e!r}") from e

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        with path.open("r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f), path.parent)

    def to_dict(self) -> dict:
        return {
            "treatments": [
                {
                    "treatment_id": t.treatment_id,
                    "dataset": t.dataset.name,
                    **({"guardrails": t.guardrails.to_dict()} if t.guardrails else {}),
                }
                for t in self.treatments
            ],
            "guardrails": self.guardrails.to_dict() if self.guardrails else None,
            "seed": self.seed,
        }


@dataclass
class TreatmentOutcome:
    treatment_id: str
    status: str
    dataset_sha256: str | None = None
    guardrail_sha256: str | None = None
    formula_path: str | None = None
    selection: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class RunReport:
    outcomes: list[TreatmentOutcome]
    manifest_path: Path
    exit_code: int
    manifest: dict = field(default_factory=dict)


def _exit_code(outcomes) -> int:
    statuses = {o.status for o in outcomes}
    if STATUS_ERROR in statuses:
        return EXIT_ERROR
    if STATUS_INFEASIBLE in statuses:
        return EXIT_PARTIAL
    return EXIT_OK


def _run_treatment(t: TreatmentSpec, config: RunConfig, out_dir: Path) -> TreatmentOutcome:
    guardrails = t.guardrails or config.guardrails
    # a formula left by an earlier tick must not outlive a failed one
    path = out_dir / f"{t.treatment_id}.formula.json"
    path.unlink(missing_ok=True)
    outcome = TreatmentOutcome(t.treatment_id, STATUS_ERROR, guardrail_sha256=guardrails.config_hash())
    try:
        outcome.dataset_sha256 = file_sha256(t.dataset)
        dataset = ingest_dataset(t.dataset)
        result = act_select(dataset, guardrails)
    except (OSError, ActError) as e:
        logger.error("treatment %s failed: %s", t.treatment_id, e)
        outcome.error = f"{type(e).__name__}: {e}"
        return outcome
    outcome.selection = result.to_dict()
    if not result.feasible:
        outcome.status = STATUS_INFEASIBLE
        return outcome
    export = export_formula(
        result.weights,
        t.treatment_id,
        dataset.metric_names,
        provenance={
            "dataset": t.dataset.name,
            "dataset_sha256": outcome.dataset_sha256,
            "guardrail_config_sha256": outcome.guardrail_sha256,
        },
    )
    path.write_text(export.dumps(), encoding="utf-8")
    outcome.formula_path = path.name
    outcome.status = STATUS_FEASIBLE
    return outcome


def run_pipeline(config: RunConfig, output_dir=None) -> RunReport:
    """Run every treatment and write formulas plus ``manifest.json``.

    A failing or infeasible treatment never stops the others; the manifest
    lists every treatment with its terminal status in config order.
    """
    out_dir = Path(output_dir) if output_dir is not None else config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    started = utc_now()
    outcomes = [_run_treatment(t, config, out_dir) for t in config.treatments]
    code = _exit_code(outcomes)
    manifest = {
        "started_at": started,
        "finished_at": utc_now(),
        "config_sha256": canonical_hash(config.to_dict()),
        "seed": config.seed,
        "exit_code": code,
        "treatments": [o.to_dict() for o in outcomes],
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunReport(outcomes, path, code, manifest)
