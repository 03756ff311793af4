"""Command line interface: ``actguard <command> [options]``.

All randomness derives from ``--seed`` (falling back to the config's
``seed`` key, then 0). Exit codes: 0 success, 2 usage error, 3 some
guardrail infeasible, 4 data/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    DecreaseSpec,
    ExperimentSimConfig,
    correlation_study,
    default_variants,
    derive_seeds,
    guardrail_experiment,
)
from .domain import GuardrailConfig, validate_dataset
from .errors import ActError, InfeasibleError
from .pipeline import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, RunConfig, ingest_dataset, run_pipeline
from .ranking import export_formula
from .records import read_pairs, write_corpus, write_pairs
from .selector import act_select, joint_brute_force, DEFAULT_JOINT_CAP
from .simulator import SimCorpusConfig, generate_corpus, log_random_pairs, make_decrease_variant

logger = logging.getLogger("actguard")


class Output:
    """Writes either human-readable lines or one JSON object per line."""

    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout

    def emit(self, kind: str, text: str, **record):
        if self.fmt == "json-lines":
            self.stream.write(json.dumps({"kind": kind, **record}, sort_keys=True) + "\n")
        else:
            self.stream.write(text + "\n")


def _load_json(path) -> dict:
    with Path(path).open("r", encoding="utf-8") as f:
        return json.load(f)


def _seed(args, cfg: dict) -> int:
    return args.seed if args.seed is not None else int(cfg.get("seed", 0))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _corpus_config(raw: dict, seed: int) -> SimCorpusConfig:
    return SimCorpusConfig.from_dict({**raw, "seed": seed})


def cmd_simulate(args, out: Output) -> int:
    cfg = _load_json(args.config)
    corpus_seed, pair_seed, decrease_seed = derive_seeds(_seed(args, cfg), 3)
    corpus = generate_corpus(_corpus_config(cfg["corpus"], corpus_seed))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, out_dir / "corpus.jsonl")
    summary = {"corpus": "corpus.jsonl", "corpus_config_sha256": corpus.config_hash, "treatments": []}
    for t in cfg.get("treatments", [{"treatment_id": "prod"}]):
        tid = t["treatment_id"]
        c = corpus
        if "decrease" in t:
            d = t["decrease"]
            c = make_decrease_variant(corpus, int(d["metric_index"]), float(d["magnitude"]), decrease_seed)
            write_corpus(c, out_dir / f"{tid}.corpus.jsonl")
        dataset = log_random_pairs(c, int(cfg.get("pair_count", 10_000)), pair_seed, treatment_id=tid)
        name = f"{tid}.pairs.jsonl"
        write_pairs(dataset, out_dir / name, config_hash=c.config_hash)
        summary["treatments"].append({"treatment_id": tid, "pairs": name, "pair_count": len(dataset)})
        out.emit("dataset", f"{tid}: {len(dataset)} pairs -> {out_dir / name}", treatment_id=tid, path=str(out_dir / name))
    _write_json(out_dir / "simulate.json", summary)
    return EXIT_OK


def _selection_output(result, dataset, out: Output, args) -> int:
    w = result.weights.weights
    out.emit(
        "selection",
        f"weights {list(w)}  feasible={result.feasible}  achieved={list(result.achieved.values)}",
        **result.to_dict(),
    )
    if args.out and result.feasible:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        export = export_formula(result.weights, dataset.treatment_id, dataset.metric_names)
        path = out_dir / f"{dataset.treatment_id}.formula.json"
        path.write_text(export.dumps(), encoding="utf-8")
        out.emit("export", f"formula -> {path}", path=str(path))
    return EXIT_OK if result.feasible else EXIT_PARTIAL


def cmd_select(args, out: Output) -> int:
    dataset = ingest_dataset(args.dataset)
    config = GuardrailConfig.from_dict(_load_json(args.config))
    return _selection_output(act_select(dataset, config), dataset, out, args)


def cmd_oracle(args, out: Output) -> int:
    dataset = ingest_dataset(args.dataset)
    config = GuardrailConfig.from_dict(_load_json(args.config))
    try:
        result = joint_brute_force(dataset, config, cap=args.cap)
    except InfeasibleError as e:
        out.emit("infeasible", str(e), group=list(e.group), best_margins={str(k): v for k, v in e.best_margins.items()})
        return EXIT_PARTIAL
    return _selection_output(result, dataset, out, args)


def cmd_validate(args, out: Output) -> int:
    report = validate_dataset(read_pairs(args.dataset))
    for v in report.violations:
        out.emit("violation", str(v), pair_id=v.pair_id, field=v.field, message=v.message)
    out.emit("summary", "ok" if report.ok else f"{len(report.violations)} violation(s)", ok=report.ok)
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_pipeline(args, out: Output) -> int:
    config = RunConfig.load(args.config)
    report = run_pipeline(config, output_dir=args.out)
    for o in report.outcomes:
        out.emit("treatment", f"{o.treatment_id}: {o.status}" + (f" ({o.error})" if o.error else ""), **o.to_dict())
    out.emit("manifest", f"manifest -> {report.manifest_path}", path=str(report.manifest_path), exit_code=report.exit_code)
    return report.exit_code


def cmd_experiment(args, out: Output) -> int:
    cfg = _load_json(args.config)
    corpus_seed, decrease_seed, sim_seed = derive_seeds(_seed(args, cfg), 3)
    corpus = generate_corpus(_corpus_config(cfg["corpus"], corpus_seed))
    d = cfg["decrease"]
    sim = ExperimentSimConfig(
        pair_count=int(cfg.get("pair_count", 20_000)),
        impressions=int(cfg.get("impressions", 50_000)),
        seed=sim_seed,
        confidence=float(cfg.get("confidence", 0.95)),
        resamples=int(cfg.get("resamples", 500)),
        guardrails_from_baseline=bool(cfg.get("guardrails_from_baseline", True)),
        baseline_slack=tuple(float(x) for x in cfg.get("baseline_slack", ())),
    )
    report = guardrail_experiment(
        corpus,
        DecreaseSpec(int(d["metric_index"]), float(d["magnitude"]), decrease_seed),
        cfg["fixed_weights"],
        GuardrailConfig.from_dict(cfg["guardrails"]),
        sim,
    )
    for r in report.rows:
        deltas = ", ".join(f"{x:+.2%} [{lo:+.2%}, {hi:+.2%}]" for x, (lo, hi) in zip(r.delta, r.delta_ci))
        out.emit("arm", f"{r.arm_id:16s} w={list(r.weights)}  {deltas}", arm=r.arm_id, delta=list(r.delta))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "experiment.json", report.to_dict())
        _write_csv(out_dir / "experiment.csv", *report.table())
    return EXIT_OK


def cmd_correlate(args, out: Output) -> int:
    cfg = _load_json(args.config)
    corpus_seed, offline_seed, online_seed, variant_seed = derive_seeds(_seed(args, cfg), 4)
    corpus = generate_corpus(_corpus_config(cfg["corpus"], corpus_seed))
    variants = cfg.get("variants") or default_variants(
        corpus.n_metrics, int(cfg.get("variant_count", 30)), float(cfg.get("max_weight", 4.0)), variant_seed
    )
    report = correlation_study(
        corpus,
        variants,
        int(cfg.get("pair_count", 20_000)),
        int(cfg.get("impressions", 50_000)),
        seeds=(offline_seed, online_seed),
        metric_index=int(cfg.get("metric_index", 0)),
    )
    out.emit("correlation", f"pearson r = {report.pearson_r:.4f} over {report.sample_count} variants", pearson_r=report.pearson_r)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "correlation.json", report.to_dict())
        _write_csv(out_dir / "correlation.csv", *report.table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, default=None, help="master seed for all randomness")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("text", "json-lines"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="actguard", description="Guardrail-constrained ranking weight selection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, needs_config=True, dataset=False):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func, needs_config=needs_config)
        if dataset:
            p.add_argument("--dataset", required=True, help="pairs file (.jsonl)")
        return p

    add("simulate", cmd_simulate, "generate a synthetic corpus and log random pairs")
    add("select", cmd_select, "grouped grid search on a pairs file", dataset=True)
    p = add("oracle", cmd_oracle, "exhaustive joint grid search on a pairs file", dataset=True)
    p.add_argument("--cap", type=int, default=DEFAULT_JOINT_CAP, help="maximum joint grid size")
    add("validate", cmd_validate, "lint a pairs file", needs_config=False, dataset=True)
    add("pipeline", cmd_pipeline, "run one multi-treatment tick")
    add("experiment", cmd_experiment, "fixed weight vs ACT on prod and decrease corpora")
    add("correlate", cmd_correlate, "offline vs online correlation study")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.needs_config and not args.config:
        parser.error(f"{args.command} requires --config")
    if args.command == "simulate" and not args.out:
        parser.error("simulate requires --out")
    out = Output(args.format)
    try:
        return args.func(args, out)
    except (OSError, ActError, KeyError, json.JSONDecodeError) as e:
        out.emit("error", f"error: {e}", error=f"{type(e).__name__}: {e}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
