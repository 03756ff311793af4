import json
from pathlib import Path

import pytest

from actguard.cli import main
from actguard.pipeline import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _small(tmp_path, name, **overrides):
    cfg = json.loads((CONFIGS / name).read_text())
    cfg.update(overrides)
    if "corpus" in cfg:
        cfg["corpus"]["item_count"] = 400
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


@pytest.fixture
def simulated(tmp_path):
    cfg = _small(tmp_path, "simulate.json", pair_count=3000)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "sim")]) == EXIT_OK
    return tmp_path / "sim"


def test_simulate_writes_files(simulated):
    names = sorted(p.name for p in simulated.iterdir())
    assert names == [
        "corpus.jsonl",
        "decrease.corpus.jsonl",
        "decrease.pairs.jsonl",
        "prod.pairs.jsonl",
        "simulate.json",
    ]


def test_simulate_seed_flag_changes_output(tmp_path):
    cfg = _small(tmp_path, "simulate.json", pair_count=500)
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "c")])
    a, b, c = ((tmp_path / d / "prod.pairs.jsonl").read_bytes() for d in "abc")
    assert a == c and a != b


def test_validate(simulated, tmp_path, capsys):
    assert main(["validate", "--dataset", str(simulated / "prod.pairs.jsonl")]) == EXIT_OK
    lines = (simulated / "prod.pairs.jsonl").read_text().splitlines()
    rec = json.loads(lines[1])
    rec["a"]["labels"][0] = 2.0
    lines[1] = json.dumps(rec)
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["validate", "--dataset", str(bad), "--format", "json-lines"]) == EXIT_ERROR
    out = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert out[0]["kind"] == "violation" and out[-1] == {"kind": "summary", "ok": False}


def test_select_and_oracle_agree(simulated, tmp_path, capsys):
    guard = tmp_path / "g.json"
    guard.write_text(
        json.dumps({"thresholds": [0.4, 0.4], "partition": [[0, 1]], "grids": {"*": {"min": 0, "max": 2, "step": 0.25}}})
    )
    ds = str(simulated / "prod.pairs.jsonl")
    capsys.readouterr()
    assert main(["select", "--config", str(guard), "--dataset", ds, "--format", "json-lines", "--out", str(tmp_path / "o")]) == 0
    sel = json.loads(capsys.readouterr().out.splitlines()[0])
    assert main(["oracle", "--config", str(guard), "--dataset", ds, "--format", "json-lines"]) == 0
    orc = json.loads(capsys.readouterr().out.splitlines()[0])
    assert sel["weights"] == orc["weights"]
    assert (tmp_path / "o" / "prod.formula.json").exists()


def test_select_infeasible_and_oracle_cap(simulated, tmp_path):
    guard = tmp_path / "g.json"
    guard.write_text(json.dumps({"thresholds": [1.5, 0.0], "grids": {"*": {"min": 0, "max": 2, "step": 0.5}}}))
    ds = str(simulated / "prod.pairs.jsonl")
    assert main(["select", "--config", str(guard), "--dataset", ds]) == EXIT_PARTIAL
    assert main(["oracle", "--config", str(guard), "--dataset", ds]) == EXIT_PARTIAL
    assert main(["oracle", "--config", str(guard), "--dataset", ds, "--cap", "3"]) == EXIT_ERROR


def test_pipeline_command(simulated, tmp_path):
    cfg = json.loads((CONFIGS / "pipeline.json").read_text())
    cfg["treatments"] = [
        {"treatment_id": "prod", "dataset": str(simulated / "prod.pairs.jsonl")},
        {"treatment_id": "decrease", "dataset": str(simulated / "decrease.pairs.jsonl")},
    ]
    cfg["output_dir"] = str(tmp_path / "tick")
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    code = main(["pipeline", "--config", str(path)])
    manifest = json.loads((tmp_path / "tick" / "manifest.json").read_text())
    assert code == manifest["exit_code"]
    assert [t["treatment_id"] for t in manifest["treatments"]] == ["prod", "decrease"]


def test_experiment_and_correlate(tmp_path, capsys):
    exp = _small(tmp_path, "experiment.json", pair_count=5000, impressions=5000, resamples=100)
    assert main(["experiment", "--config", str(exp), "--out", str(tmp_path / "e")]) == EXIT_OK
    report = json.loads((tmp_path / "e" / "experiment.json").read_text())
    assert len(report["arms"]) == 4
    assert (tmp_path / "e" / "experiment.csv").read_text().count("\n") == 5

    cor = _small(tmp_path, "correlate.json", pair_count=5000, impressions=5000, variant_count=12)
    capsys.readouterr()
    assert main(["correlate", "--config", str(cor), "--out", str(tmp_path / "c"), "--format", "json-lines"]) == EXIT_OK
    rec = json.loads(capsys.readouterr().out)
    assert rec["kind"] == "correlation" and rec["pearson_r"] > 0.8
    assert (tmp_path / "c" / "correlation.csv").exists()


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["select", "--config", str(tmp_path / "none.json"), "--dataset", str(tmp_path / "x")]) == EXIT_ERROR
    (tmp_path / "broken.json").write_text("{")
    assert main(["experiment", "--config", str(tmp_path / "broken.json")]) == EXIT_ERROR
    with pytest.raises(SystemExit) as e:
        main(["select", "--dataset", "x"])
    assert e.value.code == 2


def test_shipped_configs_parse():
    from actguard.domain import GuardrailConfig
    from actguard.pipeline import RunConfig

    GuardrailConfig.from_dict(json.loads((CONFIGS / "select.json").read_text()))
    cfg = RunConfig.load(CONFIGS / "pipeline.json")
    assert [t.treatment_id for t in cfg.treatments] == ["prod", "decrease"]
