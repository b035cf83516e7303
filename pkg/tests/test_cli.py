import hashlib
import json

import numpy as np
import pytest
import yaml

from fairdream import report as rpt
from fairdream.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, load_config, main
from fairdream.dataset import reference_data_path
from fairdream.pipeline import Pipeline

FAST = ["--subsample", "1500", "--estimators", "15"]


def run(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_audit(tmp_path, capsys):
    rc, out, _ = run(capsys, "audit", *FAST, "--out", str(tmp_path), "--features", "age,sex")
    assert rc == EXIT_OK
    assert "[17, 29)" in out or "no alerts" in out
    doc = rpt.read_json(tmp_path / "audit.json")
    assert doc["kind"] == "audit" and doc["format"] == rpt.REPORT_FORMAT
    assert (tmp_path / "audit" / "age.csv").exists()
    model = Pipeline.load(tmp_path / "baseline_model.json")
    assert model.family == "gbdt"
    # auditing the saved model reproduces the report
    rc, _, _ = run(capsys, "audit", *FAST, "--out", str(tmp_path / "again"), "--features", "age,sex",
                   "--model", str(tmp_path / "baseline_model.json"))
    assert rc == EXIT_OK
    again = rpt.read_json(tmp_path / "again" / "audit.json")
    assert again == doc


def test_audit_shuffled_labels(tmp_path, capsys):
    rng = np.random.default_rng(0)
    lines = ["x,g,label"]
    for _ in range(600):
        lines.append(f"{rng.normal():.4f},{rng.choice(['p', 'q'])},{rng.integers(0, 2)}")
    (tmp_path / "d.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "s.yaml").write_text(yaml.safe_dump({"columns": [
        {"name": "x", "kind": "numeric"}, {"name": "g", "kind": "categorical"},
        {"name": "label", "target": True}]}))
    rc, out, _ = run(capsys, "audit", "--data", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.yaml"),
                     "--estimators", "10", "--out", str(tmp_path / "o"))
    assert rc == EXIT_OK
    assert rpt.read_json(tmp_path / "o" / "audit.json")["kind"] == "audit"


def test_bad_schema_path(tmp_path, capsys):
    out = tmp_path / "never"
    rc, _, err = run(capsys, "audit", "--schema", str(tmp_path / "missing.yaml"), "--out", str(out))
    assert rc == EXIT_CONFIG
    assert "schema" in err
    assert not out.exists()


def test_unknown_method(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["correct", "--feature", "age", "--method", "magic"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_unknown_feature(tmp_path, capsys):
    rc, _, err = run(capsys, "correct", *FAST, "--feature", "height", "--method", "fairdream",
                     "--out", str(tmp_path))
    assert rc == EXIT_CONFIG and "height" in err


def test_runtime_error(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("x,label\n1,0\n2,7\n")
    (tmp_path / "s.yaml").write_text(yaml.safe_dump({"columns": [
        {"name": "x", "kind": "numeric"}, {"name": "label", "target": True}]}))
    rc, _, err = run(capsys, "audit", "--data", str(tmp_path / "d.csv"), "--schema", str(tmp_path / "s.yaml"),
                     "--out", str(tmp_path / "o"))
    assert rc == EXIT_RUNTIME and "row 3" in err


def test_correct_fairdream(tmp_path, capsys):
    rc, out, _ = run(capsys, "correct", *FAST, "--feature", "age", "--method", "fairdream", "--candidates", "2",
                     "--out", str(tmp_path))
    assert rc == EXIT_OK
    assert "selected candidate" in out
    doc = rpt.read_json(tmp_path / "correction.json")
    assert doc["kind"] == "correction"
    assert len(doc["candidates"]) == 3  # baseline + 2
    assert (tmp_path / "candidates.csv").read_text().count("\n") == 4
    Pipeline.load(tmp_path / "selected_model.json")
    assert "fairdream on 'age'" in rpt.render_document(doc)


def test_correct_gridsearch(tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"subsample_rows": 1500, "learner": {"family": "logistic"},
                                   "correction": {"grid_size": 4}, "output": {"dir": str(tmp_path / "gs")}}))
    rc, out, _ = run(capsys, "correct", "--config", str(cfg), "--feature", "sex", "--method", "gridsearch")
    assert rc == EXIT_OK
    rows = (tmp_path / "gs" / "grid_points.csv").read_text().splitlines()
    assert len(rows) == 5
    doc = rpt.read_json(tmp_path / "gs" / "gridsearch.json")
    assert sum(p["selected"] for p in doc["points"]) == 1
    assert Pipeline.load(tmp_path / "gs" / "selected_model.json").family == "logistic"


def test_benchmark_single_family_and_rerun(tmp_path, capsys):
    args = ["benchmark", "--families", "logistic", "--features", "sex", "--subsample", "1500",
            "--out", str(tmp_path)]
    rc, out, _ = run(capsys, *args)
    assert rc == EXIT_OK
    assert "gridsearch vs fairdream" in out
    summary = rpt.read_json(tmp_path / "summary.json")
    assert summary["config"]["families"] == ["logistic"]
    csvs = {p: p.read_bytes() for p in tmp_path.rglob("*.csv")}
    (tmp_path / "cells" / "leftover.csv").parent.mkdir(exist_ok=True)
    (tmp_path / "cells" / "leftover.csv").write_text("stale")
    rc, _, _ = run(capsys, *args)
    assert rc == EXIT_OK
    assert not (tmp_path / "cells" / "leftover.csv").exists()
    assert {p: p.read_bytes() for p in tmp_path.rglob("*.csv")} == csvs


def test_report_command(tmp_path, capsys):
    doc = rpt.document("audit", {"threshold": 0.5, "alerts": [], "features": {}})
    rpt.write_json(tmp_path / "r.json", doc)
    rc, out, _ = run(capsys, "report", str(tmp_path / "r.json"))
    assert rc == EXIT_OK and "no alerts" in out
    (tmp_path / "bad.json").write_text(json.dumps({"format": "other"}))
    rc, _, _ = run(capsys, "report", str(tmp_path / "bad.json"))
    assert rc != EXIT_OK


def test_config_and_flags(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"seed": 4, "split": {"test_fraction": 0.2},
                                   "learner": {"family": "random_forest", "n_estimators": 7}}))
    c = load_config(cfg)
    assert c.seed == 4 and c.test_fraction == 0.2 and c.learner_config().n_estimators == 7
    cfg.write_text(yaml.safe_dump({"mystery": 1}))
    with pytest.raises(Exception, match="mystery"):
        load_config(cfg)


def test_bad_config_values(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"split": {"test_fraction": 2}}))
    rc, _, err = run(capsys, "audit", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert rc == EXIT_CONFIG and "test_fraction" in err
    cfg.write_text(yaml.safe_dump({"learner": {"family": "neural_network"}}))
    rc, _, _ = run(capsys, "audit", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert rc == EXIT_CONFIG
    assert not (tmp_path / "o").exists()


def test_input_not_mutated(tmp_path, capsys):
    path = reference_data_path()
    before = hashlib.sha256(path.read_bytes()).hexdigest()
    run(capsys, "audit", *FAST, "--features", "sex", "--out", str(tmp_path))
    assert hashlib.sha256(path.read_bytes()).hexdigest() == before


def test_reproducible(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "correct", *FAST, "--feature", "sex", "--method", "fairdream", "--candidates", "2",
            "--out", str(tmp_path / name), "--format", "csv")
    assert (tmp_path / "a" / "candidates.csv").read_bytes() == (tmp_path / "b" / "candidates.csv").read_bytes()
    assert (tmp_path / "a" / "correction.json").read_bytes() == (tmp_path / "b" / "correction.json").read_bytes()


def test_readme_config_example_loads(tmp_path):
    from pathlib import Path
    text = (Path(__file__).parents[1] / "README.md").read_text()
    block = next(b.split("\n", 1)[1] for b in text.split("```yaml")[1:] if "correction:" in b).split("```")[0]
    (tmp_path / "c.yaml").write_text(block)
    c = load_config(tmp_path / "c.yaml")
    assert c.learner_config().n_estimators == 200 and c.grid_size == 10
