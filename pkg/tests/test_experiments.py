import json

import jsonschema
import pytest

from congestsp import cli, experiments
from congestsp.experiments import ExperimentSpec, ResultRecord, SpecError

SMALL = {
    "ldd": ExperimentSpec("grid:8", "ldd", beta=0.2, trials=4, seed=1),
    "sssp": ExperimentSpec("er:40:0.1", "sssp", beta=0.25, trials=2, seed=2, weights="int:1:9"),
    "labels": ExperimentSpec("er:32:0.15", "labels", beta=0.25, trials=1, seed=3),
    "transshipment": ExperimentSpec("er:30:0.15", "transshipment", beta=0.25, trials=2, seed=4, weights="int:1:5"),
    "partwise": ExperimentSpec("grid:6", "partwise", trials=5, seed=5),
    "heads-tails": ExperimentSpec("er:60:0.08", "heads-tails", trials=5, seed=6),
}


@pytest.mark.parametrize("algo", experiments.ALGORITHMS)
def test_records_validate_and_pass(algo):
    rec = experiments.run_experiment(SMALL[algo])
    jsonschema.validate(json.loads(rec.to_json()), experiments.load_schema())
    assert rec.passed, rec.data["verdicts"]
    assert len(rec.data["trials"]) == SMALL[algo].trials


def test_message_fidelity_records():
    spec = ExperimentSpec("grid:5", "ldd", beta=0.3, trials=2, fidelity="message")
    rec = experiments.run_experiment(spec)
    assert rec.data["fidelity"] == "message"
    assert all(t["metrics"]["bit_violations"] == 0 for t in rec.data["trials"])


def test_determinism_and_parallel_equivalence():
    spec = SMALL["heads-tails"]
    a = experiments.run_experiment(spec).to_json()
    assert experiments.run_experiment(spec).to_json() == a
    assert experiments.run_experiment(spec, jobs=2).to_json() == a


def test_compare():
    a = experiments.run_experiment(SMALL["ldd"])
    assert experiments.compare(a, a) == {}
    b = experiments.run_experiment(ExperimentSpec("grid:8", "ldd", beta=0.2, trials=4, seed=2))
    diff = experiments.compare(a, b)
    assert diff["spec"]["seed"] == [1, 2]
    with pytest.raises(SpecError):
        experiments.compare(a, experiments.run_experiment(SMALL["partwise"]))


def test_spec_validation():
    for bad in (
        ExperimentSpec("grid:4", "ldd", beta=1.5),
        ExperimentSpec("grid:4", "nope"),
        ExperimentSpec("grid:4", "ldd", trials=0),
        ExperimentSpec("grid:4", "ldd", constants=(1, 2, 4, 2)),
        ExperimentSpec("grid:4", "ldd", beta=0.01),  # below 1/n
        ExperimentSpec("grid:4", "sssp", source=99),
    ):
        with pytest.raises(SpecError):
            experiments.run_experiment(bad)


def test_write_and_read(tmp_path):
    rec = experiments.run_experiment(SMALL["partwise"])
    jpath, cpath = rec.write(tmp_path / "out" / "rec")
    assert ResultRecord.read(jpath).data == rec.data
    header = cpath.read_text().splitlines()[0].split(",")
    assert header[0] == "trial" and "check_matches_direct" in header


def test_summary_helpers():
    s = experiments.summarize([1.0, 2.0, 3.0])
    assert s["mean"] == 2.0 and s["ci_low"] < 2.0 < s["ci_high"]
    assert experiments.summarize([None])["count"] == 0
    r = experiments.rate_summary(99, 100)
    assert r["ci_low"] < 0.99 < r["ci_high"] <= 1.0


def test_smaller_beta_costs_more_rounds():
    base = dict(graph="er:64:0.08", algo="sssp", trials=2, seed=7, weights="int:1:20")
    fast = experiments.run_experiment(ExperimentSpec(beta=0.25, **base))
    slow = experiments.run_experiment(ExperimentSpec(beta=1 / 16, **base))
    diff = experiments.compare(fast, slow)
    assert diff["summary"]["rounds"]["delta"] > 0
    assert slow.data["summary"]["mean_stretch"]["mean"] <= fast.data["summary"]["mean_stretch"]["mean"] + 0.25


def test_dump_artifacts(tmp_path):
    for algo in ("ldd", "sssp", "labels", "transshipment"):
        paths = experiments.dump_artifacts(SMALL[algo], tmp_path / algo)
        assert paths and all(p.read_text() for p in paths)


# command line


def test_cli_run_and_compare(tmp_path, capsys):
    args = ["run", "--graph", "grid:6", "--algo", "ldd", "--beta", "0.2", "--trials", "3", "--seed", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").exists()
    err = capsys.readouterr().err
    assert "PASS radius_within_bound" in err
    assert cli.main(["compare", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 0
    assert json.loads(capsys.readouterr().out) == {}


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--graph", "grid:6", "--algo", "ldd", "--beta", "1.5"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--graph", "cube:3", "--algo", "ldd"])
    assert exc.value.code == 2


def test_cli_failing_verdict_exit_code(tmp_path, monkeypatch, capsys):
    real = experiments.run_experiment

    def failing(spec, jobs=1):
        rec = real(spec, jobs)
        rec.data["verdicts"]["completed"] = False
        return rec

    monkeypatch.setattr(cli, "run_experiment", failing)
    assert cli.main(["run", "--graph", "line:4", "--algo", "partwise", "--beta", "0.5", "--out", str(tmp_path / "r")]) == 1
    assert "FAIL completed" in capsys.readouterr().err


def test_cli_missing_demands_file(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--graph", "line:4", "--algo", "transshipment", "--beta", "0.5",
                  "--demands", str(tmp_path / "missing.txt")])
    assert exc.value.code == 2


def test_cli_labels_and_query(tmp_path, capsys):
    assert cli.main(["run", "--graph", "line:8", "--algo", "labels", "--beta", "0.5",
                     "--out", str(tmp_path / "rec"), "--dump", str(tmp_path / "dump")]) == 0
    capsys.readouterr()
    assert cli.main(["query", str(tmp_path / "dump" / "labels.txt"), "0", "7"]) == 0
    est = float(capsys.readouterr().out.split()[0])
    assert est >= 7
    assert cli.main(["query", str(tmp_path / "dump" / "labels.txt"), "0", "70"]) == 2


def test_cli_demands_file(tmp_path):
    (tmp_path / "d.txt").write_text("0 1.5\n1 0\n2 -1.5\n")
    code = cli.main(["run", "--graph", "line:3", "--algo", "transshipment", "--beta", "0.5",
                     "--demands", str(tmp_path / "d.txt"), "--out", str(tmp_path / "r")])
    assert code == 0
    rec = ResultRecord.read(tmp_path / "r.json")
    assert rec.data["trials"][0]["metrics"]["cost"] == 3.0
