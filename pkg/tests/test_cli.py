import csv
import json

import pytest

from asep_lab import bundled_config
from asep_lab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, HEADER, REPORT_FORMAT, main, run
from asep_lab.config import ConfigError, load_config, parse_config
from asep_lab.engine import read_trace

from acceptance_runs import bundled

SMOKE = bundled_config("smoke.cfg")

MINIMAL = """
[experiment]
name = tiny
initial_law = bernoulli_star
replicas = 20
master_seed = 3
checkpoints = 0.5, 1.0

[params]
p = 0.75
alpha = 0.4
N = 20
t_max = 1.0

[observable X]
kind = tagged
scale = clt
"""


def write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_missing_p_exits_2_naming_key(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL.replace("p = 0.75\n", ""))
    assert main([str(cfg), "-o", str(tmp_path / "out")]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "p:" in err and "missing" in err


@pytest.mark.parametrize("old,new,key", [
    ("alpha = 0.4", "alpha = 1.4", "params"),
    ("kind = tagged", "kind = velocity", "observable"),
    ("checkpoints = 0.5, 1.0", "checkpoints = 0.5, 2.0", "checkpoints"),
    ("t_max = 1.0", "t_max = 1.0\ncolour = red", "params.colour"),
    ("initial_law = bernoulli_star", "initial_law = bernoulli", "observable"),
])
def test_config_errors_name_the_key(old, new, key):
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace(old, new))
    assert info.value.key.startswith(key)


def test_unreadable_config_exits_2(tmp_path):
    assert run(tmp_path / "absent.cfg", tmp_path) == EXIT_CONFIG


def test_dry_run_reports_L_and_cost_without_output(tmp_path, capsys):
    out = tmp_path / "out"
    assert main([str(write(tmp_path, MINIMAL)), "-o", str(out), "--dry-run"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "L=80" in text and "estimated_events=" in text
    assert not out.exists()


def test_overrides(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL), seed=11, replicas=7)
    assert (cfg.master_seed, cfg.replicas) == (11, 7)


def test_csv_schema(tmp_path):
    assert main([str(write(tmp_path, MINIMAL)), "-o", str(tmp_path)]) == EXIT_OK
    rows = read_rows(tmp_path / "tiny__X.csv")
    assert rows[0] == HEADER
    body = rows[1:]
    assert {r[2] for r in body} == {"0.5", "1.0"}
    assert {r[3] for r in body} >= {"mean", "var", "skewness", "kurtosis", "second_moment"}
    assert all(r[0] == "tiny" and r[1] == "X" and r[7] == "20" for r in body)


def test_csv_byte_identical_across_runs_and_threads(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([str(SMOKE), "-o", str(a)]) == EXIT_OK
    assert main([str(SMOKE), "-o", str(b), "--threads", "3"]) == EXIT_OK
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_seed_override_changes_output(tmp_path):
    main([str(SMOKE), "-o", str(tmp_path / "a")])
    main([str(SMOKE), "-o", str(tmp_path / "b"), "--seed", "8"])
    assert ((tmp_path / "a" / "smoke__X.csv").read_bytes()
            != (tmp_path / "b" / "smoke__X.csv").read_bytes())


def test_report_entries_reference_experiment(tmp_path):
    assert main([str(SMOKE), "-o", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "acceptance.json").read_text())
    assert report["format"] == REPORT_FORMAT
    names = [e["name"] for e in report["entries"]]
    assert names == ["current_rate", "pathwise_identities"]
    for e in report["entries"]:
        assert e["experiment"] == "smoke"
        assert set(e) >= {"name", "measured", "expected", "tolerance", "pass"}


def test_failing_expectation_exits_1(tmp_path):
    text = MINIMAL + """
[expect impossible]
target = X@1.0
stat = var
value = 100
rel_tol = 0.01
"""
    assert main([str(write(tmp_path, text)), "-o", str(tmp_path / "out")]) == EXIT_FAIL
    entry = json.loads((tmp_path / "out" / "acceptance.json").read_text())["entries"][0]
    assert entry["pass"] is False and entry["experiment"] == "tiny"


def test_trace_written(tmp_path):
    trace = tmp_path / "trace.bin"
    assert main([str(write(tmp_path, MINIMAL)), "-o", str(tmp_path), "--trace",
                 str(trace)]) == EXIT_OK
    events = read_trace(trace)
    assert events.size > 0 and 0.0 <= events["time"].min() and events["time"].max() <= 20.0


def test_bundled_configs_parse():
    for name in ("tagged_clt.cfg", "current_cov.cfg", "smoke.cfg"):
        cfg = load_config(bundled_config(name))
        assert cfg.name == name.removesuffix(".cfg")


@pytest.mark.slow
def test_bundled_tagged_clt_variance_ci_covers_half():
    _, outcome, out = bundled("tagged_clt.cfg")
    rows = read_rows(out / "tagged_clt__X.csv")
    var = next(r for r in rows if r[2] == "1.0" and r[3] == "var")
    assert int(var[7]) == 2000
    assert float(var[5]) <= 0.5 <= float(var[6])
    assert outcome.code == EXIT_OK
