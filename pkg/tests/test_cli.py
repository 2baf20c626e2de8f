import json
import os
import warnings

import pytest

from singdiff.cli import main, run, write_csv
from singdiff.plotting import plot_emit

SIMULATE = """
kind = "simulate"
[grid]
horizon = 1.0
n_steps = 20
[law]
type = "gaussian"
mean = [0.0]
variance = [1.0]
[drift]
family = "zero"
[seed]
master = 3
[run]
N = 16
"""

PAIR = """
kind = "simulate"
[grid]
n_steps = 20
[drift]
family = "pair"
exponent = {alpha}
sign = -1
truncation = 0.05
[run]
N = 16
"""

COLLAPSE = """
kind = "mckv-solve"
[grid]
n_steps = 32
[law]
type = "point"
point = [0.0]
[drift]
family = "constant"
c = [40.0]
[run]
M = 400
sampling = "iid"
"""

GIBBS = """
kind = "gibbs-lab"
[gibbs]
mu0 = [0.5, 0.5]
V_csv = "V.csv"
N = 20
N_list = [20, 40]
grid_resolution = 50
"""


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _files(out, skip=()):
    return {f: open(os.path.join(out, f), "rb").read()
            for f in sorted(os.listdir(out)) if f not in skip}


def test_zero_drift_simulate(tmp_path, capsys):
    cfg = _write(tmp_path, "sim.toml", SIMULATE)
    code = main(["run", cfg, "--out-dir", str(tmp_path / "out")])
    assert code == 0
    out = tmp_path / "out"
    assert (out / "ensemble.bin").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["seeds"]["master"] == 3
    assert manifest["config"]["kind"] == "simulate"
    assert "library_version" in manifest
    assert (out / "variance.svg").read_text().lstrip().startswith("<?xml")


def test_inadmissible_kernel_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.toml", PAIR.format(alpha=-0.6))
    assert main(["run", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "alpha > -1/2" in err and "d = 1" in err
    assert main(["validate", cfg]) == 2
    assert main(["validate", _write(tmp_path, "ok.toml", PAIR.format(alpha=-0.4))]) == 0


def test_override_allows_inadmissible(tmp_path):
    text = PAIR.format(alpha=-0.6) + "allow_inadmissible = true\n"
    code, _ = run(_write(tmp_path, "ovr.toml", text), tmp_path / "o")
    assert code == 0


def test_numerical_failure_exit_code(tmp_path, capsys):
    code, out = run(_write(tmp_path, "c.toml", COLLAPSE), tmp_path / "o")
    assert code == 3
    assert "numerical failure" in json.load(open(os.path.join(out, "manifest.json")))["status"]


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, "sim.toml", PAIR.format(alpha=-0.4))
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    # the manifest records the output directory, everything else must match
    skip = ("manifest.json",)
    assert _files(tmp_path / "a", skip) == _files(tmp_path / "b", skip)
    # the manifest alone reproduces the run
    run(str(tmp_path / "a" / "manifest.json"), tmp_path / "c")
    assert _files(tmp_path / "a", skip) == _files(tmp_path / "c", skip)


def test_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, "sim.toml", SIMULATE)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b", seed_override=4)
    assert _files(tmp_path / "a")["ensemble.bin"] != _files(tmp_path / "b")["ensemble.bin"]


def test_gibbs_lab_with_csv_table(tmp_path):
    (tmp_path / "V.csv").write_text("1,0\n0,1\n")
    code, out = run(_write(tmp_path, "g.toml", GIBBS), tmp_path / "o")
    assert code == 0
    files = _files(out)
    assert {"ldp_gap.csv", "partition.csv", "hoeffding.csv", "ldp_gap.svg"} <= set(files)
    manifest = json.loads(files["manifest.json"])
    assert manifest["config"]["gibbs"]["V"] == [[1.0, 0.0], [0.0, 1.0]]


def test_config_errors(tmp_path):
    assert run(_write(tmp_path, "k.toml", 'kind = "nope"\n'))[0] == 2
    assert run(_write(tmp_path, "t.toml", SIMULATE + "typo = 1\n"))[0] == 2
    assert run(str(tmp_path / "missing.toml"))[0] == 2
    assert run(_write(tmp_path, "x.toml", "kind = \n"))[0] == 2


def test_write_csv_round_trip(tmp_path):
    p = write_csv(tmp_path / "t.csv", [{"a": 0.1, "b": 2}])
    assert open(p).read().splitlines() == ["a,b", "0.1,2"]


def test_plot_single_row(tmp_path):
    p = plot_emit([{"iteration": 1, "distance": 0.5}], "convergence", tmp_path / "one.svg")
    assert p and os.path.getsize(p) > 0


def test_plot_kinds_are_deterministic(tmp_path):
    table = [{"N": n, "mean_distance": 1 / n**0.5, "stderr": 0.01} for n in (32, 128, 512)]
    a = plot_emit(table, "loglog", tmp_path / "a.svg", reference_slope=-0.5)
    b = plot_emit(table, "loglog", tmp_path / "b.svg", reference_slope=-0.5)
    assert open(a, "rb").read() == open(b, "rb").read()
    trace = [{"rank": i, "weight": 2.0 / i} for i in range(1, 20)]
    assert plot_emit(trace, "weights-trace", tmp_path / "w.svg")


def test_plot_empty_table_warns(tmp_path):
    with pytest.warns(UserWarning, match="empty table"):
        assert plot_emit([], "loglog", tmp_path / "none.svg") is None
    assert not (tmp_path / "none.svg").exists()
    with pytest.raises(ValueError):
        plot_emit([{"x": 1}], "pie", tmp_path / "p.svg")
