import shutil
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from contact_weakkam import csvio
from contact_weakkam.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from contact_weakkam.config import ConfigError, RunConfig, parse_config, with_overrides
from contact_weakkam.model import TorusGrid1D, free_particle
from contact_weakkam.weakkam import GridFunction, residual


# --- configuration ----------------------------------------------------------------


def test_minimal_config_takes_defaults():
    cfg = parse_config("[hamiltonian]\npreset = pendulum_example\n")
    assert cfg == RunConfig()
    assert (cfg.grid.n_nodes, cfg.grid.m_nodes, cfg.grid.v_max) == (512, 65, 4.0)
    assert cfg.solver.dt is None and cfg.solver.tol_fix == 1e-8 and cfg.solver.max_iter == 200_000


def test_piecewise_needs_period_two():
    cfg = parse_config("[hamiltonian]\npreset = piecewise_example\n[grid]\nperiod = 2\n")
    assert cfg.period == 2.0
    assert parse_config("[hamiltonian]\npreset = piecewise_example\n").period == 2.0
    with pytest.raises(ConfigError) as err:
        parse_config("[hamiltonian]\npreset = piecewise_example\n[grid]\nperiod = 1\n")
    assert err.value.line == 4


@pytest.mark.parametrize("text,line", [
    ("[grid]\nn_nodes = -4\n", 2),
    ("# header\n\n[grid]\nn_nodse = 64\n", 4),
    ("[gird]\n", 1),
    ("[grid]\nv_max = fast\n", 2),
    ("[grid]\nm_nodes = 64\n", 2),
    ("[grid]\nn_nodes = 64\nn_nodes = 128\n", 3),
    ("n_nodes = 64\n", 1),
    ("[scan]\nmethod = magic\n", 2),
    ("[hamiltonian]\nkind = mechanical_contact\ncoupling_const = -1\n", 2),
])
def test_errors_name_their_line(text, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_custom_hamiltonian_and_overrides():
    text = """
[hamiltonian]
kind = mechanical_contact
potential_cos = 1:-1    # -cos 2 pi x
coupling_const = 1
[grid]
n_nodes = 128
[output]
dir = elsewhere
"""
    cfg = parse_config(text)
    spec = cfg.build_spec()
    assert spec.V(0.0) == pytest.approx(-1.0) and spec.alpha(0.3) == 1.0
    assert cfg.output == "elsewhere"
    cfg2 = with_overrides(cfg, grid={"n_nodes": 64})
    assert cfg2.grid.n_nodes == 64 and cfg.grid.n_nodes == 128


# --- CSV ------------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(values=arrays(np.float64, 32, elements=st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=True)))
def test_solution_csv_round_trip_is_bit_exact(tmp_path_factory, values):
    grid = TorusGrid1D(1.0, 32)
    u = GridFunction(grid, values)
    path = tmp_path_factory.mktemp("csv") / "u.csv"
    csvio.write_solution(path, u, residual(u, 0.0, free_particle()))
    back = csvio.read_solution(path, 1.0)
    assert back.values.tobytes() == values.tobytes()
    header, data = csvio.read_table(path)
    assert tuple(header) == csvio.SOLUTION_COLUMNS and data.shape == (32, 5)


def test_read_solution_rejects_wrong_grid(tmp_path):
    path = csvio.write_table(tmp_path / "u.csv", ("x", "u"), [(0.0, 1.0), (0.3, 1.0)] * 8)
    with pytest.raises(ValueError):
        csvio.read_solution(path, 1.0)


def test_report_round_trip(tmp_path):
    path = csvio.write_report(tmp_path / "report.txt", {"a": 0.1, "ok": True, "name": "x=y"})
    rep = csvio.read_report(path)
    assert list(rep)[0] == "timestamp"
    assert rep["a"] == "0.10000000000000001" and rep["ok"] == "true" and rep["name"] == "x=y"


# --- subcommands ------------------------------------------------------------------------


def _run(tmp_path, *argv):
    code = main(["--out", str(tmp_path), *argv])
    return code, csvio.read_report(tmp_path / "report.txt") if (tmp_path / "report.txt").exists() else {}


def test_solve_below_critical_value_is_a_finding(tmp_path):
    code, rep = _run(tmp_path, "solve", "--c", "-1")
    assert code == EXIT_OK
    assert rep["solve.status"] == "diverged" and rep["finding"].startswith("diverged")
    assert not (tmp_path / "solution.csv").exists()


def test_solve_then_compare_from_files(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "solve", "--c", "0")[0] == EXIT_OK
    assert _run(b, "solve", "--c", "0", "--init", "const:-1")[0] == EXIT_OK
    code, rep = _run(tmp_path / "cmp", "compare", "--u1", str(b / "solution.csv"), "--u2",
                     str(a / "solution.csv"), "--theta", "0")
    assert code == EXIT_OK
    assert rep["failed_checks"] == "none"


def test_usage_and_config_errors_exit_one(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[grid]\nn_nodes = -4\n")
    assert main(["--config", str(bad), "--out", str(tmp_path), "solve"]) == EXIT_USAGE
    assert main(["solve", "--c", "zero"]) == EXIT_USAGE
    assert main(["--out", str(tmp_path), "solve", "--init", "nonsense"]) == EXIT_USAGE
    assert main(["--out", str(tmp_path), "compare", "--u1", "missing.csv", "--u2", "missing.csv",
                 "--theta", "0"]) == EXIT_USAGE
    assert EXIT_FAILED == 2


def test_mather_subcommand(tmp_path):
    code, rep = _run(tmp_path, "mather", "--theta", "0")
    assert code == EXIT_OK
    _, data = csvio.read_table(tmp_path / "measure_0.csv")
    assert data[:, 2].sum() == pytest.approx(1.0)


@pytest.mark.parametrize("name", ["fig1", "fig2"])
def test_examples_pass(tmp_path, name):
    code, rep = _run(tmp_path, "example", "--name", name)
    assert code == EXIT_OK, rep.get("failed_checks")
    assert rep["failed_checks"] == "none"


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--out", str(a), "example", "--name", "fig1"]) == EXIT_OK
    assert main(["--out", str(b), "example", "--name", "fig1"]) == EXIT_OK
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir()) and len(files) > 5
    for name in files:
        ta, tb = (a / name).read_bytes(), (b / name).read_bytes()
        if name == "report.txt":
            ta, tb = ta.split(b"\n", 1)[1], tb.split(b"\n", 1)[1]  # drop the timestamp line
        assert ta == tb, name
    assert b"timestamp" not in b"".join((a / n).read_bytes() for n in files if n != "report.txt")


def test_console_script_runs(tmp_path):
    exe = shutil.which("contact-weakkam")
    cmd = [exe] if exe else [sys.executable, "-m", "contact_weakkam.cli"]
    proc = subprocess.run(cmd + ["--out", str(tmp_path), "--preset", "free_particle", "solve", "--c", "0"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "solution.csv").exists()
