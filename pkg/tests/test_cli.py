import json

import numpy as np
import pytest

from helpers import (
    CollectionServer,
    diag_dominant_spd,
    index_csv,
    lu_solve,
    make_archive,
    mm_text,
)
from lasersolve.cli import main
from lasersolve.matrixmarket import write_matrix_market
from lasersolve.sparse import SparseMatrix, random_rhs


@pytest.fixture
def spd_file(tmp_path):
    dense = diag_dominant_spd(10, seed=77)
    path = tmp_path / "spd10.mtx"
    write_matrix_market(SparseMatrix.from_dense(dense), path)
    return dense, path


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for sub in ("solve", "emulate", "bench", "fetch", "info"):
        assert sub in out


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["solve"]) == 2  # --matrix is required
    assert main(["solve", "--matrix", "x.mtx", "--solver", "sor"]) == 2


def test_solve_subcommand(tmp_path, spd_file, capsys):
    dense, path = spd_file
    out_json = tmp_path / "solution.json"
    code = main([
        "solve", "--matrix", str(path), "--solver", "cg",
        "--tol", "1e-8", "--rhs-seed", "5", "--out", str(out_json),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "solver: CG" in text
    assert "converged: True" in text
    doc = json.loads(out_json.read_text())
    assert doc["converged"] is True
    assert doc["rhs_seed"] == 5
    x_ref = lu_solve(dense, random_rhs(10, 5))
    assert np.allclose(doc["x"], x_ref, rtol=0, atol=1e-6)


def test_solve_nonconvergence_exit_code(spd_file):
    _, path = spd_file
    code = main([
        "solve", "--matrix", str(path), "--solver", "cg",
        "--tol", "1e-30", "--max-iterations", "2",
    ])
    assert code == 4


def test_solve_missing_file_is_other_failure(tmp_path, capsys):
    code = main(["solve", "--matrix", str(tmp_path / "nope.mtx")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_solve_parse_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.mtx"
    bad.write_text("not a matrix market file\n")
    assert main(["solve", "--matrix", str(bad)]) == 3
    assert "parse" in capsys.readouterr().err


def test_emulate_subcommand(tmp_path, spd_file, capsys):
    dense, path = spd_file
    trace = tmp_path / "trace.csv"
    out_json = tmp_path / "run.json"
    code = main([
        "emulate", "--matrix", str(path), "--rhs-seed", "3",
        "--mode", "phase", "--tol", "1e-5",
        "--trace", str(trace), "--out", str(out_json),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "mode: PhaseOnly" in text
    assert "converged: True" in text
    assert trace.read_text().startswith("roundtrip,residual,max_phase")
    doc = json.loads(out_json.read_text())
    assert doc["converged"] is True
    assert doc["time_ns"] == doc["roundtrips"] * 20
    x_ref = lu_solve(dense, random_rhs(10, 3))
    assert np.allclose(doc["x"], x_ref, rtol=0, atol=1e-3)


def test_emulate_full_mode_and_knobs(spd_file):
    _, path = spd_file
    code = main([
        "emulate", "--matrix", str(path), "--mode", "full",
        "--beta", "5e-4", "--theta-max", "0.2", "--integrator", "rk4",
        "--check-every", "50", "--tol", "1e-5",
    ])
    assert code == 0


def test_emulate_nonconvergence_exit_code(spd_file):
    _, path = spd_file
    code = main([
        "emulate", "--matrix", str(path), "--tol", "1e-5",
        "--max-roundtrips", "1", "--check-every", "1",
    ])
    assert code == 4


def test_emulate_restart_budget_exit_code(spd_file, capsys):
    _, path = spd_file
    code = main([
        "emulate", "--matrix", str(path), "--beta", "1.5",
        "--max-restarts", "0", "--tol", "1e-5",
    ])
    assert code == 4
    assert "converge" in capsys.readouterr().err


def test_bench_subcommand(tmp_path, spd_file, capsys):
    _, path = spd_file
    plan = {
        "problems": [str(path)],
        "solvers": [
            {"type": "digital", "kind": "cg"},
            {"type": "lpu"},
        ],
        "runs_per_pair": 3,
        "tol": 1e-6,
    }
    plan_path = tmp_path / "plan.json"
    plan_path.write_text(json.dumps(plan))
    report = tmp_path / "report.json"
    csv_path = tmp_path / "records.csv"
    chart = tmp_path / "chart.json"
    svg = tmp_path / "chart.svg"
    code = main([
        "bench", "--plan", str(plan_path), "--out", str(report),
        "--csv", str(csv_path), "--chart", str(chart), "--svg", str(svg),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "spd10 / CG" in text
    assert "spd10 / LPU-PhaseOnly" in text
    assert json.loads(report.read_text())["schema_version"] == "1"
    assert csv_path.read_text().startswith("problem,solver")
    assert len(json.loads(chart.read_text())["problems"]) == 1
    assert svg.read_text().startswith("<svg")


def test_bench_bad_plan_exit_code(tmp_path, capsys):
    plan_path = tmp_path / "broken.json"
    plan_path.write_text("{oops")
    assert main(["bench", "--plan", str(plan_path)]) == 2
    assert "error" in capsys.readouterr().err


@pytest.fixture
def server(tmp_path):
    srv = CollectionServer()
    mtx = mm_text([(1, 1, 4.0), (2, 2, 5.0)], 2, 2)
    srv.routes["/files/ssstats.csv"] = index_csv(
        [("HB", "tiny", 2, 2, 2)]
    ).encode()
    srv.routes["/MM/HB/tiny.tar.gz"] = make_archive("tiny", mtx)
    yield srv
    srv.close()


def test_fetch_subcommand(tmp_path, server, capsys):
    cache = tmp_path / "cache"
    code = main([
        "fetch", "tiny", "--cache-dir", str(cache),
        "--base-url", server.base_url,
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "HB/tiny" in out
    assert str(cache / "HB" / "tiny" / "tiny.mtx") in out
    assert "sha256:" in out


def test_fetch_network_failure_exit_code(tmp_path, capsys):
    code = main([
        "fetch", "tiny", "--cache-dir", str(tmp_path / "cache"),
        "--base-url", "http://127.0.0.1:9",
    ])
    assert code == 5
    assert "network" in capsys.readouterr().err


def test_fetch_unknown_name_exit_code(tmp_path, server, capsys):
    code = main([
        "fetch", "absent", "--cache-dir", str(tmp_path / "cache"),
        "--base-url", server.base_url,
    ])
    assert code == 5


def test_info_local_file(spd_file, capsys):
    _, path = spd_file
    assert main(["info", str(path)]) == 0
    out = capsys.readouterr().out
    assert "n = 10 x 10" in out
    assert "nnz =" in out
    assert "file symmetry: general" in out


def test_info_collection_entry(tmp_path, server, capsys):
    code = main([
        "info", "tiny", "--cache-dir", str(tmp_path / "cache"),
        "--base-url", server.base_url,
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "name: HB/tiny" in out
    assert "n = 2 x 2" in out
    assert "nnz = 2" in out
