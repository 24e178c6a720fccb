import json

import numpy as np
import pytest

from iwaflat import cli


def _run(tmp_path, *argv, out="out"):
    root = tmp_path / out
    before = set(root.glob("*/report.json"))
    code = cli.main([*argv, "--out", str(root)])
    new = sorted(set(root.glob("*/report.json")) - before)
    return code, (json.loads(new[0].read_text()) if new else None)


def _matrix_file(tmp_path, m, name="g.txt"):
    p = tmp_path / name
    p.write_text("\n".join(" ".join(repr(float(x)) for x in row) for row in m) + "\n")
    return str(p)


def test_decompose(tmp_path, capsys):
    path = _matrix_file(tmp_path, [[2.0, 3.0], [1.0, 2.0]])
    code, rep = _run(tmp_path, "decompose", "--matrix", path)
    assert code == cli.EXIT_OK
    assert rep["passed"] and rep["checks"] == {"reconstruction": True}
    np.testing.assert_allclose(rep["metrics"]["a_diag"], [5 ** -0.5, 5 ** 0.5])
    assert "k_part" in capsys.readouterr().out


def test_decompose_identity_and_triangular(tmp_path):
    code, rep = _run(tmp_path, "decompose", "--matrix", _matrix_file(tmp_path, np.eye(3)))
    m = rep["metrics"]
    assert code == cli.EXIT_OK
    np.testing.assert_array_equal(m["n_part"], np.eye(3))
    np.testing.assert_array_equal(m["a_diag"], np.ones(3))
    np.testing.assert_array_equal(m["k_part"], np.eye(3))
    u = [[2.0, 1.0, -3.0], [0.0, 0.5, 4.0], [0.0, 0.0, 1.0]]
    code, rep = _run(tmp_path, "decompose", "--matrix", _matrix_file(tmp_path, u, "u.txt"), out="second")
    np.testing.assert_allclose(rep["metrics"]["k_part"], np.eye(3), atol=1e-15)
    np.testing.assert_allclose(rep["metrics"]["a_diag"], [2.0, 0.5, 1.0])


def test_decompose_domain_error(tmp_path):
    path = _matrix_file(tmp_path, [[2.0, 0.0], [0.0, 2.0]])
    code, rep = _run(tmp_path, "decompose", "--matrix", path)
    assert code == cli.EXIT_DOMAIN and rep is None


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["decompose"],
    ["verify", "--n", "x"],
    ["verify", "--unknown"],
    ["verify", "--set", "novalue"],
    ["flow", "--seed", "1", "--set", "H=1,a"],
    ["verify", "--n", "2"],
    ["flow", "--n", "3"],
])
def test_parse_errors(tmp_path, argv):
    code, _ = _run(tmp_path, *argv)
    assert code == cli.EXIT_PARSE


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n 3\n")
    assert _run(tmp_path, "sl3", "--config", str(cfg))[0] == cli.EXIT_PARSE
    assert _run(tmp_path, "sl3", "--config", str(tmp_path / "missing.cfg"))[0] == cli.EXIT_PARSE


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sl3 run\nH0 = 1, 1, -2\ntol.iso = 1e-9\n")
    code, rep = _run(tmp_path, "sl3", "--config", str(cfg))
    assert code == cli.EXIT_OK
    assert rep["metrics"]["equality_case"] is True
    assert rep["config"]["tol.iso"] == 1e-9
    code, rep = _run(tmp_path, "sl3", "--config", str(cfg), "--set", "H0=3,-1,-2", out="second")
    assert rep["metrics"]["equality_case"] is False


def test_tol_flags(tmp_path):
    code, rep = _run(tmp_path, "sl3", "--tol.iso", "1e-7")
    assert code == cli.EXIT_OK and rep["config"]["tol.iso"] == 1e-7
    code, rep = _run(tmp_path, "sl3", "--tol.iso=1e-6", out="second")
    assert rep["config"]["tol.iso"] == 1e-6


def test_classify(tmp_path):
    code, rep = _run(tmp_path, "classify", "--n", "3", "--rep", "adjoint", "--seed", "4")
    assert code == cli.EXIT_OK and rep["metrics"]["generic"] is True
    path = _matrix_file(tmp_path, np.eye(2))
    code, rep = _run(tmp_path, "classify", "--matrix", path, "--seed", "0", out="second")
    assert rep["metrics"]["generic"] is False


def test_nbound_writes_csv(tmp_path):
    path = _matrix_file(tmp_path, [[1.0, 2.0], [1.0, 3.0]])
    code, rep = _run(tmp_path, "nbound", "--matrix", path, "--seed", "1")
    assert code == cli.EXIT_OK and rep["artifacts"] == ["nbound.csv"]
    # max(|a/c|, |b/d|) = max(1, 2/3)
    assert rep["metrics"]["sl2_analytic_bound"] == pytest.approx(1.0)
    assert rep["metrics"]["theoretical_bound"] == pytest.approx(1.0)
    assert list((tmp_path / "out").glob("nbound-*/nbound.csv"))


def test_nbound_upper_triangular_is_constant(tmp_path):
    u = [[1.0, 2.0, -1.0], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]]
    code, rep = _run(tmp_path, "nbound", "--matrix", _matrix_file(tmp_path, u), "--seed", "0")
    assert code == cli.EXIT_OK
    assert rep["metrics"]["observed_spread"] <= 1e-12


def test_critpoint_sl2(tmp_path):
    code, rep = _run(tmp_path, "critpoint", "--seed", "0", "--set", f"theta={np.pi / 6!r}", "--set", "H0=1,-1")
    assert code == cli.EXIT_OK
    assert rep["metrics"]["status"] == "found"
    assert rep["metrics"]["a_star"][0] == pytest.approx(np.log(3) / 4, abs=1e-8)


def test_critpoint_identity(tmp_path):
    path = _matrix_file(tmp_path, np.eye(3))
    code, rep = _run(tmp_path, "critpoint", "--matrix", path, "--seed", "0")
    assert code == cli.EXIT_OK and rep["metrics"]["status"] == "not_found"


def test_levelset(tmp_path):
    code, rep = _run(tmp_path, "levelset", "--seed", "3", "--set", "count=2", "--set", "a=0.2,0,-0.2")
    assert code == cli.EXIT_OK and len(rep["metrics"]["samples"]) == 2


def test_flow(tmp_path):
    code, rep = _run(tmp_path, "flow", "--n", "3", "--seed", "2")
    assert code == cli.EXIT_OK
    assert rep["checks"] == {"isospectral": True, "c_alpha_nonincreasing": True, "limit_matched": True}
    assert list((tmp_path / "out").glob("flow-*/trajectory.csv"))
    path = _matrix_file(tmp_path, [[0.0, 1.0], [1.0, 0.0]], "x0.txt")
    code, rep = _run(tmp_path, "flow", "--matrix", path, out="second")
    assert rep["metrics"]["report"]["permutation"] == [1, 0]


def test_flow_from_diagonal_is_constant(tmp_path):
    path = _matrix_file(tmp_path, np.diag([2.0, -0.5, -1.5]))
    code, rep = _run(tmp_path, "flow", "--matrix", path, "--set", "t_end=5")
    assert code == cli.EXIT_OK
    rows = np.loadtxt(next((tmp_path / "out").glob("flow-*/trajectory.csv")), delimiter=",", skiprows=1)
    assert np.all(rows[:, 1:] == rows[0, 1:])


def test_verify_invariant_failure(tmp_path):
    code, rep = _run(tmp_path, "verify", "--n", "2", "--seed", "0", "--tol.grad", "1e-30",
                     "--set", "size.critical=1", "--set", "size.amgm=100")
    assert code == cli.EXIT_INVARIANT
    assert rep["checks"]["height.gradient_matches_finite_differences"] is False


def test_run_dir_is_config_addressed(tmp_path):
    _run(tmp_path, "sl3")
    _run(tmp_path, "sl3")
    _run(tmp_path, "sl3", "--set", "H0=2,-1,-1")
    assert len(list((tmp_path / "out").glob("sl3-*"))) == 2


def test_strip_timing():
    rep = {"command": "x", "timing": {"timestamp": "now"}}
    assert cli.strip_timing(rep) == {"command": "x"}
    assert cli.canonical_json({"b": np.float64(1.0), "a": np.arange(2)}) == '{\n  "a": [\n    0,\n    1\n  ],\n  "b": 1.0\n}\n'
