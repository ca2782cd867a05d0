import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from frechet_infer import cli
from frechet_infer.simulation import NetworkSimConfig, gen_network_sample


def _schema(name):
    return json.loads(resources.files("frechet_infer").joinpath("schemas", name).read_text())


def _write(path, header, rows, fmt="%.17g"):
    np.savetxt(path, np.atleast_2d(rows), delimiter=",", header=",".join(header),
               comments="", fmt=fmt)


@pytest.fixture
def network_files(tmp_path):
    data = gen_network_sample(NetworkSimConfig(n=60, m=4, beta=0.3, gamma=0.3),
                              np.random.default_rng(3))
    _write(tmp_path / "X.csv", ["x1", "x2"], data.X)
    rows = data.space.to_rows(data.Y)
    _write(tmp_path / "Y.csv", [f"g{i}" for i in range(rows.shape[1])], rows)
    return tmp_path


@pytest.fixture
def euclid_files(tmp_path, rng):
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, 0.0, -1.0] + rng.normal(size=40)
    _write(tmp_path / "X.csv", ["a", "b", "c"], X)
    _write(tmp_path / "Y.csv", ["y"], y[:, None])
    return tmp_path


def test_test_global_writes_valid_report(network_files):
    d = network_files
    out = d / "r.json"
    code = cli.main(["test", "global", "--space", "laplacian", "--m", "4", "--x", str(d / "X.csv"),
                     "--y", str(d / "Y.csv"), "--K", "50", "--seed", "7", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    jsonschema.validate(report, _schema("test_report.schema.json"))
    assert 0 <= report["p_value"] <= 1 and len(report["z_scores"]) == 50
    manifest = json.loads((d / "r.json.manifest.json").read_text())
    jsonschema.validate(manifest, _schema("run_manifest.schema.json"))
    assert manifest["seed"] == 7 and manifest["config"]["m"] == 4


def test_replay_reproduces_bytes(network_files):
    d = network_files
    out = d / "r.json"
    argv = ["test", "global", "--space", "laplacian", "--m", "4", "--x", str(d / "X.csv"),
            "--y", str(d / "Y.csv"), "--out", str(out)]
    assert cli.main(argv) == 0
    first = out.read_bytes()
    manifest = json.loads((d / "r.json.manifest.json").read_text())
    assert "--seed" in manifest["argv"]  # drawn seed recorded
    out.unlink()
    assert cli.main(["replay", str(d / "r.json.manifest.json")]) == 0
    assert out.read_bytes() == first


def test_missing_m_is_input_error(network_files, capsys):
    d = network_files
    code = cli.main(["test", "global", "--space", "laplacian", "--x", str(d / "X.csv"),
                     "--y", str(d / "Y.csv"), "--out", str(d / "r.json")])
    assert code == 2
    assert "--m" in capsys.readouterr().err


def test_wrong_q_is_input_error(network_files, capsys):
    d = network_files
    code = cli.main(["test", "global", "--space", "laplacian", "--m", "3", "--x", str(d / "X.csv"),
                     "--y", str(d / "Y.csv"), "--out", str(d / "r.json")])
    assert code == 2
    assert "q != m(m-1)/2" in capsys.readouterr().err


def test_partial_uses_one_based_indices(euclid_files):
    d = euclid_files
    out = d / "p.json"
    code = cli.main(["test", "partial", "--base", "1,3", "--space", "euclidean",
                     "--x", str(d / "X.csv"), "--y", str(d / "Y.csv"), "--seed", "1",
                     "--out", str(out)])
    assert code == 0
    diag = json.loads(out.read_text())["diagnostics"]
    assert diag["base"] == [1, 3] and diag["added"] == [2]


@pytest.mark.parametrize("base", ["0", "1,2,3", "1,1", "x"])
def test_bad_base_is_input_error(euclid_files, base):
    d = euclid_files
    assert cli.main(["test", "partial", "--base", base, "--space", "euclidean",
                     "--x", str(d / "X.csv"), "--y", str(d / "Y.csv"),
                     "--out", str(d / "p.json")]) == 2


def test_non_numeric_and_ragged_rows(tmp_path):
    (tmp_path / "X.csv").write_text("a\n1\n2\nthree\n4\n")
    (tmp_path / "Y.csv").write_text("y\n1\n2\n3\n4\n")
    base = ["test", "global", "--space", "euclidean", "--x", str(tmp_path / "X.csv"),
            "--y", str(tmp_path / "Y.csv"), "--out", str(tmp_path / "r.json")]
    assert cli.main(base) == 2
    (tmp_path / "X.csv").write_text("a\n1\n2\n3,4\n4\n")
    assert cli.main(base) == 2
    assert cli.main(base[:5] + [str(tmp_path / "missing.csv")] + base[6:]) == 2


def test_invalid_response_row_reports_index(tmp_path, capsys):
    _write(tmp_path / "X.csv", ["a"], np.arange(5.0)[:, None])
    _write(tmp_path / "Y.csv", ["p", "q", "r"],
           [[0.2, 0.3, 0.5]] * 3 + [[0.5, 0.5, 0.5], [0.1, 0.1, 0.8]])
    code = cli.main(["fit", "--space", "simplex", "--x", str(tmp_path / "X.csv"),
                     "--y", str(tmp_path / "Y.csv"), "--out", str(tmp_path / "f.csv")])
    assert code == 2
    assert "row 4" in capsys.readouterr().err


def test_simplex_rows_renormalised(tmp_path):
    _write(tmp_path / "X.csv", ["a"], np.arange(5.0)[:, None])
    _write(tmp_path / "Y.csv", ["p", "q", "r"],
           [[0.2, 0.3, 0.5 + 5e-7], [0.1, 0.1, 0.8], [0.3, 0.3, 0.4], [0.6, 0.2, 0.2],
            [0.2, 0.2, 0.6]])
    assert cli.main(["fit", "--space", "simplex", "--x", str(tmp_path / "X.csv"),
                     "--y", str(tmp_path / "Y.csv"), "--out", str(tmp_path / "f.csv")]) == 0


def test_fit_matches_ols_and_roundtrips(euclid_files):
    d = euclid_files
    out = d / "f.csv"
    assert cli.main(["fit", "--space", "euclidean", "--x", str(d / "X.csv"),
                     "--y", str(d / "Y.csv"), "--out", str(out)]) == 0
    X = np.loadtxt(d / "X.csv", delimiter=",", skiprows=1)
    y = np.loadtxt(d / "Y.csv", delimiter=",", skiprows=1)
    A = np.column_stack([np.ones(len(X)), X])
    ols = A @ np.linalg.lstsq(A, y, rcond=None)[0]
    got = np.loadtxt(out, delimiter=",", skiprows=1)
    np.testing.assert_allclose(got, ols, atol=1e-10)
    summary = json.loads((d / "f.csv.summary.json").read_text())
    assert 0 <= summary["r_squared"] <= 1
    # 17 significant digits survive a text round trip exactly
    header, parsed = cli.read_numeric_csv(out)
    assert header == ["y1"]


def test_emit_ingest_exact_roundtrip(tmp_path, rng):
    vals = rng.normal(size=(5, 2)) * 10.0 ** rng.integers(-8, 8, (5, 2))
    cli.write_csv(tmp_path / "v.csv", ["a", "b"], vals.tolist())
    _, back = cli.read_numeric_csv(tmp_path / "v.csv")
    assert np.array_equal(back, vals)


def test_predict_at_mean_gives_frechet_mean(network_files):
    d = network_files
    X = np.loadtxt(d / "X.csv", delimiter=",", skiprows=1)
    _write(d / "Q.csv", ["x1", "x2"], X.mean(axis=0)[None])
    out = d / "pred.csv"
    assert cli.main(["predict", "--space", "laplacian", "--m", "4", "--x", str(d / "X.csv"),
                     "--y", str(d / "Y.csv"), "--query", str(d / "Q.csv"),
                     "--out", str(out)]) == 0
    Y = np.loadtxt(d / "Y.csv", delimiter=",", skiprows=1)
    got = np.loadtxt(out, delimiter=",", skiprows=1)
    np.testing.assert_allclose(got, Y.mean(axis=0), atol=1e-12)


def test_malformed_query_is_input_error(network_files):
    d = network_files
    (d / "Q.csv").write_text("x1\n0.5\n")
    assert cli.main(["predict", "--space", "laplacian", "--m", "4", "--x", str(d / "X.csv"),
                     "--y", str(d / "Y.csv"), "--query", str(d / "Q.csv"),
                     "--out", str(d / "p.csv")]) == 2


def test_simulate_table_and_determinism(tmp_path):
    argv = ["simulate", "--preset", "paper-network-global", "--n", "40", "--m", "4",
            "--B", "4", "--K", "5", "--seed", "1", "--threads", "1"]
    assert cli.main(argv + ["--out", str(tmp_path / "a.csv")]) == 0
    assert cli.main(argv + ["--out", str(tmp_path / "b.csv")]) == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    header = a.splitlines()[0].split(",")
    for col in ("beta", "gamma", "n", "rate", "se", "B"):
        assert col in header
    assert len(a.splitlines()) == 5


def test_simulate_unknown_preset(tmp_path):
    assert cli.main(["simulate", "--preset", "nope", "--out", str(tmp_path / "s.csv")]) == 2


def test_solver_failure_exit_code(tmp_path):
    _write(tmp_path / "X.csv", ["a"], np.arange(4.0)[:, None])
    _write(tmp_path / "Y.csv", ["u", "v"], [[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    assert cli.main(["test", "global", "--space", "sphere", "--x", str(tmp_path / "X.csv"),
                     "--y", str(tmp_path / "Y.csv"), "--out", str(tmp_path / "r.json")]) == 3
