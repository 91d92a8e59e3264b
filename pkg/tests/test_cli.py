"""End-to-end command-line checks, run in process through cli.main.

A module-wide operator cache keeps the repeated invocations cheap; the
tests cover every subcommand, the configuration precedence chain, the
documented exit codes, cache self-healing, and byte-level determinism
of the emitted files.
"""

import json
import os

import numpy as np
import pytest

from fracsing import cli
from fracsing.picard import first_eigenpair


@pytest.fixture(scope="module", autouse=True)
def shared_cache(tmp_path_factory):
    """Route every invocation in this module through one operator cache."""
    path = tmp_path_factory.mktemp("opcache")
    old = os.environ.get("FRACSING_CACHE")
    os.environ["FRACSING_CACHE"] = str(path)
    yield path
    if old is None:
        os.environ.pop("FRACSING_CACHE", None)
    else:
        os.environ["FRACSING_CACHE"] = old


def _header(path):
    with open(path, "r") as fh:
        line = fh.readline()
    assert line.startswith("# ")
    return json.loads(line[2:])


def _columns(path):
    with open(path, "r") as fh:
        fh.readline()
        return fh.readline().strip().split(",")


def _data(path):
    return np.loadtxt(path, delimiter=",", skiprows=2)


SOLVE_ARGS = ["solve", "--k", "0.05", "--n-nodes", "200"]


@pytest.fixture(scope="module")
def solve_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    assert cli.main(SOLVE_ARGS + ["-o", str(out)]) == 0
    return out


def test_solve_writes_profile_and_report(solve_dir, op200):
    head = _header(solve_dir / "solve.csv")
    assert head["kind"] == "profile"
    prov = head["provenance"]
    assert len(prov["config_hash"]) == 16
    assert prov["grid"]["n_nodes"] == 200
    assert prov["lambda1"] == pytest.approx(
        first_eigenpair(op200)["lambda1"], rel=1e-12
    )
    assert _columns(solve_dir / "solve.csv") == [
        "r",
        "u_total",
        "u_smooth",
        "u_singular",
    ]
    data = _data(solve_dir / "solve.csv")
    assert data.shape == (200, 4)
    assert np.allclose(data[:, 1], data[:, 2] + data[:, 3], rtol=1e-12, atol=1e-14)

    payload = json.loads((solve_dir / "solve.json").read_text())
    assert payload["status"] == "Converged"
    assert payload["sup_residual"] <= 1e-10
    assert payload["barrier_certified"] is True
    assert payload["classification"]["verdict"] == "DiracSingularity"
    assert payload["classification"]["k_pairing_estimate"] == pytest.approx(
        0.05, rel=0.02
    )


def test_solve_reruns_are_byte_identical(solve_dir):
    before = {
        name: (solve_dir / name).read_bytes()
        for name in ("solve.csv", "solve.json")
    }
    assert cli.main(SOLVE_ARGS + ["-o", str(solve_dir)]) == 0
    for name, blob in before.items():
        assert (solve_dir / name).read_bytes() == blob


def test_classify_round_trips_the_profile(solve_dir, tmp_path):
    rc = cli.main(
        ["classify", str(solve_dir / "solve.csv"), "-o", str(tmp_path)]
    )
    assert rc == 0
    payload = json.loads((tmp_path / "classify.json").read_text())
    assert payload["verdict"] == "DiracSingularity"
    assert payload["k_pairing_estimate"] == pytest.approx(0.05, rel=0.02)
    # The echoed profile is byte-identical to its source.
    assert (tmp_path / "classify_profile.csv").read_bytes() == (
        solve_dir / "solve.csv"
    ).read_bytes()


def test_classify_missing_profile_exits_1(tmp_path):
    rc = cli.main(["classify", str(tmp_path / "absent.csv"), "-o", str(tmp_path)])
    assert rc == 1


def test_eigen_matches_the_library_route(tmp_path, op200):
    assert cli.main(["eigen", "--n-nodes", "200", "-o", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "eigen.json").read_text())
    lam_ref = first_eigenpair(op200)["lambda1"]
    assert payload["lambda1"] == pytest.approx(lam_ref, rel=1e-12)
    assert _header(tmp_path / "eigen.csv")["lambda1"] == payload["lambda1"]
    data = _data(tmp_path / "eigen.csv")
    assert np.all(data[:, 1] > 0.0)


def test_kstar_brackets_the_extremal_strength(tmp_path):
    assert cli.main(["kstar", "--n-nodes", "200", "-o", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "kstar.json").read_text())
    assert 0.0 < payload["k_lo"] < payload["k_hi"]
    assert payload["relative_width"] <= 1e-3
    row = _data(tmp_path / "kstar.csv")
    assert row[0] == payload["k_lo"] and row[1] == payload["k_hi"]


def test_stability_scan_decreases(tmp_path):
    rc = cli.main(
        ["stability", "--n-nodes", "200", "--n-samples", "4", "-o", str(tmp_path)]
    )
    assert rc == 0
    payload = json.loads((tmp_path / "stability.json").read_text())
    assert payload["slope"] > 0.0
    data = _data(tmp_path / "stability.csv")
    assert data.shape == (4, 3)
    assert np.all(np.diff(data[:, 1]) < 0.0)
    assert np.allclose(data[:, 2], 1.0 - 1.0 / data[:, 1], rtol=1e-12)


def test_mountain_pass_command(tmp_path):
    rc = cli.main(
        ["mountain-pass", "--k", "1.2", "--n-nodes", "200", "-o", str(tmp_path)]
    )
    assert rc == 0
    payload = json.loads((tmp_path / "mountain_pass.json").read_text())
    assert payload["energy"] >= payload["level_lower_bound"] > 0.0
    assert payload["method"] == "MountainPassAlgorithm"
    data = _data(tmp_path / "mountain_pass.csv")
    assert _columns(tmp_path / "mountain_pass.csv") == [
        "r",
        "u_min",
        "v",
        "second_solution",
    ]
    assert np.all(data[:, 3] > data[:, 1])
    assert np.allclose(data[:, 3], data[:, 1] + data[:, 2], rtol=1e-10, atol=1e-12)
    trace = _data(tmp_path / "mountain_pass_trace.csv")
    assert trace.shape[1] == 3
    assert trace[-1, 2] <= 1e-10


def test_bifurcation_table(tmp_path):
    rc = cli.main(
        ["bifurcation", "--n-nodes", "200", "--n-samples", "3", "-o", str(tmp_path)]
    )
    assert rc == 0
    payload = json.loads((tmp_path / "bifurcation.json").read_text())
    assert len(payload["rows"]) == 3
    data = _data(tmp_path / "bifurcation.csv")
    assert data.shape == (3, 6)
    # Minimal branch grows with k while the second branch comes down.
    assert np.all(np.diff(data[:, 0]) > 0.0)
    assert np.all(np.diff(data[:, 1]) > 0.0)
    assert np.all(np.diff(data[:, 2]) < 0.0)
    finite = ~np.isnan(data[:, 3])
    assert np.any(finite)
    assert np.all(data[finite, 3] > data[finite, 1])


def test_emit_plots_writes_long_format(tmp_path):
    rc = cli.main(
        ["eigen", "--n-nodes", "200", "--emit-plots", "-o", str(tmp_path)]
    )
    assert rc == 0
    assert (tmp_path / "eigen_long.csv").exists()
    assert _columns(tmp_path / "eigen_long.csv") == ["series", "r", "value"]


def test_configuration_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"k": 0.02}, "grid": {"n_nodes": 200}}))
    base = ["eigen", "--config", str(cfg), "-o", str(tmp_path)]

    assert cli.main(base) == 0
    conf = json.loads((tmp_path / "eigen.json").read_text())["provenance"]["config"]
    assert conf["params"]["k"] == 0.02
    assert conf["grid"]["n_nodes"] == 200

    assert cli.main(base + ["--set", "params.k=0.03"]) == 0
    conf = json.loads((tmp_path / "eigen.json").read_text())["provenance"]["config"]
    assert conf["params"]["k"] == 0.03

    assert cli.main(base + ["--set", "params.k=0.03", "--k", "0.04"]) == 0
    conf = json.loads((tmp_path / "eigen.json").read_text())["provenance"]["config"]
    assert conf["params"]["k"] == 0.04


def test_corrupt_cache_is_rebuilt(shared_cache, tmp_path, op200):
    cached = sorted(shared_cache.iterdir())
    assert cached
    victim = cached[0]
    victim.write_bytes(b"not an operator payload")
    assert cli.main(["eigen", "--n-nodes", "200", "-o", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "eigen.json").read_text())
    assert payload["lambda1"] == pytest.approx(
        first_eigenpair(op200)["lambda1"], rel=1e-12
    )
    # The poisoned entry was silently regenerated.
    assert victim.stat().st_size > 1000


def test_exit_codes_for_user_errors(tmp_path):
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["eigen", "--set", "params.alpha"]) == 1
    assert cli.main(["eigen", "--config", str(tmp_path / "none.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["eigen", "--config", str(bad)]) == 1


def test_supercritical_source_exits_2(tmp_path):
    rc = cli.main(
        [
            "solve",
            "--alpha",
            "0.6",
            "--p",
            "6",
            "--k",
            "0.01",
            "-o",
            str(tmp_path),
        ]
    )
    assert rc == 2
