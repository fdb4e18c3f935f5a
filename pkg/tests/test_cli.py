import csv
import json

import numpy as np
import pytest

from pqcsep import cli
from pqcsep.cli import main
from pqcsep.stateio import read_state, write_state
from pqcsep.statelib import bell_chain, ghz, rho3, rho_g


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestPool:
    @pytest.mark.parametrize("n,L", [(4, 3), (8, 9), (9, 12)])
    def test_json_counts(self, capsys, n, L):
        code, out, _ = _run(capsys, "pool", "--n", n, "--format", "json")
        rep = json.loads(out)
        assert code == 0
        assert rep["L"] == L and len(rep["p2"]) == L
        assert rep["param_counts"]["p1_full3"] == 3 * n

    def test_text(self, capsys):
        code, out, _ = _run(capsys, "pool", "--n", 4)
        assert code == 0
        assert "L = 3" in out and "V2: (1,4) (2,3)" in out

    @pytest.mark.parametrize("n", [1, 15, -3])
    def test_invalid_n(self, capsys, n):
        code, _, err = _run(capsys, "pool", "--n", n)
        assert code == 2 and "error" in err


class TestStateGen:
    def test_ghz(self, capsys, tmp_path):
        out = tmp_path / "ghz.json"
        assert _run(capsys, "state", "gen", "--spec", '{"family": "GHZ", "n_qubits": 3}', "--out", out)[0] == 0
        doc = json.loads(out.read_text())
        assert doc["kind"] == "pure" and len(doc["data"]) == 8
        np.testing.assert_array_equal(read_state(out).amplitudes, ghz(3).amplitudes)

    def test_noisy_bell_chain_from_file_spec(self, capsys, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"family": "BELL_CHAIN", "pairs": 5, "q": 0.4}))
        out = tmp_path / "rho.json.gz"
        assert _run(capsys, "state", "gen", "--spec", spec, "--out", out, "--gzip")[0] == 0
        np.testing.assert_array_equal(read_state(out).matrix, rho_g(0.4).matrix)

    def test_product_flags(self, capsys, tmp_path):
        out = tmp_path / "p.json"
        code = _run(capsys, "state", "gen", "--family", "PRODUCT_RANDOM", "--n", 6, "--seed", 1, "--out", out)[0]
        assert code == 0
        from pqcsep.qcore import purity, reduced_density

        s = read_state(out)
        assert all(purity(reduced_density(s, [q])) == pytest.approx(1.0) for q in range(1, 7))

    @pytest.mark.parametrize("spec", ['{"family": "GHZ"}', '{"family": "X", "n_qubits": 2}', "not json"])
    def test_invalid(self, capsys, tmp_path, spec):
        code, _, err = _run(capsys, "state", "gen", "--spec", spec, "--out", tmp_path / "x.json")
        assert code == 2 and err


class TestDetect:
    @pytest.fixture
    def bell_file(self, tmp_path):
        path = tmp_path / "bell.json"
        write_state(path, bell_chain(2))
        return path

    def test_pure_bell_chain(self, capsys, tmp_path, bell_file):
        out = tmp_path / "v.json"
        code, _, _ = _run(capsys, "detect", "--mode", "pure", "--state", bell_file, "--out", out)
        rep = json.loads(out.read_text())
        assert code == 0
        assert rep["status"] == "DETECTED" and rep["k"] == 2
        assert rep["mode"] == "pure" and rep["seed"] == 0
        assert rep["config"]["optimizer"]["restarts"] == 10

    def test_pure_mode_on_density_file(self, capsys, tmp_path):
        path = tmp_path / "rho.json"
        write_state(path, rho3(0.5))
        code, _, err = _run(capsys, "detect", "--mode", "pure", "--state", path)
        assert code == 2 and "pure" in err

    def test_malformed_file(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"kind": "pure", "n_qubits": 1, "data": [[1, 0], [1, 0]]}')
        code, _, err = _run(capsys, "detect", "--mode", "pure", "--state", path)
        assert code == 2 and err.startswith("error:")

    def test_unknown_config_key(self, capsys, tmp_path, bell_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 1, "bogus": True}))
        code, _, err = _run(capsys, "detect", "--mode", "pure", "--state", bell_file, "--config", cfg)
        assert code == 2 and "bogus" in err

    def test_config_file_and_flag_override(self, capsys, tmp_path, bell_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 1, "optimizer": {"restarts": 3}}))
        code, out, _ = _run(
            capsys, "detect", "--mode", "pure", "--state", bell_file, "--config", cfg, "--seed", 9
        )
        rep = json.loads(out)
        assert code == 0 and rep["seed"] == 9
        assert rep["config"]["optimizer"]["restarts"] == 3

    def test_shots_and_trace(self, capsys, tmp_path, bell_file):
        trace = tmp_path / "trace.csv"
        code, out, _ = _run(
            capsys, "detect", "--mode", "pure", "--state", bell_file, "--shots", 1000, "--trace-csv", trace
        )
        rep = json.loads(out)
        assert code == 0
        assert rep["shot_estimate"]["shots"] == 1000
        assert rep["shot_estimate"]["estimate"] > 0.99
        rows = list(csv.reader(trace.open()))
        assert rows[0] == ["stage", "restart", "iteration", "cost"] and len(rows) > 1

    def test_mixed_full_rho3_low_q_inconclusive(self, capsys, tmp_path):
        path = tmp_path / "rho.json"
        write_state(path, rho3(0.5))
        code, out, _ = _run(capsys, "detect", "--mode", "mixed-full", "--state", path)
        assert code == 3
        assert json.loads(out)["status"] == "INCONCLUSIVE"

    def test_mixed_k_rho3(self, capsys, tmp_path):
        path = tmp_path / "rho.json"
        write_state(path, rho3(0.7))
        code, out, _ = _run(capsys, "detect", "--mode", "mixed-k", "--state", path, "--s-max", 3)
        rep = json.loads(out)
        assert code == 0 and rep["k"] == 2

    def test_noisy_mode_promotes_pure_file(self, capsys, bell_file):
        code, out, _ = _run(capsys, "detect", "--mode", "noisy", "--state", bell_file)
        rep = json.loads(out)
        assert code == 0 and rep["partition"] == [[1, 2], [3, 4]]

    def test_report_is_reproducible(self, capsys, tmp_path, bell_file):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        _run(capsys, "detect", "--mode", "pure", "--state", bell_file, "--out", a, "--seed", 4)
        _run(capsys, "detect", "--mode", "pure", "--state", bell_file, "--out", b, "--seed", 4)
        assert a.read_bytes() == b.read_bytes()


class TestReproduce:
    def test_fig3a(self, capsys, tmp_path):
        code, out, _ = _run(capsys, "reproduce", "--experiment", "fig3a", "--out", tmp_path)
        assert code == 0 and "FAIL" not in out
        rows = list(csv.DictReader((tmp_path / "fig3a.csv").open()))
        assert len(rows) == 24
        row = next(r for r in rows if r["q"] == "0.8" and r["m"] == "5")
        assert float(row["infidelity"]) < 1e-8
        assert json.loads((tmp_path / "fig3a_report.json").read_text())["passed"]

    def test_violated_bound_exits_1(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setitem(cli.EXPERIMENTS, "fig3a", lambda out, cfg: {"checks": [("forced", False)]})
        code, out, _ = _run(capsys, "reproduce", "--experiment", "fig3a", "--out", tmp_path)
        assert code == 1 and "[FAIL]" in out

    def test_alg2_demo(self, capsys, tmp_path):
        code, out, _ = _run(capsys, "reproduce", "--experiment", "alg2-demo", "--out", tmp_path)
        assert code == 0, out
        rows = list(csv.DictReader((tmp_path / "alg2_members.csv").open()))
        assert any(float(r["purity"]) < 0.99 for r in rows)


def test_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
