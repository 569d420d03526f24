import json

import numpy as np
import pytest

from opstar import __version__
from opstar.algebra import AlgebraShape, Element
from opstar.cli import main, resolve_seed
from opstar.io import save_superop, superop_to_json
from opstar.preserver import random_invertible_map, random_op_bijection
from opstar.superop import SuperOp, identity


@pytest.fixture
def ops(tmp_path):
    s = AlgebraShape([2, 1])
    paths = {
        "identity": tmp_path / "identity.json",
        "good": tmp_path / "good.json",
        "bad": tmp_path / "bad.json",
        "trunc": tmp_path / "trunc.json",
    }
    save_superop(identity(s), paths["identity"])
    save_superop(random_op_bijection(s, 3).T, paths["good"])
    save_superop(random_invertible_map(s, 3), paths["bad"])
    paths["trunc"].write_text(paths["identity"].read_text()[:60])
    m2 = AlgebraShape([2])
    one = Element.identity(m2)
    e22 = Element(m2, (np.diag([0.0, 1.0]),))
    singular = identity(m2) - 0.5 * SuperOp(m2, m2, np.outer(e22.vec(), one.vec().conj()))
    paths["singular"] = tmp_path / "singular.json"
    save_superop(singular, paths["singular"])
    return paths


def run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(argv + ["--json", str(out), "--quiet"])
    data = json.loads(out.read_text()) if out.exists() else None
    return code, data


class TestCheckOp:
    def test_identity(self, ops, tmp_path):
        code, rep = run(["check-op", str(ops["identity"])], tmp_path)
        assert code == 0 and rep["verdict"]
        assert rep["version"] == __version__

    def test_non_op_has_witness_pair(self, ops, tmp_path):
        code, rep = run(["check-op", str(ops["bad"])], tmp_path)
        assert code == 1
        witnesses = [c["witness"] for c in rep["checks"] if "witness" in c]
        assert witnesses and {"a", "b"} <= set(witnesses[0])

    def test_randomized(self, ops, tmp_path):
        code, rep = run(["check-op", str(ops["bad"]), "--randomized", "--samples", "50"], tmp_path)
        assert code == 1 and rep["route"] == "randomized"
        code, _ = run(["check-op", str(ops["good"]), "--randomized"], tmp_path)
        assert code == 0

    def test_truncated_json(self, ops, capsys):
        assert main(["check-op", str(ops["trunc"])]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check-op", str(tmp_path / "nope.json")]) == 2

    def test_modes_are_exclusive(self, ops):
        assert main(["check-op", str(ops["identity"]), "--exact", "--randomized"]) == 2

    def test_tolerance_override_echoed(self, ops, tmp_path, capsys):
        code, rep = run(["check-op", str(ops["identity"]), "--tol", "1e-6"], tmp_path)
        assert code == 0 and rep["tolerances"]["eq_tol"] == 1e-6
        main(["check-op", str(ops["identity"]), "--tol", "1e-6"])
        assert "tolerance overridden" in capsys.readouterr().out
        assert main(["check-op", str(ops["identity"]), "--tol", "-1"]) == 2


class TestDecompose:
    def test_identity(self, ops, tmp_path):
        out = tmp_path / "dec.json"
        assert main(["decompose", str(ops["identity"]), "--out", str(out), "-q"]) == 0
        dec = json.loads(out.read_text())
        n = 5
        np.testing.assert_allclose(np.array(dec["S"]["matrix"])[..., 0], np.eye(n))
        assert dec["h"]["blocks"][0] == [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]
        assert dec["r"] == dec["h"]
        assert dec["verdict"] is True

    def test_round_trip(self, ops, tmp_path):
        code, rep = run(["decompose", str(ops["good"])], tmp_path)
        assert code == 0
        assert max(c["residual"] for c in rep["checks"]) <= 1e-9

    def test_singular_unit_image(self, ops, tmp_path):
        code, rep = run(["decompose", str(ops["singular"])], tmp_path)
        assert code == 1
        assert "h not invertible" in rep["checks"][0]["reason"]

    def test_non_bijective_fails(self, tmp_path):
        p = tmp_path / "rect.json"
        T = SuperOp(AlgebraShape([2]), AlgebraShape([1]), np.ones((1, 4)))
        p.write_text(json.dumps(superop_to_json(T)))
        assert main(["decompose", str(p)]) == 1


class TestSemigroup:
    def test_zero_all(self, tmp_path):
        code, rep = run(["semigroup", "--generator", "zero", "--checks", "all"], tmp_path)
        assert code == 0
        assert all(c["verdict"] for c in rep["checks"])

    def test_box_e_pedersen(self, tmp_path):
        code, rep = run(["semigroup", "--generator", "box-e", "--checks", "pedersen"], tmp_path)
        assert code == 0
        flags = {c["name"]: c["verdict"] for c in rep["checks"]}
        assert flags.pop("pedersen_agreement") is True
        assert not any(flags.values()) and len(flags) == 4

    def test_box_v_pedersen(self, tmp_path):
        code, rep = run(["semigroup", "--generator", "box-v", "--checks", "pedersen"], tmp_path)
        assert code == 0
        assert all(c["verdict"] for c in rep["checks"])

    def test_wolff_all_skips_isometry_checks(self, tmp_path):
        code, rep = run(["semigroup", "--generator", "wolff", "--shape", "2,1", "--seed", "3"],
                        tmp_path)
        assert code == 0
        skipped = {c["group"] for c in rep["checks"] if c.get("skipped")}
        assert skipped == {"pedersen", "generator"}

    def test_explicit_precondition_failure(self, tmp_path):
        code, _ = run(["semigroup", "--generator", "wolff", "--checks", "generator"], tmp_path)
        assert code == 1

    def test_generator_file_and_scan_output(self, ops, tmp_path):
        scan_path = tmp_path / "scan.json"
        code, rep = run(["semigroup", "--generator", f"file:{ops['good']}", "--checks", "law",
                         "--times", "0,0.5,1", "--out", str(scan_path)], tmp_path)
        assert code == 0
        sc = json.loads(scan_path.read_text())
        assert sc["times"] == [0.0, 0.5, 1.0] and len(sc["records"]) == 3

    @pytest.mark.parametrize("argv", [
        ["--generator", "nope"],
        ["--checks", "everything"],
        ["--times", "a,b"],
        ["--shape", "0"],
        ["--generator", "file:/does/not/exist.json"],
    ])
    def test_input_errors(self, argv):
        assert main(["semigroup"] + argv) == 2

    def test_all_generators_run(self, tmp_path):
        for g in ("zero", "box-e", "box-v", "wolff", "inner", "triple-derivation"):
            code, _ = run(["semigroup", "--generator", g, "--checks", "law,cocycles"], tmp_path)
            assert code == 0, g


class TestScenario:
    def test_nongroup_at_zero(self, tmp_path):
        code, rep = run(["scenario", "nongroup-2x2", "--t", "0"], tmp_path)
        assert code == 0
        assert max(c["residual"] for c in rep["checks"]) <= 1e-15
        assert rep["h_t"]["blocks"][0] == [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]

    @pytest.mark.parametrize("t_text, bound", [
        (repr(2 * np.pi), 1e-9),
        # 8 significant digits put t 7.2e-9 below 2 pi, which moves h by about 6.1e-9
        ("6.2831853", 1e-8),
    ])
    def test_nongroup_at_two_pi(self, tmp_path, t_text, bound):
        code, rep = run(["scenario", "nongroup-2x2", "--t", t_text], tmp_path)
        assert code == 0
        h = np.array(rep["h_t"]["blocks"][0])
        h = h[..., 0] + 1j * h[..., 1]
        assert np.linalg.norm(h - np.array([[0, -1], [1, 0]]), 2) <= bound
        assert max(c["residual"] for c in rep["checks"]) <= 1e-9

    def test_generator_demo(self, tmp_path):
        code, rep = run(["scenario", "generator-demo"], tmp_path)
        assert code == 0
        skew = [c for c in rep["checks"] if c["name"] == "z0_skew"][0]
        assert skew["residual"] <= 1e-9

    def test_symmetric_demo(self, tmp_path):
        code, rep = run(["scenario", "symmetric-demo", "--shape", "2,2,1", "--seed", "5"], tmp_path)
        assert code == 0
        assert any(c["group"] == "wolff" for c in rep["checks"])

    def test_unknown_scenario(self):
        assert main(["scenario", "nope"]) == 2


class TestDeterminismAndSeeds:
    def test_byte_identical(self, tmp_path):
        argv = ["semigroup", "--generator", "triple-derivation", "--shape", "2,1", "--seed", "9"]
        main(argv + ["--json", str(tmp_path / "a.json"), "-q"])
        main(argv + ["--json", str(tmp_path / "b.json"), "-q"])
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_seed_precedence(self, monkeypatch):
        monkeypatch.delenv("OPSTAR_SEED", raising=False)
        assert resolve_seed(None) == 0
        monkeypatch.setenv("OPSTAR_SEED", "17")
        assert resolve_seed(None) == 17
        assert resolve_seed(4) == 4

    def test_env_seed_echoed(self, monkeypatch, tmp_path):
        monkeypatch.setenv("OPSTAR_SEED", "17")
        _, rep = run(["semigroup", "--generator", "inner", "--checks", "law"], tmp_path)
        assert rep["seed"] == 17
        _, rep = run(["semigroup", "--generator", "inner", "--checks", "law", "--seed", "2"],
                     tmp_path)
        assert rep["seed"] == 2

    def test_bad_env_seed(self, monkeypatch):
        monkeypatch.setenv("OPSTAR_SEED", "abc")
        assert main(["semigroup", "--checks", "law"]) == 2

    def test_exit_codes_bounded(self, ops):
        for argv in (["check-op", str(ops["bad"])], ["decompose", str(ops["bad"])],
                     ["decompose", str(ops["singular"])], [], ["--bogus"]):
            assert main(argv + ["-q"] if argv and not argv[0].startswith("-") else argv) in (0, 1, 2)
