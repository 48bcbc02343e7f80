import io
import json
from pathlib import Path

import jsonschema
import pytest

from cartan_coh.cli import load_schema, run

DATA = Path(__file__).parent / "data"


def call(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], out=out)
    return code, out.getvalue()


def report(*argv):
    code, text = call(*argv)
    rep = json.loads(text)
    jsonschema.validate(rep, load_schema("report"))
    return code, rep


def test_wo_cohomology_report():
    code, rep = report("wo-cohomology", "--q", 1, "--max-degree", 3)
    assert code == 0 and rep["result"]["dims"] == [1, 0, 0, 1]
    assert rep["result"]["degrees"]["3"]["representatives"] == [{"h1*c1": "1/1"}]
    assert rep["command"]["name"] == "wo-cohomology" and "elapsed_ms" not in rep


def test_gf_cohomology_csv():
    code, text = call("gf-cohomology", "--q", 1, "--weight", 0, "--max-degree", 3, "--csv")
    assert code == 0 and text == "degree,dim\n0,1\n1,0\n2,0\n3,1\n"


def test_group_cohomology_trivial_and_z2():
    assert report("group-cohomology", "--group", DATA / "trivial_group.json",
                  "--max-degree", 1)[1]["result"]["dims"] == [1, 0]
    assert report("group-cohomology", "--group", DATA / "z2.json",
                  "--max-degree", 4)[1]["result"]["dims"] == [1, 0, 0, 0, 0]


def test_cech_nerves():
    assert report("cech", "--nerve", DATA / "circle_nerve.json")[1]["result"]["dims"] == [1, 1]
    assert report("cech", "--nerve", DATA / "interval_nerve.json")[1]["result"]["dims"] == [1, 0]


def test_action_bicomplex():
    code, rep = report("action-bicomplex", "--group", DATA / "sign_line.json", "--cap", 6,
                       "--pmax", 3, "--qmax", 1)
    assert code == 0 and rep["result"]["dims"] == [1, 0, 0, 0]


@pytest.mark.parametrize("name,expected", [
    ("euler_package", 0), ("plane_euler_perturbed", 1), ("broken_jacobi", 1)])
def test_algebroid_check_exit_codes(name, expected):
    code, rep = report("algebroid-check", "--data", DATA / f"{name}.json")
    assert code == expected and rep["pass"] == (expected == 0)


def test_matched_pair_exit_codes(capsys):
    assert call("matched-pair", "--data", DATA / "plane_euler_package.json")[0] == 0
    code, _ = call("matched-pair", "--data", DATA / "plane_euler_perturbed.json")
    assert code == 1
    assert "first_failure" in json.loads(capsys.readouterr().err)


def test_matched_pair_general_form(tmp_path):
    line = {"rank": 1, "basedim": 1, "anchor": [[1]], "c": [[[0]]]}
    zero = {"rank": 1, "basedim": 1, "anchor": [[0]], "c": [[[0]]]}
    path = tmp_path / "pair.json"
    path.write_text(json.dumps({"first": line, "second": zero, "first_on_second": [[[0]]],
                                "second_on_first": [[[0]]]}))
    assert call("matched-pair", "--data", path)[0] == 0


def test_inf_haefliger_euler():
    code, rep = report("inf-haefliger", "--data", DATA / "euler_package.json", "--pmax", 1,
                       "--qmax", 1, "--weight", 0)
    assert code == 0 and rep["result"]["cohomology"] == [1, 1, 0]
    code, _ = call("inf-haefliger", "--data", DATA / "plane_euler_perturbed.json",
                   "--degree-bound", 2)
    assert code == 1


def test_prolong():
    code, rep = report("prolong", "--constraints", DATA / "volume_preserving.json", "--steps", 1)
    assert code == 0 and rep["result"]["witnesses"][0]["pass"]
    assert len(rep["result"]["system"]["equations"]) == 3
    code, rep = report("prolong", "--constraints", DATA / "translations.json", "--steps", 1)
    assert rep["result"]["system"]["equations"] == ["u1_1 - 1", "u1_2"]
    assert call("prolong", "--constraints", DATA / "translations.json", "--steps", 1,
                "--order-budget", 1)[0] == 2


def test_jet_verify():
    code, rep = report("jet-verify", "--q", 1, "--order", 2, "--samples", 10, "--seed", 3)
    assert code == 0 and rep["seed"] == 3
    assert rep["result"]["verdicts"]["multiplicativity"]["checked"] == 10


def test_input_errors(tmp_path, capsys):
    assert call("group-cohomology", "--group", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"elements": ["e"],\n "table": [["e"]')
    assert call("group-cohomology", "--group", bad)[0] == 2
    assert "line 2" in capsys.readouterr().err
    bad.write_text('{"opens": 2, "intersections": [{"indices": [0]}]}')
    assert call("cech", "--nerve", bad)[0] == 2
    assert "intersections/0" in capsys.readouterr().err
    assert call("wo-cohomology", "--q", 1, "--max-degree", 3, "--bogus")[0] == 2
    assert call("jet-verify", "--csv")[0] == 2
    assert call("wo-cohomology", "--q", 1, "--max-degree", -1)[0] == 2
    assert call("algebroid-check", "--data", DATA / "z2.json")[0] == 2


def test_timing_is_opt_in():
    rep = report("wo-cohomology", "--q", 1, "--max-degree", 1, "--timing")[1]
    assert isinstance(rep["elapsed_ms"], int)


def test_reports_are_reproducible():
    argv = ("jet-verify", "--q", 1, "--order", 2, "--samples", 5, "--seed", 11)
    assert call(*argv) == call(*argv)
    other = call("jet-verify", "--q", 1, "--order", 2, "--samples", 5, "--seed", 12)[1]
    assert json.loads(other)["input_digest"] != json.loads(call(*argv)[1])["input_digest"]


def test_suite_module_gelfand_fuchs():
    code, rep = report("suite", "--module", "gelfand_fuchs", "--seed", 7)
    assert code == 0 and [c["criterion"] for c in rep["result"]["criteria"]] == [1, 2, 3, 4]


def test_suite_requires_selector():
    assert call("suite")[0] == 2
    assert call("suite", "--all", "--module", "jet")[0] == 2


def test_suite_catches_flipped_delta_sign(monkeypatch, capsys):
    """Negative control: flipping the sign of the last face of delta must be caught."""
    from cartan_coh.jet import JetCochain, JetComplex
    original = JetComplex.delta

    def flipped(self, c):
        d = original(self, c)
        sign = 2 * (-1) ** c.p
        coeffs = {k: v + sign * c.coeffs.get(k, 0) for k, v in d.coeffs.items()}
        for k, v in c.coeffs.items():
            coeffs.setdefault(k, sign * v)
        return JetCochain(d.dim, d.p, d.q, d.order, coeffs)

    monkeypatch.setattr(JetComplex, "delta", flipped)
    code, rep = report("suite", "--all", "--seed", 7)
    assert code == 1
    failing = [c for c in rep["result"]["criteria"] if not c["pass"]]
    assert [c["criterion"] for c in failing] == [10]
    assert failing[0]["first_failure"]["identity"] == "delta_squared"
    assert json.loads(capsys.readouterr().err)["first_failure"]["identity"] == "delta_squared"
