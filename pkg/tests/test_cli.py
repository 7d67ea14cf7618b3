import json
import shutil
import subprocess

import pytest

from conelab import cli
from conelab.gallery import load_corpus


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse(capsys):
    code, out, _ = run(capsys, "parse", "(x + y)^2")
    assert code == 0
    assert json.loads(out) == {"text": "x^2 + 2*x*y + y^2", "variables": ["x", "y"], "degree": 2, "terms": 3}


def test_parse_error_exit_code(capsys):
    code, out, err = run(capsys, "parse", "x**2")
    assert code == 2
    assert out == "" and "error" in err


def test_usage_error_exit_code(capsys):
    assert run(capsys, "classify", "y^2 - x^3")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2


def test_leading_form(capsys):
    code, out, _ = run(capsys, "leading-form", "z^3 - x^5*y - x*y^5", "--at", "0,0,0")
    assert code == 0
    assert json.loads(out)["leading_form"] == "z^3"


def test_classify_cusp(capsys):
    code, out, _ = run(capsys, "classify", "y^2 - x^3", "--at", "0,0")
    assert code == 0
    assert json.loads(out)["class"] == "Cusp"


def test_classify_union_with_patch(capsys):
    code, out, _ = run(capsys, "classify", "y - x^2", "--patch", "x", "--union", "y", "--at", "0,0")
    assert code == 0
    assert json.loads(out)["class"] == "UnionOfC1Sheets"


def test_point_off_variety_is_analysis_error(capsys):
    code, _, err = run(capsys, "classify", "y - x^2", "--at", "1,0")
    assert code == 1
    assert "analysis error" in err


def test_bad_point_is_usage_error(capsys):
    assert run(capsys, "classify", "y - x^2", "--at", "a,b")[0] == 2


def test_cone(capsys):
    code, out, _ = run(capsys, "cone", "y^3 - x^4", "--at", "0,0")
    d = json.loads(out)
    assert code == 0
    assert d["algebraic"]["leading_form"] == "y^3"
    assert d["sampled"]["symmetric"] is True


def test_multiplicity_csv(capsys, tmp_path):
    path = tmp_path / "ratios.csv"
    code, out, _ = run(capsys, "multiplicity", "y^2 - x^3", "--at", "0,0", "--csv", str(path))
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(2.0, rel=5e-2)
    assert path.read_text().startswith("r,measure,ratio")


def test_puiseux(capsys):
    code, out, _ = run(capsys, "puiseux", "y^3 - x^4")
    assert code == 0
    assert json.loads(out)["verdict"] == "C1"


def test_puiseux_needs_plane_curve(capsys):
    assert run(capsys, "puiseux", "z - x^2")[0] == 2


def test_support_region(capsys):
    code, out, _ = run(capsys, "support", "x^2 + y^2 - 1", "--region=-1.5:1.5,-1.5:1.5", "--spacing", "0.01")
    d = json.loads(out)
    assert code == 0
    assert d["double_uniform_r"] == pytest.approx(1.0, rel=2e-2)
    assert d["convexity_probe"] == "passed"


def test_support_bad_region(capsys):
    assert run(capsys, "support", "y", "--region", "1:0,0:1")[0] == 2


def test_closure(capsys):
    code, out, _ = run(capsys, "closure", "y*(1 - x^2) - 1")
    assert code == 0
    assert len(json.loads(out)["infinity_points"]) == 2


def test_gallery_filter_json(capsys, tmp_path):
    path = tmp_path / "report.json"
    code, out, err = run(capsys, "gallery", "--filter", "node", "--json", str(path))
    assert code == 0 and out == ""
    report = json.loads(path.read_text())
    assert [e["name"] for e in report["entries"]] == ["node"]
    assert "ok" in err


def test_gallery_mismatch_exit_code(capsys, monkeypatch):
    entry = next(e for e in load_corpus() if e["name"] == "node")
    wrong = {**entry, "checks": [{**entry["checks"][0], "expected": "Cusp"}]}
    monkeypatch.setattr(cli, "load_corpus", lambda: [wrong])
    code, out, err = run(capsys, "gallery", "--quiet")
    assert code == 3
    assert json.loads(out)["passed"] is False
    assert err == ""


@pytest.mark.skipif(shutil.which("conelab") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["conelab", "parse", "x^"], capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run(["conelab", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("conelab")
