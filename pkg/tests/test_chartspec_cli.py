import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from warpcurv import tables
from warpcurv.chartspec import ChartSpecError, compile_expression, parse_chart_spec
from warpcurv.cli import main

ROOT = Path(__file__).resolve().parents[1]
CHARTS = ROOT / "scripts" / "charts"
GOLDEN = Path(__file__).resolve().parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def body(text):
    return [ln for ln in text.splitlines() if not ln.startswith("#")]


class TestExpressions:
    def test_arithmetic(self):
        f = compile_expression("1 + 2*x - y^2 / 4", ["x", "y"])
        assert f(1.0, 2.0) == pytest.approx(2.0)

    def test_functions_and_constants(self):
        f = compile_expression("sin(x)^2 + cos(x)**2 + exp(0) + log(e) - pi/pi", ["x"])
        x = np.linspace(0, 1, 5)
        assert np.allclose(f(x), 2.0)

    def test_constant_broadcasts(self):
        f = compile_expression("3", ["x"])
        assert f(np.zeros((2, 3))).shape == (2, 3)

    @pytest.mark.parametrize("text", ["__import__('os')", "x.real", "open(x)", "[x]", "x if x else 1",
                                      "lambda: 1", "z + 1", "True"])
    def test_rejects_outside_whitelist(self, text):
        with pytest.raises(ChartSpecError):
            compile_expression(text, ["x"])

    def test_syntax_error(self):
        with pytest.raises(ChartSpecError, match="bad expression"):
            compile_expression("1 +", ["x"])


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), x=st.floats(-2, 2))
def test_expression_matches_numpy(a, b, x):
    f = compile_expression(f"({a!r})*sin(x) + ({b!r})*x^2", ["x"])
    assert f(x) == pytest.approx(a * np.sin(x) + b * x ** 2, abs=1e-12)


class TestChartSpec:
    def test_sphere_file(self):
        spec = parse_chart_spec((CHARTS / "sphere.json").read_text())
        assert spec.grid.names == ("th", "ph") and spec.bcwp is None

    def test_bcwp_file(self):
        spec = parse_chart_spec((CHARTS / "product_small.json").read_text())
        assert spec.bcwp is not None and spec.metric.dim == 3

    def test_json_error_location(self):
        with pytest.raises(ChartSpecError) as info:
            parse_chart_spec('{\n  "axes": [\n    {"name": "x",}\n  ]\n}')
        assert info.value.line == 3

    def test_unknown_function_located(self):
        text = '{\n "axes": [{"name": "x", "origin": 0, "spacing": 0.1, "count": 5}],\n' \
               ' "metric": [["frob(x)"]]\n}'
        with pytest.raises(ChartSpecError) as info:
            parse_chart_spec(text)
        assert info.value.line == 3 and info.value.column is not None
        assert "frob" in str(info.value)

    def test_missing_field(self):
        text = json.dumps({"bcwp": {"base": {"axes": [{"name": "x", "origin": 0, "spacing": 0.1, "count": 5}],
                                             "metric": [["1"]]},
                                    "fiber": {"axes": [{"name": "y", "origin": 0, "spacing": 0.1, "count": 5}],
                                              "metric": [["1"]]},
                                    "c": "1"}})
        with pytest.raises(ChartSpecError, match="missing field 'w'"):
            parse_chart_spec(text)

    def test_axis_missing_field(self):
        with pytest.raises(ChartSpecError, match="spacing"):
            parse_chart_spec('{"axes": [{"name": "x", "origin": 0, "count": 5}], "metric": [["1"]]}')

    def test_wrong_metric_shape(self):
        with pytest.raises(ChartSpecError):
            parse_chart_spec('{"axes": [{"name": "x", "origin": 0, "spacing": 0.1, "count": 5}],'
                             ' "metric": [["1", "0"]]}')


class TestGolden:
    @pytest.mark.parametrize("which", tables.TABLE_IDS)
    def test_byte_identical(self, which):
        expected = (GOLDEN / f"table{which}.csv").read_bytes()
        assert tables.render(which).encode() == expected

    def test_D0_rows(self):
        rows = body((GOLDEN / "tableD0.csv").read_text())
        assert len(rows) == 4 and rows[3] == "6,5,0,-1/2,1/3,5/3,2/3,0"

    def test_unknown_table(self):
        with pytest.raises(ValueError):
            tables.render("9")


class TestCli:
    def test_classify(self, capsys):
        code, out, _ = run(capsys, "classify", "--m", "1", "--k", "3", "--mu", "1")
        assert code == 0 and out == "q=1<p=3, super-lin/lin\n"

    def test_classify_negative_fraction(self, capsys):
        code, out, _ = run(capsys, "classify", "--m", "6", "--k", "5", "--mu", "-1/2")
        assert code == 0 and out.startswith("q=0<p=2/3")

    def test_classify_exceptional_exits_2(self, capsys):
        code, _, err = run(capsys, "classify", "--m", "3", "--k", "4", "--mu", "-2")
        assert code == 2 and "error" in err

    def test_classify_json(self, capsys):
        code, out, _ = run(capsys, "classify", "--m", "3", "--k", "8", "--mu", "-2", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and doc["p"] == "1/3" and doc["q"] == "0"

    def test_sbcwp_note(self, capsys):
        code, out, _ = run(capsys, "sbcwp", "--m", "6", "--k", "5", "--mu", "-1/2", "--exact")
        assert code == 0 and "beta,5/3" in out and "# note:" in out

    def test_tables_D0(self, capsys):
        code, out, _ = run(capsys, "tables", "--which", "D0")
        assert code == 0 and len(body(out)) == 4

    def test_tables_out_file(self, capsys, tmp_path):
        dest = tmp_path / "t7.csv"
        assert main(["tables", "--which", "7", "--out", str(dest)]) == 0
        assert dest.read_bytes() == (GOLDEN / "table7.csv").read_bytes()

    def test_header(self, capsys):
        _, out, _ = run(capsys, "verify", "--suite", "einstein", "--count", "1", "--seed", "3")
        lines = out.splitlines()
        assert lines[0].startswith("# warpcurv ") and lines[1].startswith("# command: warpcurv verify")
        assert lines[2] == "# seed: 3"

    def test_verify_deterministic(self, capsys, monkeypatch):
        argv = ["verify", "--suite", "all", "--seed", "7", "--count", "2"]
        code, first, _ = run(capsys, *argv)
        _, second, _ = run(capsys, *argv)
        monkeypatch.setenv("WARPCURV_THREADS", "2")
        _, threaded, _ = run(capsys, *argv)
        assert code == 0 and first == second == threaded

    def test_curvature_scalar(self, capsys):
        code, out, _ = run(capsys, "curvature", "--spec", str(CHARTS / "sphere.json"))
        rows = body(out)
        assert code == 0 and rows[0] == "th,ph,S"
        assert all(abs(float(r.split(",")[2]) - 2) < 1e-3 for r in rows[1:])

    @pytest.mark.parametrize("order", ["2", "4"])
    def test_curvature_verify(self, capsys, order):
        code, out, _ = run(capsys, "curvature", "--spec", str(CHARTS / "product_small.json"), "--verify",
                           "--order", order)
        rows = body(out)
        assert code == 0 and len(rows) == 1 + 8 and all(r.endswith("PASS") for r in rows[1:])

    def test_curvature_verify_needs_product(self, capsys):
        code, _, err = run(capsys, "curvature", "--spec", str(CHARTS / "sphere.json"), "--verify")
        assert code == 2 and "bcwp" in err

    def test_bad_spec_exits_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"axes": [{"name": "x", "origin": 0, "spacing": 0.1, "count": 5}], "metric": [["q(x)"]]}')
        code, _, err = run(capsys, "curvature", "--spec", str(bad))
        assert code == 2 and "line 1" in err

    def test_missing_file_exits_2(self, capsys, tmp_path):
        code, _, _ = run(capsys, "curvature", "--spec", str(tmp_path / "nope.json"))
        assert code == 2

    def test_einstein_m1_closed_form(self, capsys):
        code, out, _ = run(capsys, "einstein", "m1", "--k", "3", "--lambda", "1", "--nu", "1",
                           "--gamma", "0", "--r0", "-1", "--r1", "1", "--n", "21")
        assert code == 0 and "# kind:" in out and len(body(out)) == 22

    def test_einstein_m1_k1(self, capsys):
        code, out, _ = run(capsys, "einstein", "m1", "--k", "1", "--lambda", "1")
        assert code == 0 and "v'' = -2 eps lam" in out

    def test_einstein_schwarzschild(self, capsys):
        code, out, _ = run(capsys, "einstein", "schwarzschild")
        assert code == 0 and "# exact Euler residual: 0" in out

    def test_einstein_check_nested(self, capsys):
        code, out, _ = run(capsys, "einstein", "check-nested")
        assert code == 0 and "FAIL" not in out

    def test_geodesic(self, capsys):
        code, out, _ = run(capsys, "geodesic", "--spec", str(CHARTS / "warped_plane.json"),
                           "--point", "1.5,0,0", "--velocity", "0.1,0.2,0", "--steps", "10")
        rows = body(out)
        assert code == 0 and len(rows) == 1 + 11

    def test_geodesic_exit(self, capsys):
        code, _, _ = run(capsys, "geodesic", "--spec", str(CHARTS / "warped_plane.json"),
                         "--point", "1.5,0,0", "--velocity", "50,0,0", "--steps", "10")
        assert code == 1
