import json
import math
from pathlib import Path

import pytest
import yaml

from fdegrowth import __version__
from fdegrowth.cli import main
from fdegrowth.config import build, load_raw

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data) if isinstance(data, dict) else data)
    return p


def report(out):
    return json.loads((Path(out) / "report.json").read_text())


BASE = {
    "kind": "fde-growth",
    "nonlinearity": {"family": "log-power", "alpha": 1},
    "measure": {"atoms": [{"location": 0, "weight": 1}, {"location": -1, "weight": 1}]},
    "horizon": 200,
}


def test_version(capsys):
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_fde_growth_full_horizon(tmp_path):
    out = tmp_path / "o"
    code = main(["run", "--config", str(CONFIGS / "fde_growth.yaml"), "--out", str(out)])
    rep = report(out)
    assert code == 0 and rep["exit_code"] == 0
    growth = rep["verdicts"][0]
    assert growth["check"] == "growth-rate" and growth["status"] == "pass"
    assert growth["predicted"] == pytest.approx(0.36788, abs=5e-6)
    assert [v["check"] for v in rep["verdicts"]] == rep["config"]["checks"]
    for name in rep["series"].values():
        assert (out / name).exists()
    assert rep["version"] == __version__ and rep["timings"]["total"] > 0


def test_report_echo_reruns_identically(tmp_path):
    first = tmp_path / "a"
    assert main(["run", "--config", str(write(tmp_path, BASE)), "--out", str(first)]) == 0
    echoed = report(first)["config"]
    second = tmp_path / "b"
    echoed["output"] = str(second)
    assert main(["run", "--config", str(write(tmp_path, echoed, "echo.yaml"))]) == 0
    for name in report(first)["series"].values():
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert report(second)["config"]["measure"]["tau"] == 1.0


def test_negative_weight_names_atom(tmp_path, capsys):
    bad = dict(BASE, measure={"atoms": [{"location": 0, "weight": 1}, {"location": -1, "weight": -2}]})
    assert main(["run", "--config", str(write(tmp_path, bad)), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "measure.atoms[1].weight" in err and "atom 1" in err and "line" in err


def test_yaml_syntax_error_reports_line(tmp_path, capsys):
    p = write(tmp_path, "kind: fde-growth\nmeasure: [unclosed\n")
    assert main(["run", "--config", str(p)]) == 1
    assert "line" in capsys.readouterr().err


@pytest.mark.parametrize("patch, field", [
    ({"kind": "nope"}, "kind"),
    ({"bogus": 1}, "bogus"),
    ({"horizon": -1}, "horizon"),
    ({"step": {"h": 0.5}}, "step.h"),
    ({"nonlinearity": {"family": "missing"}}, "nonlinearity"),
    ({"checks": ["hw-ratio"]}, "checks"),
    ({"history": {"kind": "expression", "expression": "-1 + 0*s"}}, "history"),
    ({"lambda_grid": {"u_min": 10, "u_max": 100, "n": 10}}, "lambda_grid"),
])
def test_config_errors_exit_1(tmp_path, capsys, patch, field):
    assert main(["run", "--config", str(write(tmp_path, {**BASE, **patch}))]) == 1
    assert f"field '{field}" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 1


def test_hw_violation_exit_1(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["run", "--config", str(CONFIGS / "hw_compare.yaml"), "--out", str(out),
                 "--override", "perturbation.c=1e30"])
    assert code == 1
    assert "hypothesis-violation" in capsys.readouterr().err
    assert report(out)["errors"][0]["type"] == "hypothesis-violation"


def test_hw_compare_run(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(CONFIGS / "hw_compare.yaml"), "--out", str(out)]) == 0
    rep = report(out)
    assert [v["check"] for v in rep["verdicts"]] == ["hw-ratio", "hw-mu"]
    assert "trajectory_x" in rep["series"] and "hw_mu" in rep["series"]


def test_failing_verdict_exit_2(tmp_path):
    data = dict(BASE, lambda_override=3.0, checks=["growth-rate"])
    assert main(["run", "--config", str(write(tmp_path, data)), "--out", str(tmp_path / "o")]) == 2


def test_inconclusive_exit_3(tmp_path):
    data = dict(BASE, measure={"atoms": [{"location": 0, "weight": 1}]}, checks=["delta"], horizon=20)
    out = tmp_path / "o"
    assert main(["run", "--config", str(write(tmp_path, data)), "--out", str(out)]) == 3
    assert report(out)["verdicts"][0]["note"] == "degenerate: C=0"


def test_runtime_failure_exit_4(tmp_path):
    data = dict(BASE, horizon=100, nonlinearity={
        "family": "expression", "f": "np.where(x < 50, 1 + 0 * x, np.nan)", "fprime": "0 * x"})
    out = tmp_path / "o"
    assert main(["run", "--config", str(write(tmp_path, data)), "--out", str(out)]) == 4
    assert report(out)["errors"][0]["type"] == "runtime"


def test_test_only_family_warns(tmp_path, caplog):
    data = dict(BASE, nonlinearity={"family": "power", "p": 0.5}, horizon=20, checks=["f-over-t"])
    out = tmp_path / "o"
    main(["run", "--config", str(write(tmp_path, data)), "--out", str(out)])
    assert "test-only" in caplog.text
    assert report(out)["warnings"]


def test_check_f(tmp_path):
    out = tmp_path / "o"
    assert main(["check-f", "--config", str(CONFIGS / "check_f.yaml"), "--out", str(out)]) == 0
    rep = report(out)
    assert rep["verdicts"][0]["regime"] == "zero"
    out2 = tmp_path / "p"
    code = main(["check-f", "--config", str(CONFIGS / "check_f.yaml"), "--out", str(out2),
                 "--override", "nonlinearity={family: power, p: 0.5}"])
    assert code == 2
    assert report(out2)["verdicts"][1]["regime"] == "not RV0"


def test_override_parsing(tmp_path):
    data, _ = load_raw(write(tmp_path, BASE), ["nonlinearity.alpha=2", "step.h=0.125"])
    cfg = build(data)
    assert cfg.f.alpha == 2.0 and cfg.step.h == 0.125
    assert main(["run", "--config", str(write(tmp_path, BASE)), "--override", "oops"]) == 1


def test_sweep_alpha_regimes(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--config", str(CONFIGS / "sweep_alpha.yaml"), "--out", str(out),
                 "--override", "horizon=200", "--jobs", "2"])
    rows = report(out)["table"]
    assert code == 0
    assert [r["regime"] for r in rows] == ["infinite", "finite(1)", "zero"]
    assert (out / "sweep.csv").read_text().count("\n") == 4
    for r in rows:
        assert (out / r["output"] / "report.json").exists()


def test_sweep_measures_predictions(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(CONFIGS / "sweep_measures.yaml"), "--out", str(out),
                 "--override", "horizon=200"]) == 0
    preds = [r["predicted"] for r in report(out)["table"]]
    assert preds == pytest.approx([math.exp(-1), math.exp(-2)], rel=1e-4)


def test_sweep_empty_range_exit_1(tmp_path):
    data = dict(BASE, sweep={"parameters": {"nonlinearity.alpha": []}})
    assert main(["sweep", "--config", str(write(tmp_path, data))]) == 1


def test_sweep_cap(tmp_path):
    data = dict(BASE, sweep={"parameters": {"nonlinearity.alpha": [1, 2, 3]}, "max_runs": 2})
    assert main(["sweep", "--config", str(write(tmp_path, data))]) == 1


def test_sweep_survives_bad_sub_run(tmp_path):
    data = dict(BASE, horizon=20, checks=["f-over-t"],
                sweep={"parameters": {"nonlinearity.alpha": [-1, 1]}})
    out = tmp_path / "s"
    code = main(["sweep", "--config", str(write(tmp_path, data)), "--out", str(out)])
    rows = report(out)["table"]
    assert rows[0]["status"] == "config-error" and "alpha" in rows[0]["error"]
    assert rows[1]["exit_code"] in (0, 2)
    assert code == 1


def test_run_rejects_sweep_kind(tmp_path):
    data = dict(BASE, kind="sweep", sweep={"parameters": {"nonlinearity.alpha": [1]}})
    assert main(["run", "--config", str(write(tmp_path, data))]) == 1
