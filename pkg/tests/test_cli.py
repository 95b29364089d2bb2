import csv
import json
import subprocess
import sys

import pytest

from harnesslab import cli

BROWN = {"gaussian_var": 1.0}
GAMMA = {"jumps": {"kind": "gamma", "a": 1.0, "b": 1.0}}


def _run(tmp_path, cfg, *flags, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = cli.main(["--config", str(p), "--out", str(out), *flags])
    report = json.loads((out / "report.json").read_text())
    return code, report, out


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_identity_gaussian_passes(tmp_path):
    code, rep, out = _run(tmp_path, {"kind": "identity-check", "spec": BROWN, "u": 1.0,
                                     "method": "fourier", "label": "g"})
    assert code == 0 and rep["exit_status"] == 0 and rep["pass"]
    assert rep["suites"][0]["identity"][0]["max_abs_err"] <= 1e-6
    rows = _rows(out / "identity-check_g.csv")
    assert rows[0] == ["x", "lhs", "rhs", "abs_err"] and len(rows) > 200


def test_harness_brownian_default_suite(tmp_path):
    code, rep, _ = _run(tmp_path, {"kind": "harness-check", "spec": BROWN, "n_paths": 20_000})
    assert code == 0
    assert rep["suites"][0]["summary"]["n_tests"] == 33


def test_harness_failure_exit_1(tmp_path):
    code, rep, _ = _run(tmp_path, {"kind": "harness-check", "spec": BROWN, "n_paths": 20_000,
                                   "planted_bias": 0.2})
    assert code == 1 and not rep["pass"]


def test_bad_triple_exit_2_names_field(tmp_path, capsys):
    code, rep, _ = _run(tmp_path, {"kind": "harness-check", "spec": BROWN,
                                   "triples": [[0.5, 0.5, 0.75]]})
    assert code == 2
    assert rep["error"]["field"] == "triples[0]"
    assert "triples[0]" in capsys.readouterr().err


@pytest.mark.parametrize("cfg,field", [
    ({"kind": "simulate", "spec": BROWN, "bogus": 1}, "bogus"),
    ({"kind": "simulate", "spec": BROWN, "n_paths": 10}, "n_paths"),
    ({"kind": "nonsense"}, "kind"),
    ({"kind": "simulate", "spec": {"gaussian_var": -1.0}}, "spec"),
    ({"kind": "pfm-check", "construction": "linear", "U": 2.0,
      "pairs": [[[0.2, 0.5], [0.3, 0.8]]]}, "pairs[0]"),
    ({"kind": "bridge-check", "spec": BROWN, "T": 1.0, "x": 0.0, "y": 1.0, "t_points": [1.0]},
     "t_points[0]"),
    ({"kind": "all", "suites": [{"kind": "simulate", "spec": BROWN, "extra": 1}]}, "suites[0].extra"),
])
def test_config_errors(tmp_path, cfg, field):
    code, rep, _ = _run(tmp_path, cfg)
    assert code == 2 and rep["exit_status"] == 2
    assert rep["error"]["field"].startswith(field)


def test_unreadable_config(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert cli.main([]) == 2


def test_numerical_error_exit_3(tmp_path, capsys):
    cfg = {"kind": "identity-check", "u": 1.0,
           "spec": {"jumps": {"kind": "compound_poisson", "rate": 1.0,
                              "jump_law": {"kind": "normal", "mean": 0.0, "var": 1.0}}}}
    code, rep, _ = _run(tmp_path, cfg)
    assert code == 3 and rep["error"]["type"] == "NoDensity"
    assert rep["error"]["operation"]
    assert rep["error"]["operation"] in capsys.readouterr().err


def test_simulate_csv_layouts(tmp_path):
    code, rep, out = _run(tmp_path, {"kind": "simulate", "spec": GAMMA, "n_paths": 2000,
                                     "steps": 8, "csv_paths": 3, "label": "s"})
    assert code == 0
    rows = _rows(out / "simulate_s.csv")
    assert rows[0] == ["t", "mean", "ci_low", "ci_high"] and len(rows) == 10
    rows = _rows(out / "simulate_s_paths.csv")
    assert rows[0] == ["t", "path_0", "path_1", "path_2"]


def test_bridge_report_and_csv(tmp_path):
    cfg = {"kind": "bridge-check", "spec": BROWN, "T": 1.0, "x": 0.0, "y": 2.0,
           "t_points": [0.25, 0.5], "n_paths": 20_000, "sde_steps": 256, "label": "b"}
    code, rep, out = _run(tmp_path, cfg)
    assert code == 0, rep
    rows = _rows(out / "bridge-check_b.csv")
    assert rows[0] == ["t", "mean", "ci_low", "ci_high"] and len(rows) == 3
    t, m, lo, hi = map(float, rows[1])
    assert lo < m < hi and t == 0.25


def test_empty_plot_is_header_only(tmp_path):
    rep = {"suites": [{"plots": [{"name": "empty", "columns": ["t", "mean", "ci_low", "ci_high"],
                                  "rows": []}]}]}
    (path,) = cli.emit_plot_data(rep, tmp_path)
    assert _rows(path) == [["t", "mean", "ci_low", "ci_high"]]
    assert cli.emit_plot_data({}, tmp_path) == []


def test_pfm_exponential_records_printed_variant(tmp_path):
    cfg = {"kind": "pfm-check", "construction": "exponential", "U": 2.0, "n_paths": 30_000,
           "pairs": [[[0.25, 0.5], [0.0, 1.0]]]}
    code, rep, _ = _run(tmp_path, cfg)
    assert code == 0
    (rec,) = rep["suites"][0]["recorded"]
    assert rec["variant"] == "as_printed" and rec["asserted"] is False
    assert rec["summary"]["pass"] is False


def test_determinism_and_round_trip(tmp_path):
    cfg = {"kind": "all", "n_paths": 5000, "seed": 3, "suites": [
        {"kind": "harness-check", "spec": GAMMA | {"centered": True}},
        {"kind": "pfm-check", "construction": "levy", "U": 2.0,
         "spec": GAMMA | {"centered": True},
         "f": {"breakpoints": [0.0, 1.0], "coeffs": [[1.0, -1.0]]},
         "pairs": [[[0.25, 0.5], [0.125, 0.75]]]}]}
    _, rep1, out1 = _run(tmp_path, cfg, "--sequential")
    text1 = (out1 / "report.json").read_text()
    _, _, out2 = _run(tmp_path, cfg, "--sequential")
    assert (out2 / "report.json").read_text() == text1
    _, _, out3 = _run(tmp_path, rep1["config"], "--sequential", name="echo.json")
    assert (out3 / "report.json").read_text() == text1


def test_parallel_matches_sequential(tmp_path):
    base = {"kind": "harness-check", "spec": BROWN, "n_paths": 5000, "seed": 8}
    _, a, _ = _run(tmp_path, base | {"reduction": "parallel", "workers": 3})
    _, b, _ = _run(tmp_path, base)
    assert a["suites"] == b["suites"]


def test_seed_override(tmp_path):
    base = {"kind": "simulate", "spec": BROWN, "n_paths": 2000, "seed": 1}
    _, a, _ = _run(tmp_path, base, "--seed", "99")
    assert a["config"]["seed"] == 99
    code, _, _ = _run(tmp_path, base, "--seed", str(2**64))
    assert code == 2


def test_print_schema_and_module_entry(capsys):
    assert cli.main(["--print-schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert set(cli.KINDS) <= set(schema["$defs"])
    r = subprocess.run([sys.executable, "-m", "harnesslab", "--print-schema"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and json.loads(r.stdout) == schema
