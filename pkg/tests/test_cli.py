import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from heisrect.cli import main, render, run
from heisrect.config import DEFAULTS, load_config, parse_override
from heisrect.errors import InvariantViolation, NumericalFailure, UsageError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def invoke(tmp_path, command, doc, *sets):
    out = tmp_path / "out.csv"
    doc = dict(doc)
    doc.setdefault("output", {})
    doc["output"] = {**doc["output"], "path": str(out)}
    cfg = write_config(tmp_path, doc)
    args = [command, "--config", str(cfg)]
    for s in sets:
        args += ["--set", s]
    result = CliRunner().invoke(main, args)
    return result, out


def parse_csv(text):
    lines = text.splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    meta = {ln.split(":", 1)[0][2:]: ln.split(":", 1)[1].strip() for ln in lines
            if ln.startswith("# ") and ":" in ln}
    return list(csv.DictReader(io.StringIO("\n".join(body)))), meta


def test_exit_codes_of_error_classes():
    assert UsageError("x").exit_code == 2
    assert NumericalFailure("x").exit_code == 3
    assert InvariantViolation("x").exit_code == 1


def test_build_map_constant_plane(tmp_path):
    doc = {"surface": {"kind": "constant", "params": {"c": 0.0}}, "scales": {"depth": 6},
           "cantor": {"kept": 64}, "sampling": {"count": 20, "pairs": 300}}
    result, out = invoke(tmp_path, "build-map", doc)
    assert result.exit_code == 0, result.output
    rows, meta = parse_csv(out.read_text())
    summary = json.loads(meta["summary"])
    assert abs(summary["ratio_min"] - 1.0) <= 1e-6 and abs(summary["ratio_max"] - 1.0) <= 1e-6
    assert meta["pass"] == "true"
    assert {"level", "gy", "gt", "Fx1", "increment"} <= set(rows[0])


def test_flag_approx_bigolin_vittone(tmp_path):
    doc = {"surface": {"kind": "bigolin-vittone", "params": {"a": 0.75}}}
    result, out = invoke(tmp_path, "flag-approx", doc)
    assert result.exit_code == 0
    rows, meta = parse_csv(out.read_text())
    assert list(rows[0]) == ["t", "error", "bound"]
    assert json.loads(meta["summary"])["slope"] >= 0.74


def test_missing_surface_kind_writes_nothing(tmp_path):
    result, out = invoke(tmp_path, "surface-info", {"surface": {"params": {}}})
    assert result.exit_code == 2
    assert not out.exists()
    assert "surface" in result.output


@pytest.mark.parametrize("doc", [
    {"surface": {"kind": "constant"}, "bogus": 1},
    {"surface": {"kind": "constant"}, "sampling": {"count": 3}},
    {"surface": {"kind": "nope"}},
    {"surface": {"kind": "constant"}, "cantor": {"center": [0.0]}},
])
def test_schema_violations_exit_2(tmp_path, doc):
    result, out = invoke(tmp_path, "surface-info", doc)
    assert result.exit_code == 2
    assert not out.exists()


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"surface": {"kind": "constant",}}')
    with pytest.raises(UsageError, match=r"bad\.json:1:"):
        load_config(path)


def test_defaults_are_echoed(tmp_path):
    result, out = invoke(tmp_path, "surface-info", {"surface": {"kind": "constant"}})
    assert result.exit_code == 0
    _, meta = parse_csv(out.read_text())
    cfg = json.loads(meta["config"])
    for section, values in DEFAULTS.items():
        for key in values:
            assert key in cfg[section], (section, key)


def test_auto_scales_are_resolved_numerically(tmp_path):
    doc = {"surface": {"kind": "constant"}, "scales": {"depth": 4}}
    result, out = invoke(tmp_path, "cantor", doc)
    assert result.exit_code == 0
    _, meta = parse_csv(out.read_text())
    cfg = json.loads(meta["config"])
    assert isinstance(cfg["scales"]["n0"], int) and cfg["scales"]["nmax"] == cfg["scales"]["n0"] + 4
    assert isinstance(cfg["cantor"]["tau"], float) and cfg["cantor"]["tau"] > 0
    assert isinstance(cfg["cantor"]["alpha"], float)


def test_set_overrides_and_json_format(tmp_path):
    doc = {"surface": {"kind": "constant"}}
    result, out = invoke(tmp_path, "cantor", doc, "scales.n0=2", "scales.depth=3",
                         "output.format=json", "cantor.tau=0.01")
    assert result.exit_code == 0
    out_doc = json.loads(out.read_text())
    assert out_doc["config"]["scales"]["n0"] == 2
    assert out_doc["config"]["cantor"]["tau"] == 0.01
    assert out_doc["columns"][:4] == ["level", "cubes_alive", "measure_kept", "min_separation"]
    assert [r[0] for r in out_doc["rows"]] == [2, 3, 4, 5]


def test_parse_override():
    assert parse_override("a.b=3") == (["a", "b"], 3)
    assert parse_override("a=[1, 2]") == (["a"], [1, 2])
    assert parse_override("a=hello") == (["a"], "hello")
    with pytest.raises(UsageError):
        parse_override("novalue")


def test_output_is_reproducible(tmp_path):
    doc = {"surface": {"kind": "bigolin-vittone"}, "sampling": {"count": 20}}
    result1, out = invoke(tmp_path, "gradient", doc)
    first = out.read_bytes()
    result2, out = invoke(tmp_path, "gradient", doc)
    assert result1.exit_code == result2.exit_code == 0
    assert out.read_bytes() == first


def test_failing_bound_exits_1_with_output(tmp_path):
    # the declared Hoelder constant is far too small for this surface
    doc = {"surface": {"kind": "bigolin-vittone", "params": {"declared_H": 1e-3}},
           "probe": {"range": [1e-3, 1e-1], "points": 4}, "sampling": {"count": 20}}
    result, out = invoke(tmp_path, "vertical-holder", doc)
    assert result.exit_code == 1
    _, meta = parse_csv(out.read_text())
    assert meta["pass"] == "false"


def test_run_and_render_are_pure(tmp_path):
    cfg = load_config(write_config(tmp_path, {"surface": {"kind": "flag"}}))
    code, text = run("surface-info", cfg)
    assert code == 0
    assert text.startswith("# heisrect-output v1\n# command: surface-info\n")
    assert text == run("surface-info", cfg)[1]


def test_every_command_runs(tmp_path):
    h1 = {"surface": {"kind": "flag"}, "scales": {"depth": 3, "verify": [3, 4]},
          "cantor": {"kept": 32}, "sampling": {"count": 20, "pairs": 100}}
    for command in ("surface-info", "gradient", "verify-iso", "verify-comp", "cantor", "build-map",
                    "audit", "flag-approx", "vertical-holder"):
        result, out = invoke(tmp_path, command, h1)
        assert result.exit_code in (0, 1), (command, result.output)
        assert out.exists()
        out.unlink()
    h2 = {"group": {"n": 2}, "surface": {"kind": "bump"}, "probe": {"points": 4, "directions": 2}}
    result, out = invoke(tmp_path, "plane-approx", h2)
    assert result.exit_code == 0, result.output


def test_console_script(tmp_path):
    cfg = write_config(tmp_path, {"surface": {"kind": "constant"},
                                  "output": {"path": str(tmp_path / "o.csv")}})
    proc = subprocess.run([sys.executable, "-m", "heisrect", "surface-info", "--config", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o.csv").read_text().startswith("# heisrect-output v1")


@pytest.mark.parametrize("name, command", [
    ("bv-flag-approx", "flag-approx"),
    ("constant-build-map", "build-map"),
    ("pi-cantor", "cantor"),
])
def test_shipped_configs(tmp_path, name, command):
    result, out = invoke(tmp_path, command, json.loads((CONFIGS / f"{name}.json").read_text()))
    assert result.exit_code == 0, result.output
