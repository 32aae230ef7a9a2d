import csv
import io
import json

import numpy as np
import pytest

from dispflow import cli
from dispflow import diagnostics as dg
from dispflow.config import PRESETS, ParseError, ValidationError, parse_config
from dispflow.fields import MapState

MINIMAL = """
target = "s2"
model = "darios"
n = 256
L = 1.0
t_end = 0.1
"""

BASE = 'n = 64\nL = 6.283185307179586\nt_end = 0.01\n'


def doc(text):
    """Complete ``text`` with grid keys and the dispersive model unless given."""
    if "model" not in text:
        text = 'model = "dispersive"\n' + text
    return BASE + text


# ---------------------------------------------------------------- parsing


def test_minimal_document_parses():
    cfg = parse_config(MINIMAL)
    assert (cfg.target, cfg.model, cfg.n, cfg.L, cfg.t_end) == ("s2", "darios", 256, 1.0, 0.1)
    assert cfg.epsilon == 0.0 and cfg.epsilon_schedule is None
    cfg.solver_config()


def test_third_order_flow_needs_a():
    with pytest.raises(ValidationError, match="a"):
        parse_config(doc('target = "s2"\na = 0.0\nepsilon = 0.0\n'))


def test_unknown_key_names_key_and_line():
    text = 'target = "s2"\nn = 64\n\nepsilonn = 0.1\n'
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert "epsilonn" in str(exc.value) and "line 4" in str(exc.value)


def test_unknown_initial_data_key_rejected():
    with pytest.raises(ParseError):
        parse_config(doc('target = "s2"\na = 1.0\n') + '[initial_data]\nfamily = "perturbed-circle"\nwobble = 2\n')


def test_type_errors_are_parse_errors():
    with pytest.raises((ParseError, ValidationError)):
        parse_config('target = "s2"\nmodel = "darios"\nL = 1.0\nt_end = 0.1\nn = "many"\n')
    with pytest.raises(ParseError):
        parse_config('target = "s2"\nn = 64\nn = 65\n')
    with pytest.raises(ValidationError):
        parse_config(MINIMAL, {"n": 0})


@pytest.mark.parametrize(
    "text",
    [
        'target = "s6"\na = 1.0\ntrack_E = true\n',
        'target = "s6"\na = 1.0\ndiag_order = 2\n',
        'target = "s2"\nmodel = "darios"\nepsilon = 0.01\n',
        'target = "s2"\nmodel = "darios"\nepsilon_schedule = [1e-2, 1e-3]\n',
        'target = "s6"\nmodel = "fukumoto-miyazaki"\na = 1.0\n',
        'target = "s2"\nmodel = "fukumoto-miyazaki"\na = 1.0\nb = 0.7\n',
        'target = "s2"\na = 1.0\nepsilon_schedule = [1e-3, 1e-2]\n',
        'target = "s2"\na = 1.0\nepsilon_schedule = [2.0, 1e-2]\n',
        'target = "s2"\na = 1.0\nsnapshot_stride = 0\n',
        'target = "s2"\na = 1.0\nprojection = "sometimes"\n',
        'target = "klein-bottle"\na = 1.0\n',
    ],
)
def test_invalid_combinations_rejected(text):
    with pytest.raises((ParseError, ValidationError)):
        parse_config(doc(text))


def test_fm_forces_b():
    cfg = parse_config(doc('target = "s2"\nmodel = "fukumoto-miyazaki"\na = 1.6\n'))
    assert cfg.b == 0.8


def test_projection_forms():
    for s in ('"every_k_steps(3)"', '"every_k_steps:3"'):
        cfg = parse_config(doc(f'target = "s2"\na = 1.0\nprojection = {s}\n'))
        assert (cfg.projection, cfg.projection_k) == ("every_k_steps", 3)


def test_overrides_beat_document_and_preset():
    cfg = parse_config(MINIMAL, {"n": 64})
    assert cfg.n == 64
    cfg = parse_config("", {"preset": "conservation-s2", "t_end": 0.01})
    assert cfg.t_end == 0.01 and cfg.target == "s2"


def test_all_presets_resolve():
    for name in PRESETS:
        parse_config(f'preset = "{name}"\n').solver_config()


# -------------------------------------------------------------------- CLI


def test_describe_prints_resolved_config(capsys):
    assert cli.main(["describe", "--preset", "fukumoto-miyazaki"]) == cli.EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["model"] == "fukumoto-miyazaki" and d["b"] == d["a"] / 2


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text('target = "s2"\nepsilonn = 1\n')
    assert cli.main(["describe", str(p)]) == cli.EXIT_CONFIG
    assert "epsilonn" in capsys.readouterr().err
    assert cli.main(["describe", str(tmp_path / "missing.toml")]) == cli.EXIT_CONFIG


def _small_run(tmp_path, *extra):
    out = tmp_path / "out"
    argv = ["run", "--preset", "conservation-s2", "--n", "64", "--t-end", "0.02",
            "--snapshot-stride", "5", "--output-dir", str(out), *extra]
    return cli.main(argv), out


def test_run_writes_artifacts(tmp_path):
    code, out = _small_run(tmp_path)
    assert code == cli.EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert list(summary)[:6] == ["termination", "t_final", "max_constraint", "max_drift_l2", "max_drift_E", "doubling_time_N4"]
    assert summary["termination"] == "completed"
    snaps = (out / "snapshots.jsonl").read_text().splitlines()
    rows = list(csv.DictReader(io.StringIO((out / "diagnostics.csv").read_text())))
    assert len(snaps) >= 2 and len(rows) >= len(snaps)


def test_snapshot_reload_matches_csv(tmp_path):
    code, out = _small_run(tmp_path)
    assert code == cli.EXIT_OK
    rows = {float(r["t"]): r for r in csv.DictReader(io.StringIO((out / "diagnostics.csv").read_text()))}
    cfg = parse_config("", {"preset": "conservation-s2"})
    for line in (out / "snapshots.jsonl").read_text().splitlines():
        u = MapState.from_json(line)
        u = u.replace(points=u.target.project(u.points))
        rec = dg.record(u, cfg.coefficients, cfg.diag_order)
        row = rows[u.time]
        for key, val in (("l2", rec.sobolev[0]), ("h4", rec.sobolev[4]), ("N_m", rec.gauge_energy_Nm), ("E", rec.conserved_E)):
            assert abs(float(row[key]) - val) <= 1e-12 * max(1.0, abs(val))


def test_strict_runs_are_bitwise_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    _small_run(a, "--strict")
    _small_run(b, "--strict")
    assert (a / "out" / "diagnostics.csv").read_bytes() == (b / "out" / "diagnostics.csv").read_bytes()
    assert (a / "out" / "snapshots.jsonl").read_bytes() == (b / "out" / "snapshots.jsonl").read_bytes()


def test_huge_dt_reports_failure(tmp_path):
    code, out = _small_run(tmp_path, "--dt", "0.01", "--t-end", "0.5")
    assert code in (cli.EXIT_TUBE, cli.EXIT_BLOWUP)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["termination"] in ("tube_exceeded", "blowup_detected")


def test_check_subcommand(capsys):
    code = cli.main(["check", "--preset", "gauge-s6", "--n", "64", "--t-end", "0.002"])
    lines = capsys.readouterr().out.splitlines()
    verdicts = [l for l in lines if l.startswith(("PASS", "FAIL"))]
    assert verdicts and code == (cli.EXIT_OK if all(l.startswith("PASS") for l in verdicts) else cli.EXIT_CHECK)
    assert code == cli.EXIT_OK


def test_sweep_two_values(tmp_path, capsys):
    out = tmp_path / "sweep"
    code = cli.main(["sweep", "--preset", "conservation-s2", "--n", "32", "--t-end", "0.01",
                     "--output-dir", str(out), "--param", "b=0.5,1.0"])
    assert code == cli.EXIT_OK
    merged = json.loads((out / "sweep_summary.json").read_text())
    assert [r["params"]["b"] for r in merged] == [0.5, 1.0]
    for r in merged:
        assert (tmp_path / r["output_dir"] / "summary.json").exists()


def test_sweep_bad_value_is_config_error(tmp_path):
    code = cli.main(["sweep", "--preset", "conservation-s2", "--output-dir", str(tmp_path),
                     "--param", "model=dispersive,heisenberg"])
    assert code == cli.EXIT_CONFIG


def test_continuation_run_layout(tmp_path):
    out = tmp_path / "cont"
    code = cli.main(["run", "--preset", "epsilon-continuation", "--n", "32", "--t-end", "0.002",
                     "--epsilon-schedule", "1e-2,1e-3", "--output-dir", str(out)])
    assert code == cli.EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert [r["epsilon"] for r in summary["runs"]] == [1e-2, 1e-3]
    assert len(summary["gaps"]) == 1
    assert (out / "eps_1e-02" / "diagnostics.csv").exists()
